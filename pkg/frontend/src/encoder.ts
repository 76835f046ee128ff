/**
 * Contextual encoders that turn a token sequence into one vector per token.
 *
 * Two families are supported:
 *
 *  - "hash:<dim>": a self-contained deterministic encoder. Tokens are split
 *    into subword pieces, each piece maps to a unit vector derived from its
 *    SHA-256 digest, and the token vector is the mean over its pieces. No
 *    model download, bitwise reproducible everywhere; intended for tests,
 *    fixtures, and offline runs.
 *
 *  - any other id: resolved as a feature-extraction model through
 *    transformers.js (@huggingface/transformers, or the older @xenova
 *    package). Subword rows are mean-pooled back onto the file's token
 *    boundaries. The package is an optional dependency; a clear error is
 *    raised when it is not installed.
 *
 * Both paths guarantee one output row per input token, which is what the
 * store format and the downstream consumer require.
 */

import { createHash } from 'node:crypto';
import { ExportError, type Sequence } from './products.js';

export interface EncodedSequence {
  tokenVectors: Float32Array[];
  cls: Float32Array | null;
}

export interface Encoder {
  readonly model: string;
  readonly dim: number;
  encodeBatch(batch: Sequence[], includeCls: boolean): Promise<EncodedSequence[]>;
}

const MAX_PIECE = 4; // codepoints per subword piece
const MAX_HASH_DIM = 4096;

/**
 * Splits a token into subword pieces: whitespace and control codepoints are
 * dropped, the rest is chunked into runs of up to four codepoints, and
 * continuation chunks carry a "##" marker so piece identity depends on
 * position, like a wordpiece vocabulary. A token with no coverable
 * codepoints yields zero pieces.
 */
export function subwordsOf(token: string): string[] {
  const chars: string[] = [];
  for (const ch of token) {
    const cp = ch.codePointAt(0)!;
    if (/\s/u.test(ch) || cp < 0x20 || cp === 0x7f) continue;
    chars.push(ch);
  }
  const pieces: string[] = [];
  for (let i = 0; i < chars.length; i += MAX_PIECE) {
    const piece = chars.slice(i, i + MAX_PIECE).join('');
    pieces.push(i === 0 ? piece : '##' + piece);
  }
  return pieces;
}

/** Deterministic unit vector for a string: SHA-256 counter blocks -> floats. */
export function hashVector(text: string, dim: number): Float32Array {
  const values = new Float64Array(dim);
  let filled = 0;
  for (let block = 0; filled < dim; block++) {
    const digest = createHash('sha256').update(`${text}\x00${block}`).digest();
    for (let off = 0; off + 4 <= digest.length && filled < dim; off += 4) {
      // u32 -> [-1, 1)
      values[filled++] = (digest.readUInt32LE(off) / 0x100000000) * 2 - 1;
    }
  }
  let norm = 0;
  for (let j = 0; j < dim; j++) norm += values[j]! * values[j]!;
  norm = Math.sqrt(norm);
  const out = new Float32Array(dim);
  for (let j = 0; j < dim; j++) out[j] = values[j]! / norm;
  return out;
}

function meanRows(rows: Float32Array[], dim: number): Float32Array {
  const acc = new Float64Array(dim);
  for (const row of rows) {
    for (let j = 0; j < dim; j++) acc[j]! += row[j]!;
  }
  const out = new Float32Array(dim);
  for (let j = 0; j < dim; j++) out[j] = acc[j]! / rows.length;
  return out;
}

function normalized(row: Float32Array): Float32Array {
  let norm = 0;
  for (let j = 0; j < row.length; j++) norm += row[j]! * row[j]!;
  norm = Math.sqrt(norm);
  if (norm === 0) return row;
  const out = new Float32Array(row.length);
  for (let j = 0; j < row.length; j++) out[j] = row[j]! / norm;
  return out;
}

function zeroSubwordError(token: string, seq: Sequence): ExportError {
  return new ExportError(
    `tokenizer produced zero subwords for token ${JSON.stringify(token)} ` +
      `(product ${seq.pid}, ${seq.kind} ${seq.index})`
  );
}

export function createHashEncoder(dim: number): Encoder {
  if (!Number.isInteger(dim) || dim < 1 || dim > MAX_HASH_DIM) {
    throw new ExportError(`hash encoder dim must be in 1..${MAX_HASH_DIM}, got ${dim}`);
  }
  const pieceCache = new Map<string, Float32Array>();
  const pieceVector = (piece: string): Float32Array => {
    let vec = pieceCache.get(piece);
    if (vec === undefined) {
      vec = hashVector(piece, dim);
      pieceCache.set(piece, vec);
    }
    return vec;
  };
  return {
    model: `hash:${dim}`,
    dim,
    async encodeBatch(batch: Sequence[], includeCls: boolean): Promise<EncodedSequence[]> {
      const out: EncodedSequence[] = [];
      for (const seq of batch) {
        const tokenVectors: Float32Array[] = [];
        for (const token of seq.tokens) {
          const pieces = subwordsOf(token);
          if (pieces.length === 0) throw zeroSubwordError(token, seq);
          tokenVectors.push(meanRows(pieces.map(pieceVector), dim));
        }
        // no real [CLS] output exists, so the summary row is the
        // normalized mean of the token rows
        const cls = includeCls ? normalized(meanRows(tokenVectors, dim)) : null;
        out.push({ tokenVectors, cls });
      }
      return out;
    },
  };
}

async function loadTransformers(): Promise<any> {
  for (const name of ['@huggingface/transformers', '@xenova/transformers']) {
    try {
      return await import(name);
    } catch {
      // try the next candidate
    }
  }
  throw new ExportError(
    'hub model ids need the optional transformers.js package; run ' +
      '"npm install @huggingface/transformers" or use the built-in "hash:<dim>" encoder'
  );
}

/**
 * Wraps a transformers.js feature-extraction model. The products file is
 * already word-tokenized, so rows come back at subword granularity and are
 * mean-pooled onto word boundaries: each word is re-tokenized on its own to
 * learn its subword count, and the row stream (minus special tokens, assumed
 * to be one leading and the rest trailing) is consumed in those counts.
 */
async function createHubEncoder(model: string, device?: string): Promise<Encoder> {
  const tf = await loadTransformers();
  const tokenizer = await tf.AutoTokenizer.from_pretrained(model);
  const extractor = await tf.pipeline('feature-extraction', model, device ? { device } : {});
  const probe = await extractor('a', { pooling: 'none' });
  const dim: number = probe.dims[probe.dims.length - 1];

  const encodeOne = async (seq: Sequence, includeCls: boolean): Promise<EncodedSequence> => {
    const counts: number[] = [];
    for (const token of seq.tokens) {
      const pieces: string[] = tokenizer.tokenize(token);
      if (pieces.length === 0) throw zeroSubwordError(token, seq);
      counts.push(pieces.length);
    }
    const text = seq.tokens.join(' ');
    const output = await extractor(text, { pooling: 'none' });
    const [, nRows, outDim] = output.dims as [number, number, number];
    if (outDim !== dim) {
      throw new ExportError(`model ${model}: row width ${outDim} does not match probe dim ${dim}`);
    }
    const data: Float32Array = output.data;
    const row = (r: number) => new Float32Array(data.subarray(r * dim, (r + 1) * dim));

    const totalPieces = counts.reduce((a, b) => a + b, 0);
    const nSpecial = nRows - totalPieces;
    if (nSpecial < 0 || nSpecial > 2) {
      throw new ExportError(
        `model ${model}: cannot align ${nRows} rows to ${totalPieces} subwords ` +
          `(product ${seq.pid}, ${seq.kind} ${seq.index})`
      );
    }
    const lead = nSpecial >= 1 ? 1 : 0;
    const tokenVectors: Float32Array[] = [];
    let cursor = lead;
    for (const count of counts) {
      const rows: Float32Array[] = [];
      for (let r = 0; r < count; r++) rows.push(row(cursor + r));
      tokenVectors.push(meanRows(rows, dim));
      cursor += count;
    }
    const cls = includeCls ? (lead === 1 ? row(0) : normalized(meanRows(tokenVectors, dim))) : null;
    return { tokenVectors, cls };
  };

  return {
    model,
    dim,
    async encodeBatch(batch: Sequence[], includeCls: boolean): Promise<EncodedSequence[]> {
      return Promise.all(batch.map((seq) => encodeOne(seq, includeCls)));
    },
  };
}

const HASH_ID = /^hash:(\d+)$/;

/** Resolves a model identifier to an encoder instance. */
export async function resolveEncoder(model: string, device?: string): Promise<Encoder> {
  const match = HASH_ID.exec(model);
  if (match) return createHashEncoder(Number(match[1]));
  return createHubEncoder(model, device);
}
