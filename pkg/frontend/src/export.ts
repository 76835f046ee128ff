/**
 * Export orchestration: products file in, embedding-store binary out.
 *
 * Sequences are encoded in batches but written strictly in file order
 * (titles first, then bullets, per product), one record per sequence. The
 * store dim is taken from the encoder, so the header always records the
 * encoder's hidden width; every row is width-checked on the way out.
 */

import { resolveEncoder } from './encoder.js';
import { readProducts, sequencesOf, ExportError } from './products.js';
import { formatKey, StoreWriter } from './store.js';

export interface ExportJob {
  productsPath: string;
  model: string;
  outPath: string;
  batchSize?: number;
  includeCls?: boolean;
  device?: string;
}

export interface ExportSummary {
  records: number;
  dim: number;
  tokenRows: number;
  clsRows: number;
}

export async function exportEmbeddings(job: ExportJob): Promise<ExportSummary> {
  const batchSize = job.batchSize ?? 32;
  if (!Number.isInteger(batchSize) || batchSize < 1) {
    throw new ExportError(`batch size must be a positive integer, got ${batchSize}`);
  }
  const includeCls = job.includeCls ?? false;
  const products = readProducts(job.productsPath);
  const sequences = sequencesOf(products);
  if (sequences.length === 0) {
    throw new ExportError(`${job.productsPath}: no sequences to export`);
  }
  const encoder = await resolveEncoder(job.model, job.device);

  const writer = await StoreWriter.create(job.outPath, encoder.dim, sequences.length);
  let tokenRows = 0;
  let clsRows = 0;
  try {
    for (let start = 0; start < sequences.length; start += batchSize) {
      // batching bounds encoder memory; write order stays the file order
      const batch = sequences.slice(start, start + batchSize);
      const encoded = await encoder.encodeBatch(batch, includeCls);
      if (encoded.length !== batch.length) {
        throw new ExportError(
          `encoder returned ${encoded.length} sequences for a batch of ${batch.length}`
        );
      }
      for (let i = 0; i < batch.length; i++) {
        const seq = batch[i]!;
        const enc = encoded[i]!;
        if (enc.tokenVectors.length !== seq.tokens.length) {
          throw new ExportError(
            `product ${seq.pid} ${seq.kind} ${seq.index}: encoder returned ` +
              `${enc.tokenVectors.length} rows for ${seq.tokens.length} tokens`
          );
        }
        if (includeCls && enc.cls === null) {
          throw new ExportError(
            `product ${seq.pid} ${seq.kind} ${seq.index}: encoder returned no CLS row`
          );
        }
        const cls = includeCls ? enc.cls : null;
        await writer.writeRecord(formatKey(seq.pid, seq.kind, seq.index), enc.tokenVectors, cls);
        tokenRows += enc.tokenVectors.length;
        if (cls !== null) clsRows += 1;
      }
    }
  } catch (err) {
    await writer.abort();
    throw err;
  }
  await writer.close();
  return { records: sequences.length, dim: encoder.dim, tokenRows, clsRows };
}
