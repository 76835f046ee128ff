/**
 * Embedding-store binary writer and reader.
 *
 * Layout, all little-endian:
 *   header: "AMES" magic, u32 version (1), u32 dim, u64 record count
 *   record: u16 key length, key bytes, u32 token count, u8 has_cls,
 *           token rows as float32 (row-major), then one CLS row if has_cls.
 *
 * The key is "<pid>\x1f<kind>\x1f<index>" in UTF-8, kind is "title" or
 * "bullet". When has_cls is 1 the CLS row comes after the token rows.
 */

import { open } from 'node:fs/promises';
import { readFileSync } from 'node:fs';
import { ExportError, type SequenceKind } from './products.js';

export const STORE_MAGIC = 'AMES';
export const STORE_VERSION = 1;
export const KEY_SEP = '\x1f';
const HEADER_SIZE = 20;

export function formatKey(pid: string, kind: SequenceKind, index: number): string {
  return [pid, kind, String(index)].join(KEY_SEP);
}

function headerBytes(dim: number, count: number): Buffer {
  const buf = Buffer.alloc(HEADER_SIZE);
  buf.write(STORE_MAGIC, 0, 'ascii');
  buf.writeUInt32LE(STORE_VERSION, 4);
  buf.writeUInt32LE(dim, 8);
  buf.writeBigUInt64LE(BigInt(count), 12);
  return buf;
}

/**
 * Streaming writer: one write per record, so memory stays bounded by the
 * largest single sequence. The record count is part of the constructor
 * contract and close() fails if the caller wrote a different number.
 */
export class StoreWriter {
  private written = 0;
  private handle: import('node:fs/promises').FileHandle | null = null;

  private constructor(
    readonly path: string,
    readonly dim: number,
    readonly count: number
  ) {}

  static async create(path: string, dim: number, count: number): Promise<StoreWriter> {
    if (!Number.isInteger(dim) || dim < 1) {
      throw new ExportError(`store dim must be a positive integer, got ${dim}`);
    }
    const writer = new StoreWriter(path, dim, count);
    writer.handle = await open(path, 'w');
    await writer.handle.write(headerBytes(dim, count));
    return writer;
  }

  async writeRecord(key: string, tokenRows: Float32Array[], cls: Float32Array | null): Promise<void> {
    if (this.handle === null) throw new Error('writer is closed');
    if (tokenRows.length === 0) {
      throw new ExportError(`record ${JSON.stringify(key)}: zero token rows`);
    }
    const keyBytes = Buffer.from(key, 'utf8');
    if (keyBytes.length > 0xffff) {
      throw new ExportError(`record ${JSON.stringify(key)}: key too long`);
    }
    const rows = cls === null ? tokenRows : [...tokenRows, cls];
    const size = 2 + keyBytes.length + 5 + rows.length * this.dim * 4;
    const buf = Buffer.alloc(size);
    let off = 0;
    buf.writeUInt16LE(keyBytes.length, off);
    off += 2;
    keyBytes.copy(buf, off);
    off += keyBytes.length;
    buf.writeUInt32LE(tokenRows.length, off);
    off += 4;
    buf.writeUInt8(cls === null ? 0 : 1, off);
    off += 1;
    for (const row of rows) {
      if (row.length !== this.dim) {
        throw new ExportError(
          `record ${JSON.stringify(key)}: row has width ${row.length}, store dim is ${this.dim}`
        );
      }
      for (let j = 0; j < this.dim; j++) {
        buf.writeFloatLE(row[j]!, off);
        off += 4;
      }
    }
    await this.handle.write(buf);
    this.written += 1;
  }

  async close(): Promise<void> {
    if (this.handle === null) return;
    await this.handle.close();
    this.handle = null;
    if (this.written !== this.count) {
      throw new ExportError(
        `store ${this.path}: header declares ${this.count} records but ${this.written} were written`
      );
    }
  }

  /** Closes the handle without the record-count check, for error paths. */
  async abort(): Promise<void> {
    if (this.handle === null) return;
    await this.handle.close();
    this.handle = null;
  }
}

export interface StoreRecord {
  key: string;
  tokenRows: Float32Array[];
  cls: Float32Array | null;
}

export interface StoreFile {
  dim: number;
  records: StoreRecord[];
}

/** Reads a store file back, applying the same structural checks as the consumer. */
export function readStore(path: string): StoreFile {
  const data = readFileSync(path);
  if (data.length < HEADER_SIZE) {
    throw new ExportError(`byte 0: file too short for header (${data.length} bytes)`);
  }
  if (data.toString('ascii', 0, 4) !== STORE_MAGIC) {
    throw new ExportError(`byte 0: bad magic`);
  }
  const version = data.readUInt32LE(4);
  if (version !== STORE_VERSION) {
    throw new ExportError(`byte 4: unsupported version ${version}`);
  }
  const dim = data.readUInt32LE(8);
  const count = Number(data.readBigUInt64LE(12));
  const records: StoreRecord[] = [];
  let off = HEADER_SIZE;
  for (let rec = 0; rec < count; rec++) {
    if (off + 2 > data.length) throw new ExportError(`byte ${off}: truncated record ${rec}`);
    const keyLen = data.readUInt16LE(off);
    off += 2;
    if (off + keyLen + 5 > data.length) {
      throw new ExportError(`byte ${off}: truncated record ${rec}`);
    }
    const key = data.toString('utf8', off, off + keyLen);
    off += keyLen;
    const tokenCount = data.readUInt32LE(off);
    off += 4;
    const hasCls = data.readUInt8(off);
    off += 1;
    if (tokenCount < 1) throw new ExportError(`record ${rec}: zero tokens`);
    if (hasCls !== 0 && hasCls !== 1) throw new ExportError(`record ${rec}: bad has_cls ${hasCls}`);
    const nRows = tokenCount + hasCls;
    if (off + nRows * dim * 4 > data.length) {
      throw new ExportError(`byte ${off}: truncated record ${rec} (vectors)`);
    }
    const rows: Float32Array[] = [];
    for (let r = 0; r < nRows; r++) {
      const row = new Float32Array(dim);
      for (let j = 0; j < dim; j++) {
        row[j] = data.readFloatLE(off);
        off += 4;
      }
      rows.push(row);
    }
    records.push({
      key,
      tokenRows: rows.slice(0, tokenCount),
      cls: hasCls === 1 ? rows[tokenCount]! : null,
    });
  }
  if (off !== data.length) {
    throw new ExportError(`byte ${off}: ${data.length - off} trailing bytes`);
  }
  return { dim, records };
}
