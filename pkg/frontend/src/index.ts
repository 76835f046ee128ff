export { ExportError, readProducts, sequencesOf } from './products.js';
export type { Product, Sequence, SequenceKind, TokenSeq } from './products.js';
export { createHashEncoder, hashVector, resolveEncoder, subwordsOf } from './encoder.js';
export type { EncodedSequence, Encoder } from './encoder.js';
export { formatKey, readStore, StoreWriter, KEY_SEP, STORE_MAGIC, STORE_VERSION } from './store.js';
export type { StoreFile, StoreRecord } from './store.js';
export { exportEmbeddings } from './export.js';
export type { ExportJob, ExportSummary } from './export.js';
