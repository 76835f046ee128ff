/**
 * Reader for the tokenized products file (JSON Lines).
 *
 * Each line holds one product:
 *   {"id", "category", "title": {"tokens", "pos"}, "bullets": [{"tokens", "pos"}, ...]}
 *
 * The exporter only needs token strings and sequence identity; POS tags are
 * carried by the file for the downstream pipeline and are validated here for
 * shape (same length as tokens) but otherwise ignored.
 */

import { readFileSync } from 'node:fs';

/** Validation failure in inputs or arguments; maps to exit code 1. */
export class ExportError extends Error {}

export interface TokenSeq {
  tokens: string[];
  pos: string[];
}

export interface Product {
  id: string;
  category: string;
  title: TokenSeq;
  bullets: TokenSeq[];
}

export type SequenceKind = 'title' | 'bullet';

/** One embeddable sequence: a product title or a single bullet. */
export interface Sequence {
  pid: string;
  kind: SequenceKind;
  index: number;
  tokens: string[];
}

function asRecord(value: unknown, where: string): Record<string, unknown> {
  if (typeof value !== 'object' || value === null || Array.isArray(value)) {
    throw new ExportError(`${where}: expected a JSON object`);
  }
  return value as Record<string, unknown>;
}

function asStringArray(value: unknown, where: string): string[] {
  if (!Array.isArray(value) || value.some((v) => typeof v !== 'string')) {
    throw new ExportError(`${where}: expected an array of strings`);
  }
  return value as string[];
}

function readSeq(value: unknown, where: string): TokenSeq {
  const obj = asRecord(value, where);
  const tokens = asStringArray(obj.tokens, `${where} tokens`);
  const pos = asStringArray(obj.pos, `${where} pos`);
  if (tokens.length !== pos.length) {
    throw new ExportError(
      `${where}: tokens (${tokens.length}) and pos (${pos.length}) lengths differ`
    );
  }
  if (tokens.length === 0) {
    throw new ExportError(`${where}: sequence has no tokens`);
  }
  return { tokens, pos };
}

/** Parses a products file, failing with a line-numbered message on bad input. */
export function readProducts(path: string): Product[] {
  let text: string;
  try {
    text = readFileSync(path, 'utf8');
  } catch (err) {
    throw new ExportError(`cannot read products file ${path}: ${(err as Error).message}`);
  }
  const products: Product[] = [];
  const seen = new Set<string>();
  const lines = text.split('\n');
  for (let i = 0; i < lines.length; i++) {
    const line = lines[i]!.trim();
    if (line === '') continue;
    const where = `${path} line ${i + 1}`;
    let raw: unknown;
    try {
      raw = JSON.parse(line);
    } catch (err) {
      throw new ExportError(`${where}: invalid JSON (${(err as Error).message})`);
    }
    const obj = asRecord(raw, where);
    const id = obj.id;
    if (typeof id !== 'string' || id === '') {
      throw new ExportError(`${where}: missing or empty "id"`);
    }
    if (seen.has(id)) {
      throw new ExportError(`${where}: duplicate product id ${JSON.stringify(id)}`);
    }
    seen.add(id);
    const category = obj.category;
    if (typeof category !== 'string') {
      throw new ExportError(`${where}: missing "category"`);
    }
    const title = readSeq(obj.title, `${where} title`);
    const bullets: TokenSeq[] = [];
    const rawBullets = obj.bullets ?? [];
    if (!Array.isArray(rawBullets)) {
      throw new ExportError(`${where}: "bullets" must be an array`);
    }
    for (let b = 0; b < rawBullets.length; b++) {
      bullets.push(readSeq(rawBullets[b], `${where} bullet ${b}`));
    }
    products.push({ id, category, title, bullets });
  }
  return products;
}

/** Flattens products into sequences, title first then bullets, in file order. */
export function sequencesOf(products: Product[]): Sequence[] {
  const seqs: Sequence[] = [];
  for (const p of products) {
    seqs.push({ pid: p.id, kind: 'title', index: 0, tokens: p.title.tokens });
    for (let b = 0; b < p.bullets.length; b++) {
      seqs.push({ pid: p.id, kind: 'bullet', index: b, tokens: p.bullets[b]!.tokens });
    }
  }
  return seqs;
}
