import { mkdtempSync, writeFileSync } from 'node:fs';
import { tmpdir } from 'node:os';
import { join } from 'node:path';
import type { Product } from '../src/products.js';

/** Deterministic PRNG for property loops (mulberry32). */
export function seededRng(seed: number): () => number {
  let state = seed >>> 0;
  return () => {
    state = (state + 0x6d2b79f5) >>> 0;
    let t = state;
    t = Math.imul(t ^ (t >>> 15), t | 1);
    t ^= t + Math.imul(t ^ (t >>> 7), t | 61);
    return ((t ^ (t >>> 14)) >>> 0) / 0x100000000;
  };
}

export function randomToken(rng: () => number, minLen = 1, maxLen = 10): string {
  const letters = 'abcdefghijklmnopqrstuvwxyz';
  const len = minLen + Math.floor(rng() * (maxLen - minLen + 1));
  let out = '';
  for (let i = 0; i < len; i++) out += letters[Math.floor(rng() * letters.length)];
  return out;
}

export function makeTmpDir(prefix: string): string {
  return mkdtempSync(join(tmpdir(), prefix));
}

/** Writes a products JSONL file; pos defaults to NOUN per token. */
export function writeProductsFile(dir: string, products: Product[], name = 'products.jsonl'): string {
  const path = join(dir, name);
  const lines = products.map((p) =>
    JSON.stringify({
      id: p.id,
      category: p.category,
      title: p.title,
      bullets: p.bullets,
    })
  );
  writeFileSync(path, lines.join('\n') + '\n');
  return path;
}

export function seq(tokens: string[]): { tokens: string[]; pos: string[] } {
  return { tokens, pos: tokens.map(() => 'NOUN') };
}
