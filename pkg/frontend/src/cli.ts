#!/usr/bin/env node
/**
 * export-embeddings: command-line front end for the exporter.
 *
 * Exit codes: 0 on success, 1 for usage and input validation problems,
 * 2 for unexpected runtime failures.
 */

import { realpathSync } from 'node:fs';
import { pathToFileURL } from 'node:url';
import { parseArgs } from 'node:util';
import { exportEmbeddings } from './export.js';
import { ExportError } from './products.js';

const USAGE = `usage: export-embeddings --products <path> --model <id> --out <path> [--cls] [--batch N] [--device <hint>]

Runs a contextual encoder over a tokenized products file (JSON Lines) and
writes the embedding-store binary, one record per title or bullet sequence.

options:
  --products <path>  products file to read
  --model <id>       encoder: "hash:<dim>" (built-in, deterministic) or a
                     transformers.js feature-extraction model id
  --out <path>       store file to write
  --cls              also store one summary (CLS) row per sequence
  --batch N          sequences per inference batch (default 32)
  --device <hint>    device hint passed to hub models (ignored by hash:)
  --help             show this message`;

export async function run(argv: string[]): Promise<number> {
  let args;
  try {
    args = parseArgs({
      args: argv,
      options: {
        products: { type: 'string' },
        model: { type: 'string' },
        out: { type: 'string' },
        cls: { type: 'boolean', default: false },
        batch: { type: 'string' },
        device: { type: 'string' },
        help: { type: 'boolean', default: false },
      },
      allowPositionals: false,
    });
  } catch (err) {
    process.stderr.write(`export-embeddings: error: ${(err as Error).message}\n${USAGE}\n`);
    return 1;
  }
  const { values } = args;
  if (values.help) {
    process.stdout.write(USAGE + '\n');
    return 0;
  }
  for (const name of ['products', 'model', 'out'] as const) {
    if (values[name] === undefined) {
      process.stderr.write(`export-embeddings: error: --${name} is required\n${USAGE}\n`);
      return 1;
    }
  }
  let batchSize = 32;
  if (values.batch !== undefined) {
    batchSize = Number(values.batch);
    if (!Number.isInteger(batchSize) || batchSize < 1) {
      process.stderr.write(`export-embeddings: error: --batch must be a positive integer\n`);
      return 1;
    }
  }
  try {
    const summary = await exportEmbeddings({
      productsPath: values.products!,
      model: values.model!,
      outPath: values.out!,
      batchSize,
      includeCls: values.cls,
      device: values.device,
    });
    process.stdout.write(
      `${values.out}: ${summary.records} records, dim ${summary.dim}, ` +
        `${summary.tokenRows} token rows, ${summary.clsRows} cls rows\n`
    );
    return 0;
  } catch (err) {
    if (err instanceof ExportError) {
      process.stderr.write(`export-embeddings: error: ${err.message}\n`);
      return 1;
    }
    process.stderr.write(`export-embeddings: runtime error: ${(err as Error).message}\n`);
    return 2;
  }
}

function invokedDirectly(): boolean {
  const entry = process.argv[1];
  if (entry === undefined) return false;
  try {
    // resolve symlinks so installed bin shims still match
    return import.meta.url === pathToFileURL(realpathSync(entry)).href;
  } catch {
    return false;
  }
}

if (invokedDirectly()) {
  run(process.argv.slice(2)).then((code) => {
    process.exitCode = code;
  });
}
