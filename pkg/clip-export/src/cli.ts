#!/usr/bin/env node
/**
 * Export frozen-encoder features for the federated trainer.
 *
 *   clip-export images --dataset cifar10 --split test --data-dir cifar-10-batches-bin \
 *       --out data/clip/cifar10_test.fedf [--encoder clip|mock] [--model id] [--dim N]
 *   clip-export text --dataset cifar10 --out data/clip/cifar10_prototypes.fedf \
 *       [--classes names.json] [--encoder clip|mock] [--model id] [--dim N]
 */

import fs from 'node:fs';
import process from 'node:process';

import { CIFAR10_CLASSES, loadDataset } from './cifar.js';
import { makeEncoder } from './encoder.js';
import { exportImageFeatures, exportTextPrototypes } from './export.js';

interface Args {
  command: string;
  dataset: string;
  split: 'train' | 'test';
  dataDir: string;
  out: string;
  encoder: string;
  model?: string;
  dim?: number;
  classes?: string;
}

function parseArgs(argv: string[]): Args {
  const [command, ...rest] = argv;
  const args: Record<string, string> = {};
  for (let i = 0; i < rest.length; i += 2) {
    const key = rest[i];
    if (!key.startsWith('--') || i + 1 >= rest.length) {
      throw new Error(`malformed arguments near ${key}`);
    }
    args[key.slice(2)] = rest[i + 1];
  }
  if (command !== 'images' && command !== 'text') {
    throw new Error('usage: clip-export <images|text> --dataset ... --out ...');
  }
  if (!args.out) throw new Error('--out is required');
  return {
    command,
    dataset: args.dataset ?? 'cifar10',
    split: (args.split ?? 'test') as 'train' | 'test',
    dataDir: args['data-dir'] ?? '.',
    out: args.out,
    encoder: args.encoder ?? 'clip',
    model: args.model,
    dim: args.dim ? Number(args.dim) : undefined,
    classes: args.classes,
  };
}

async function main() {
  const args = parseArgs(process.argv.slice(2));
  const encoder = makeEncoder(args.encoder, args.model, args.dim);

  if (args.command === 'images') {
    const dataset = loadDataset(args.dataset, args.dataDir, args.split);
    const manifest = await exportImageFeatures(dataset, encoder, args.out);
    console.log(`wrote ${manifest.n} x ${manifest.d} ${manifest.dataset}/${manifest.split} ` +
                `features (${manifest.encoder}) -> ${args.out}`);
    console.log(`sha256 ${manifest.checksum}`);
    return;
  }

  let classNames: string[];
  if (args.classes) {
    const doc = JSON.parse(fs.readFileSync(args.classes, 'utf8'));
    classNames = Array.isArray(doc)
      ? doc.map(String)
      : Object.keys(doc).sort((a, b) => Number(a) - Number(b)).map((k) => String(doc[k]));
  } else if (args.dataset === 'cifar10' || args.dataset === 'cinic10') {
    classNames = CIFAR10_CLASSES;
  } else {
    throw new Error(`no built-in class names for ${args.dataset}; pass --classes`);
  }
  const manifest = await exportTextPrototypes(args.dataset, classNames, encoder, args.out);
  console.log(`wrote ${manifest.n} x ${manifest.d} ${manifest.dataset} prototypes ` +
              `("${manifest.template}", ${manifest.encoder}) -> ${args.out}`);
  console.log(`sha256 ${manifest.checksum}`);
}

main().catch((err) => {
  console.error(`error: ${err.message}`);
  process.exit(1);
});
