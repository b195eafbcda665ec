import fs from 'node:fs';
import os from 'node:os';
import path from 'node:path';

import { afterAll, describe, expect, it } from 'vitest';

import { loadCifar10, loadCifar100, loadDataset } from '../src/cifar.js';

const tmp = fs.mkdtempSync(path.join(os.tmpdir(), 'cifar-'));
afterAll(() => fs.rmSync(tmp, { recursive: true, force: true }));

function fakeCifar10Batch(labels: number[]): Buffer {
  const record = 1 + 3072;
  const buf = Buffer.alloc(labels.length * record);
  labels.forEach((label, i) => {
    buf[i * record] = label;
    for (let p = 0; p < 3072; p++) buf[i * record + 1 + p] = (i * 31 + p) % 256;
  });
  return buf;
}

function fakeCifar100(labels: Array<[number, number]>): Buffer {
  const record = 2 + 3072;
  const buf = Buffer.alloc(labels.length * record);
  labels.forEach(([coarse, fine], i) => {
    buf[i * record] = coarse;
    buf[i * record + 1] = fine;
    for (let p = 0; p < 3072; p++) buf[i * record + 2 + p] = (i * 7 + p) % 256;
  });
  return buf;
}

describe('cifar readers', () => {
  it('parses cifar-10 test batches', () => {
    const dir = path.join(tmp, 'c10');
    fs.mkdirSync(dir, { recursive: true });
    fs.writeFileSync(path.join(dir, 'test_batch.bin'), fakeCifar10Batch([3, 9, 0]));
    const ds = loadCifar10(dir, 'test');
    expect(Array.from(ds.labels)).toEqual([3, 9, 0]);
    expect(ds.images).toHaveLength(3);
    expect(ds.images[0]).toHaveLength(3072);
    expect(ds.classNames).toHaveLength(10);
  });

  it('concatenates the five train batches in order', () => {
    const dir = path.join(tmp, 'c10train');
    fs.mkdirSync(dir, { recursive: true });
    for (let b = 1; b <= 5; b++) {
      fs.writeFileSync(path.join(dir, `data_batch_${b}.bin`), fakeCifar10Batch([b]));
    }
    const ds = loadCifar10(dir, 'train');
    expect(Array.from(ds.labels)).toEqual([1, 2, 3, 4, 5]);
  });

  it('reads the fine label of cifar-100 records', () => {
    const dir = path.join(tmp, 'c100');
    fs.mkdirSync(dir, { recursive: true });
    fs.writeFileSync(path.join(dir, 'test.bin'), fakeCifar100([[1, 42], [0, 7]]));
    const ds = loadCifar100(dir, 'test');
    expect(Array.from(ds.labels)).toEqual([42, 7]);
  });

  it('raises on missing archives', () => {
    expect(() => loadCifar10(path.join(tmp, 'absent'), 'test')).toThrow(/missing/);
  });

  it('rejects unknown datasets', () => {
    expect(() => loadDataset('imagenet', tmp, 'test')).toThrow(/unknown dataset/);
  });

  it('rejects malformed record sizes', () => {
    const dir = path.join(tmp, 'broken');
    fs.mkdirSync(dir, { recursive: true });
    fs.writeFileSync(path.join(dir, 'test_batch.bin'), Buffer.alloc(100));
    expect(() => loadCifar10(dir, 'test')).toThrow(/multiple/);
  });
});
