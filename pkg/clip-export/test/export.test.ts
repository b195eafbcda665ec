import { execFileSync } from 'node:child_process';
import fs from 'node:fs';
import os from 'node:os';
import path from 'node:path';

import { afterAll, describe, expect, it } from 'vitest';

import { ImageDataset } from '../src/cifar.js';
import { MockEncoder } from '../src/encoder.js';
import { decodeFedf } from '../src/fedf.js';
import { buildManifest } from '../src/manifest.js';
import { exportImageFeatures, exportTextPrototypes, PROMPT_TEMPLATE } from '../src/export.js';

const tmp = fs.mkdtempSync(path.join(os.tmpdir(), 'export-'));
afterAll(() => fs.rmSync(tmp, { recursive: true, force: true }));

function fakeDataset(n: number): ImageDataset {
  const images: Uint8Array[] = [];
  const labels = new Uint32Array(n);
  for (let i = 0; i < n; i++) {
    const img = new Uint8Array(3072);
    for (let p = 0; p < 3072; p++) img[p] = (i * 131 + p * 7) % 256;
    images.push(img);
    labels[i] = i % 4;
  }
  return { name: 'cifar10', split: 'test', images, labels,
           classNames: ['a', 'b', 'c', 'd'] };
}

function rowNorm(features: Float32Array, d: number, row: number): number {
  let sq = 0;
  for (let j = 0; j < d; j++) sq += features[row * d + j] ** 2;
  return Math.sqrt(sq);
}

describe('image feature export', () => {
  it('writes features, labels, manifest and class sidecar', async () => {
    const out = path.join(tmp, 'imgs.fedf');
    const manifest = await exportImageFeatures(fakeDataset(12), new MockEncoder(64), out);
    expect(manifest).toMatchObject({ dataset: 'cifar10', split: 'test', n: 12, d: 64 });
    expect(manifest.template).toBe(PROMPT_TEMPLATE);

    const file = decodeFedf(fs.readFileSync(out));
    expect(file.n).toBe(12);
    expect(file.d).toBe(64);
    expect(file.normalized).toBe(true);
    expect(Array.from(file.labels!)).toEqual([...Array(12)].map((_, i) => i % 4));
    for (let r = 0; r < file.n; r++) {
      expect(rowNorm(file.features, 64, r)).toBeCloseTo(1, 3);
    }
    const classes = JSON.parse(
      fs.readFileSync(path.join(tmp, 'imgs.classes.json'), 'utf8'));
    expect(classes['2']).toBe('c');
    const sidecar = JSON.parse(
      fs.readFileSync(path.join(tmp, 'imgs.manifest.json'), 'utf8'));
    expect(sidecar.checksum).toBe(manifest.checksum);
  });

  it('re-export is checksum-identical', async () => {
    const a = await exportImageFeatures(fakeDataset(6), new MockEncoder(32),
                                        path.join(tmp, 'a.fedf'));
    const b = await exportImageFeatures(fakeDataset(6), new MockEncoder(32),
                                        path.join(tmp, 'b.fedf'));
    expect(a.checksum).toBe(b.checksum);
  });
});

describe('text prototype export', () => {
  it('writes one unit row per class in index order', async () => {
    const out = path.join(tmp, 'protos.fedf');
    const names = ['airplane', 'dog', 'ship'];
    const manifest = await exportTextPrototypes('cifar10', names, new MockEncoder(48), out);
    expect(manifest.n).toBe(3);
    const file = decodeFedf(fs.readFileSync(out));
    expect(file.labels).toBeUndefined();
    for (let r = 0; r < 3; r++) expect(rowNorm(file.features, 48, r)).toBeCloseTo(1, 3);

    // prototype rows are a pure function of the prompt text
    const enc = new MockEncoder(48);
    const direct = await enc.encodeTexts(['a photo of a dog']);
    expect(Array.from(file.features.slice(48, 96)))
      .toEqual(Array.from(direct[0]));
  });

  it('rejects empty class lists', async () => {
    await expect(exportTextPrototypes('cifar10', [], new MockEncoder(8),
                                      path.join(tmp, 'x.fedf'))).rejects.toThrow();
  });
});

describe('manifest rules', () => {
  it('pins the RN50 width to 1024', () => {
    expect(() => buildManifest(
      { dataset: 'cifar10', split: 'test', encoder: 'RN50', template: PROMPT_TEMPLATE, n: 1, d: 512 },
      Buffer.alloc(1),
    )).toThrow(/1024/);
    const ok = buildManifest(
      { dataset: 'cifar10', split: 'test', encoder: 'RN50', template: PROMPT_TEMPLATE, n: 1, d: 1024 },
      Buffer.alloc(1),
    );
    expect(ok.checksum).toHaveLength(64);
  });
});

describe('cross-language compatibility', () => {
  it('exported files pass the trainer-side reader validation', async () => {
    let pythonOk = true;
    try {
      execFileSync('python3', ['-c', 'import fstcbdg'], { stdio: 'ignore' });
    } catch {
      pythonOk = false;
    }
    if (!pythonOk) return; // trainer package not installed alongside

    const out = path.join(tmp, 'cross.fedf');
    await exportImageFeatures(fakeDataset(5), new MockEncoder(16), out);
    const script = [
      'import sys',
      'from fstcbdg.fileio import read_features',
      'm, labels, normalized = read_features(sys.argv[1], want_normalized=True)',
      'assert m.shape == (5, 16), m.shape',
      'assert labels.tolist() == [0, 1, 2, 3, 0]',
      'assert normalized',
      'print("ok")',
    ].join('\n');
    const result = execFileSync('python3', ['-c', script, out], { encoding: 'utf8' });
    expect(result.trim()).toBe('ok');
  });
});
