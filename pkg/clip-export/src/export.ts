import fs from 'node:fs';
import path from 'node:path';

import { ImageDataset } from './cifar.js';
import { FeatureEncoder } from './encoder.js';
import { encodeFedf, FLAG_LABELS } from './fedf.js';
import { buildManifest, ExportManifest } from './manifest.js';

export const PROMPT_TEMPLATE = 'a photo of a {object}';

function flatten(rows: Float32Array[], dim: number): Float32Array {
  const out = new Float32Array(rows.length * dim);
  rows.forEach((row, i) => {
    if (row.length !== dim) throw new Error(`row ${i} has dim ${row.length}, expected ${dim}`);
    out.set(row, i * dim);
  });
  return out;
}

function writeOutputs(outPath: string, payload: Buffer,
                      manifest: ExportManifest, classNames?: string[]): void {
  fs.mkdirSync(path.dirname(path.resolve(outPath)), { recursive: true });
  fs.writeFileSync(outPath, payload);
  const sidecar = outPath.replace(/\.fedf$/, '') + '.manifest.json';
  fs.writeFileSync(sidecar, JSON.stringify(manifest, null, 1));
  if (classNames) {
    const namesPath = outPath.replace(/\.fedf$/, '') + '.classes.json';
    const doc = Object.fromEntries(classNames.map((name, i) => [String(i), name]));
    fs.writeFileSync(namesPath, JSON.stringify(doc, null, 1));
  }
}

/** One unit-norm feature row per image, dataset order, labels embedded
 * (the trainer uses them for evaluation and partitioning only). */
export async function exportImageFeatures(
  dataset: ImageDataset, encoder: FeatureEncoder, outPath: string,
): Promise<ExportManifest> {
  const rows = await encoder.encodeImages(dataset.images);
  const payload = encodeFedf({
    features: flatten(rows, encoder.dim),
    n: rows.length,
    d: encoder.dim,
    labels: dataset.labels,
    normalized: true,
  });
  const manifest = buildManifest({
    dataset: dataset.name,
    split: dataset.split,
    encoder: encoder.id,
    template: PROMPT_TEMPLATE,
    n: rows.length,
    d: encoder.dim,
  }, payload);
  writeOutputs(outPath, payload, manifest, dataset.classNames);
  return manifest;
}

/** K unit-norm text features in class-index order from the prompt template. */
export async function exportTextPrototypes(
  datasetName: string, classNames: string[], encoder: FeatureEncoder, outPath: string,
): Promise<ExportManifest> {
  if (classNames.length === 0) throw new Error('need at least one class name');
  const prompts = classNames.map((name) => PROMPT_TEMPLATE.replace('{object}', name));
  const rows = await encoder.encodeTexts(prompts);
  const payload = encodeFedf({
    features: flatten(rows, encoder.dim),
    n: rows.length,
    d: encoder.dim,
    normalized: true,
  });
  const manifest = buildManifest({
    dataset: datasetName,
    split: 'prototypes',
    encoder: encoder.id,
    template: PROMPT_TEMPLATE,
    n: rows.length,
    d: encoder.dim,
  }, payload);
  writeOutputs(outPath, payload, manifest, classNames);
  return manifest;
}

export { FLAG_LABELS };
