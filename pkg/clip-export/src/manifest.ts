import { createHash } from 'node:crypto';

/** Descriptor written next to every exported FEDF file. */
export interface ExportManifest {
  dataset: string;
  split: string;
  encoder: string;
  template: string;
  n: number;
  d: number;
  checksum: string; // sha256 of the FEDF file bytes
}

/** Known encoder output widths; RN50's attention-pooled embedding is 1024. */
const ENCODER_DIMS: Record<string, number> = { RN50: 1024 };

export function buildManifest(
  fields: Omit<ExportManifest, 'checksum'>,
  payload: Buffer,
): ExportManifest {
  const expected = ENCODER_DIMS[fields.encoder];
  if (expected !== undefined && fields.d !== expected) {
    throw new Error(
      `encoder ${fields.encoder} produces ${expected}-d features, manifest says ${fields.d}`,
    );
  }
  return { ...fields, checksum: sha256(payload) };
}

export function sha256(buf: Buffer): string {
  return createHash('sha256').update(buf).digest('hex');
}
