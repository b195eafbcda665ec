/**
 * FEDF binary feature files, bit-compatible with the Python trainer.
 *
 * Layout (little-endian):
 *   bytes 0..3   magic "FEDF"
 *   u32          version (1)
 *   u32          n rows
 *   u32          d columns
 *   u32          flags: bit 0 labels present, bit 1 rows pre-normalized
 *   n*d f32      row-major features
 *   n   u32      labels (only when bit 0 set)
 */

export const MAGIC = 'FEDF';
export const VERSION = 1;
export const FLAG_LABELS = 1;
export const FLAG_NORMALIZED = 2;
const HEADER_BYTES = 20;

export interface FeatureFile {
  features: Float32Array; // row-major, n*d
  n: number;
  d: number;
  labels?: Uint32Array;
  normalized: boolean;
}

export function encodeFedf(file: FeatureFile): Buffer {
  const { features, n, d, labels } = file;
  if (features.length !== n * d) {
    throw new Error(`feature buffer has ${features.length} values, expected ${n * d}`);
  }
  for (const v of features) {
    if (!Number.isFinite(v)) throw new Error('refusing to write non-finite features');
  }
  if (labels && labels.length !== n) {
    throw new Error(`need ${n} labels, got ${labels.length}`);
  }
  let flags = 0;
  if (labels) flags |= FLAG_LABELS;
  if (file.normalized) flags |= FLAG_NORMALIZED;

  const total = HEADER_BYTES + n * d * 4 + (labels ? n * 4 : 0);
  const buf = Buffer.alloc(total);
  buf.write(MAGIC, 0, 'ascii');
  buf.writeUInt32LE(VERSION, 4);
  buf.writeUInt32LE(n, 8);
  buf.writeUInt32LE(d, 12);
  buf.writeUInt32LE(flags, 16);
  let off = HEADER_BYTES;
  for (let i = 0; i < features.length; i++, off += 4) {
    buf.writeFloatLE(features[i], off);
  }
  if (labels) {
    for (let i = 0; i < n; i++, off += 4) {
      buf.writeUInt32LE(labels[i], off);
    }
  }
  return buf;
}

export function decodeFedf(buf: Buffer): FeatureFile {
  if (buf.length < HEADER_BYTES) {
    throw new Error(`truncated header (${buf.length} bytes)`);
  }
  if (buf.toString('ascii', 0, 4) !== MAGIC) {
    throw new Error(`bad magic ${JSON.stringify(buf.toString('ascii', 0, 4))}`);
  }
  const version = buf.readUInt32LE(4);
  if (version !== VERSION) throw new Error(`unsupported version ${version}`);
  const n = buf.readUInt32LE(8);
  const d = buf.readUInt32LE(12);
  const flags = buf.readUInt32LE(16);
  const expected = HEADER_BYTES + n * d * 4 + (flags & FLAG_LABELS ? n * 4 : 0);
  if (buf.length !== expected) {
    throw new Error(`expected ${expected} bytes, found ${buf.length}`);
  }
  const features = new Float32Array(n * d);
  let off = HEADER_BYTES;
  for (let i = 0; i < features.length; i++, off += 4) {
    features[i] = buf.readFloatLE(off);
  }
  let labels: Uint32Array | undefined;
  if (flags & FLAG_LABELS) {
    labels = new Uint32Array(n);
    for (let i = 0; i < n; i++, off += 4) {
      labels[i] = buf.readUInt32LE(off);
    }
  }
  return { features, n, d, labels, normalized: Boolean(flags & FLAG_NORMALIZED) };
}

/** L2-normalize each d-length row in place. */
export function normalizeRows(features: Float32Array, d: number): void {
  for (let row = 0; row < features.length / d; row++) {
    let sq = 0;
    for (let j = 0; j < d; j++) sq += features[row * d + j] ** 2;
    const inv = 1 / Math.sqrt(sq);
    for (let j = 0; j < d; j++) features[row * d + j] *= inv;
  }
}
