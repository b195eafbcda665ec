/** Feature encoders: the real frozen CLIP wrapper and a deterministic
 * offline stand-in used by the tests. All encoders return unit-norm rows. */

export interface FeatureEncoder {
  readonly id: string;
  readonly dim: number;
  /** 3072-byte channel-major RGB images -> one unit vector each. */
  encodeImages(images: Uint8Array[]): Promise<Float32Array[]>;
  /** prompt strings -> one unit vector each. */
  encodeTexts(prompts: string[]): Promise<Float32Array[]>;
}

function normalize(v: Float32Array): Float32Array {
  let sq = 0;
  for (const x of v) sq += x * x;
  const inv = 1 / Math.sqrt(sq);
  for (let i = 0; i < v.length; i++) v[i] *= inv;
  return v;
}

function fnv1a(bytes: Uint8Array): number {
  let h = 0x811c9dc5;
  for (const b of bytes) {
    h ^= b;
    h = Math.imul(h, 0x01000193);
  }
  return h >>> 0;
}

/** Deterministic pseudo-encoder: features depend only on the input bytes.
 * Keeps the full pipeline testable with no weights or network. */
export class MockEncoder implements FeatureEncoder {
  readonly id: string;
  readonly dim: number;

  constructor(dim = 1024, id = 'mock') {
    this.dim = dim;
    this.id = id;
  }

  private vectorFor(bytes: Uint8Array): Float32Array {
    let state = fnv1a(bytes) || 1;
    const out = new Float32Array(this.dim);
    for (let i = 0; i < this.dim; i++) {
      // xorshift32
      state ^= state << 13; state >>>= 0;
      state ^= state >> 17;
      state ^= state << 5; state >>>= 0;
      out[i] = (state / 0xffffffff) * 2 - 1;
    }
    return normalize(out);
  }

  async encodeImages(images: Uint8Array[]): Promise<Float32Array[]> {
    return images.map((img) => this.vectorFor(img));
  }

  async encodeTexts(prompts: string[]): Promise<Float32Array[]> {
    return prompts.map((p) => this.vectorFor(new TextEncoder().encode(p)));
  }
}

/** Frozen CLIP via transformers.js (ONNX). The model id selects the
 * variant; weights must be reachable (hub or a local cache/dir). */
export class ClipEncoder implements FeatureEncoder {
  readonly id: string;
  readonly dim: number;
  private readonly modelId: string;
  private readonly batchSize: number;
  private components: Promise<{
    tokenizer: any; processor: any; textModel: any; visionModel: any; RawImage: any;
  }> | null = null;

  constructor(modelId = 'Xenova/clip-vit-base-patch32', dim = 512, id?: string,
              batchSize = 64) {
    this.modelId = modelId;
    this.dim = dim;
    this.id = id ?? modelId;
    this.batchSize = batchSize;
  }

  private load() {
    if (!this.components) {
      this.components = (async () => {
        const tf = await import('@xenova/transformers');
        const tokenizer = await tf.AutoTokenizer.from_pretrained(this.modelId);
        const processor = await tf.AutoProcessor.from_pretrained(this.modelId);
        const textModel = await tf.CLIPTextModelWithProjection.from_pretrained(this.modelId);
        const visionModel = await tf.CLIPVisionModelWithProjection.from_pretrained(this.modelId);
        return { tokenizer, processor, textModel, visionModel, RawImage: tf.RawImage };
      })();
    }
    return this.components;
  }

  /** channel-major CIFAR bytes -> interleaved RGB RawImage */
  private static toRawImage(RawImage: any, bytes: Uint8Array) {
    const interleaved = new Uint8ClampedArray(3072);
    for (let p = 0; p < 1024; p++) {
      interleaved[p * 3] = bytes[p];
      interleaved[p * 3 + 1] = bytes[1024 + p];
      interleaved[p * 3 + 2] = bytes[2048 + p];
    }
    return new RawImage(interleaved, 32, 32, 3);
  }

  async encodeImages(images: Uint8Array[]): Promise<Float32Array[]> {
    const { processor, visionModel, RawImage } = await this.load();
    const out: Float32Array[] = [];
    for (let start = 0; start < images.length; start += this.batchSize) {
      const batch = images.slice(start, start + this.batchSize)
        .map((img) => ClipEncoder.toRawImage(RawImage, img));
      const inputs = await processor(batch);
      const { image_embeds } = await visionModel(inputs);
      const [n, d] = image_embeds.dims;
      if (d !== this.dim) {
        throw new Error(`model emits ${d}-d image features, expected ${this.dim}`);
      }
      const data = image_embeds.data as Float32Array;
      for (let i = 0; i < n; i++) {
        out.push(normalize(data.slice(i * d, (i + 1) * d)));
      }
    }
    return out;
  }

  async encodeTexts(prompts: string[]): Promise<Float32Array[]> {
    const { tokenizer, textModel } = await this.load();
    const inputs = tokenizer(prompts, { padding: true, truncation: true });
    const { text_embeds } = await textModel(inputs);
    const [n, d] = text_embeds.dims;
    if (d !== this.dim) {
      throw new Error(`model emits ${d}-d text features, expected ${this.dim}`);
    }
    const data = text_embeds.data as Float32Array;
    const out: Float32Array[] = [];
    for (let i = 0; i < n; i++) {
      out.push(normalize(data.slice(i * d, (i + 1) * d)));
    }
    return out;
  }
}

export function makeEncoder(kind: string, modelId?: string, dim?: number): FeatureEncoder {
  if (kind === 'mock') return new MockEncoder(dim ?? 1024);
  if (kind === 'clip') return new ClipEncoder(modelId, dim ?? 512);
  throw new Error(`unknown encoder ${kind} (expected clip or mock)`);
}
