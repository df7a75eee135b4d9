/**
 * Deterministic per-chunk feature extraction.
 *
 * Each chunk yields [mean intensity, std intensity, seeded Gaussian random
 * projection of the temporally averaged frame], the projection scaled by
 * 1/sqrt(nPixels). The projection matrix depends only on (seed, dim,
 * framePixels), so models trained on one export remain applicable to any
 * other export with the same settings.
 */

export class FeatureError extends Error {}

/** PCG32: fixed-increment variant, 64-bit state via BigInt. */
export class Pcg32 {
  private state: bigint;
  private static readonly MUL = 6364136223846793005n;
  private static readonly INC = 1442695040888963407n;
  private static readonly MASK = (1n << 64n) - 1n;

  constructor(seed: number) {
    this.state = 0n;
    this.next(); // advance from zero state
    this.state = (this.state + BigInt(seed)) & Pcg32.MASK;
    this.next();
  }

  /** uniform u32 */
  next(): number {
    const old = this.state;
    this.state = (old * Pcg32.MUL + Pcg32.INC) & Pcg32.MASK;
    const xorshifted = Number(((old >> 18n) ^ old) >> 27n & 0xffffffffn);
    const rot = Number(old >> 59n);
    return ((xorshifted >>> rot) | (xorshifted << (-rot & 31))) >>> 0;
  }

  /** uniform double in [0, 1) with 32-bit resolution */
  uniform(): number {
    return this.next() / 4294967296;
  }

  /** standard normal via Box-Muller (one value per call, no caching) */
  normal(): number {
    // 1 - u keeps the log argument in (0, 1]
    const u = 1 - this.uniform();
    const v = this.uniform();
    return Math.sqrt(-2 * Math.log(u)) * Math.cos(2 * Math.PI * v);
  }
}

export function projectionMatrix(
  seed: number,
  rows: number,
  cols: number,
): Float64Array {
  const rng = new Pcg32(seed);
  const m = new Float64Array(rows * cols);
  for (let i = 0; i < m.length; i++) m[i] = rng.normal();
  return m;
}

export function extractChunkFeatures(
  frames: Uint8Array[],
  dim: number,
  projection: Float64Array,
): Float32Array {
  if (dim < 3) throw new FeatureError("dim must be >= 3 (two stats + projection)");
  const n = frames[0].length;
  if (projection.length !== (dim - 2) * n) {
    throw new FeatureError(
      `projection shape mismatch: have ${projection.length}, need ${(dim - 2) * n}`,
    );
  }
  const avg = new Float64Array(n);
  let sum = 0;
  let sumSq = 0;
  for (const frame of frames) {
    for (let p = 0; p < n; p++) {
      const v = frame[p] / 255;
      avg[p] += v;
      sum += v;
      sumSq += v * v;
    }
  }
  const total = frames.length * n;
  const mean = sum / total;
  const variance = Math.max(0, sumSq / total - mean * mean);
  for (let p = 0; p < n; p++) avg[p] /= frames.length;

  const out = new Float32Array(dim);
  out[0] = mean;
  out[1] = Math.sqrt(variance);
  const scale = 1 / Math.sqrt(n);
  for (let r = 0; r < dim - 2; r++) {
    let acc = 0;
    const base = r * n;
    for (let p = 0; p < n; p++) acc += projection[base + p] * avg[p];
    out[2 + r] = acc * scale;
  }
  return out;
}
