/**
 * KTFV feature container: magic "KTFV", u16 version=1, u32 T, u32 D,
 * T u64 center frame indices, then T*D little-endian float32 values
 * row-major. Matches the primary pipeline's reader byte for byte.
 */

export const MAGIC = "KTFV";
export const VERSION = 1;
const HEADER_SIZE = 4 + 2 + 4 + 4;

export class KtfvError extends Error {}

export function encodeKtfv(
  vectors: Float32Array[],
  centers: number[],
): Buffer {
  const t = vectors.length;
  if (t < 1) throw new KtfvError("at least one vector required");
  const d = vectors[0].length;
  for (const v of vectors) {
    if (v.length !== d) throw new KtfvError("ragged vector dimensions");
  }
  for (let i = 1; i < t; i++) {
    if (centers[i] <= centers[i - 1]) {
      throw new KtfvError("centers must be strictly increasing");
    }
  }
  const buf = Buffer.alloc(HEADER_SIZE + 8 * t + 4 * t * d);
  buf.write(MAGIC, 0, "ascii");
  buf.writeUInt16LE(VERSION, 4);
  buf.writeUInt32LE(t, 6);
  buf.writeUInt32LE(d, 10);
  let off = HEADER_SIZE;
  for (const c of centers) {
    buf.writeBigUInt64LE(BigInt(c), off);
    off += 8;
  }
  for (const v of vectors) {
    for (const x of v) {
      if (!Number.isFinite(x)) throw new KtfvError("non-finite feature value");
      buf.writeFloatLE(x, off);
      off += 4;
    }
  }
  return buf;
}

export interface KtfvContents {
  t: number;
  d: number;
  centers: number[];
  vectors: Float32Array[];
}

/** Reader used by the tests to verify the writer against the contract. */
export function decodeKtfv(buf: Buffer): KtfvContents {
  if (buf.length < HEADER_SIZE) throw new KtfvError("truncated header");
  if (buf.toString("ascii", 0, 4) !== MAGIC) throw new KtfvError("bad magic");
  if (buf.readUInt16LE(4) !== VERSION) throw new KtfvError("unsupported version");
  const t = buf.readUInt32LE(6);
  const d = buf.readUInt32LE(10);
  if (t < 1 || d < 1) throw new KtfvError(`bad dimensions T=${t}, D=${d}`);
  if (buf.length < HEADER_SIZE + 8 * t + 4 * t * d) {
    throw new KtfvError("truncated payload");
  }
  const centers: number[] = [];
  let off = HEADER_SIZE;
  for (let i = 0; i < t; i++) {
    centers.push(Number(buf.readBigUInt64LE(off)));
    off += 8;
  }
  const vectors: Float32Array[] = [];
  for (let i = 0; i < t; i++) {
    const v = new Float32Array(d);
    for (let j = 0; j < d; j++) {
      v[j] = buf.readFloatLE(off);
      off += 4;
    }
    vectors.push(v);
  }
  return { t, d, centers, vectors };
}
