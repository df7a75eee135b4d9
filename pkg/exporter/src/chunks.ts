/**
 * Chunk geometry shared with the primary pipeline: windows of chunkLen
 * frames every stride frames, each labeled by its center frame
 * start + floor(chunkLen / 2). Both sides must use identical values for
 * the emitted centers to line up.
 */

export interface Chunk {
  startFrame: number;
  centerFrame: number;
}

export function chunkCount(
  frameCount: number,
  chunkLen: number,
  stride: number,
): number {
  if (chunkLen < 1 || stride < 1) throw new RangeError("chunkLen and stride must be >= 1");
  if (frameCount < chunkLen) return 0;
  return Math.floor((frameCount - chunkLen) / stride) + 1;
}

export function chunkVideo(
  frameCount: number,
  chunkLen: number,
  stride: number,
): Chunk[] {
  const n = chunkCount(frameCount, chunkLen, stride);
  const out: Chunk[] = [];
  for (let i = 0; i < n; i++) {
    const startFrame = i * stride;
    out.push({ startFrame, centerFrame: startFrame + (chunkLen >> 1) });
  }
  return out;
}
