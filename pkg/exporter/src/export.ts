import { readFileSync, writeFileSync } from "node:fs";
import { basename } from "node:path";

import { chunkVideo } from "./chunks.js";
import { extractChunkFeatures, projectionMatrix } from "./features.js";
import { encodeKtfv } from "./ktfv.js";
import { parseY4m } from "./y4m.js";

export interface ExportConfig {
  videoPath: string;
  chunkLen: number;
  stride: number;
  dim: number;
  outPath: string;
  /** seed of the stored projection map; identical seed + geometry means
   *  features are comparable across exports */
  seed: number;
}

export interface ExportResult {
  t: number;
  dim: number;
  frameCount: number;
  fps: number;
  manifestFragment: Record<string, unknown>;
}

export class ExportError extends Error {}

export function exportFeatures(cfg: ExportConfig): ExportResult {
  if (cfg.chunkLen < 1 || cfg.stride < 1) {
    throw new ExportError("chunk-len and stride must be >= 1");
  }
  let raw: Buffer;
  try {
    raw = readFileSync(cfg.videoPath);
  } catch (e) {
    throw new ExportError(`unreadable video ${cfg.videoPath}: ${(e as Error).message}`);
  }
  const video = parseY4m(raw);
  const frameCount = video.frames.length;
  const chunks = chunkVideo(frameCount, cfg.chunkLen, cfg.stride);
  if (chunks.length === 0) {
    throw new ExportError(
      `video has ${frameCount} frames, need at least ${cfg.chunkLen} for one chunk`,
    );
  }

  const pixels = video.width * video.height;
  const projection = projectionMatrix(cfg.seed, cfg.dim - 2, pixels);
  const vectors: Float32Array[] = [];
  const centers: number[] = [];
  for (const chunk of chunks) {
    const frames = video.frames.slice(chunk.startFrame, chunk.startFrame + cfg.chunkLen);
    vectors.push(extractChunkFeatures(frames, cfg.dim, projection));
    centers.push(chunk.centerFrame);
  }

  writeFileSync(cfg.outPath, encodeKtfv(vectors, centers));

  // regenerable from this description; kept next to the features so
  // downstream models stay comparable across exports
  const projectionSidecar = {
    algorithm: "pcg32-boxmuller-gaussian",
    dim: cfg.dim,
    frame_pixels: pixels,
    scale: "1/sqrt(frame_pixels)",
    seed: cfg.seed,
  };
  writeFileSync(
    cfg.outPath + ".projection.json",
    JSON.stringify(projectionSidecar, Object.keys(projectionSidecar).sort(), 2) + "\n",
  );

  const id = basename(cfg.videoPath).replace(/\.[^.]+$/, "");
  const manifestFragment = {
    features: basename(cfg.outPath),
    fps: video.fps,
    frame_count: frameCount,
    id,
  };
  writeFileSync(
    cfg.outPath + ".manifest.json",
    JSON.stringify(manifestFragment, Object.keys(manifestFragment).sort(), 2) + "\n",
  );
  return { t: chunks.length, dim: cfg.dim, frameCount, fps: video.fps, manifestFragment };
}
