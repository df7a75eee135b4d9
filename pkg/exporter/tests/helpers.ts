import { Pcg32 } from "../src/features.js";

export interface Y4mOptions {
  width: number;
  height: number;
  frames: number;
  colorspace?: "mono" | "420";
  seed?: number;
}

/** Build an in-memory .y4m stream with reproducible pseudo-random pixels. */
export function makeY4m(opts: Y4mOptions): Buffer {
  const { width, height, frames } = opts;
  const colorspace = opts.colorspace ?? "mono";
  const rng = new Pcg32(opts.seed ?? 1);
  const header = Buffer.from(
    `YUV4MPEG2 W${width} H${height} F30:1 Ip A1:1 C${colorspace}\n`,
    "ascii",
  );
  const parts: Buffer[] = [header];
  const chroma =
    colorspace === "mono" ? 0 : 2 * ((width >> 1) * (height >> 1));
  for (let f = 0; f < frames; f++) {
    parts.push(Buffer.from("FRAME\n", "ascii"));
    const plane = Buffer.alloc(width * height + chroma);
    for (let i = 0; i < plane.length; i++) plane[i] = rng.next() & 0xff;
    parts.push(plane);
  }
  return Buffer.concat(parts);
}
