/**
 * Minimal YUV4MPEG2 (.y4m) reader. Only the luma plane is kept; chroma is
 * skipped. Supports mono, 420 (all common tags), 422 and 444 colorspaces
 * with 8-bit samples.
 */

export class VideoFormatError extends Error {}

export interface Video {
  width: number;
  height: number;
  fps: number;
  /** one Uint8Array of luma samples (row-major) per frame */
  frames: Uint8Array[];
}

const NL = 0x0a;

function lineEnd(buf: Buffer, start: number): number {
  const idx = buf.indexOf(NL, start);
  if (idx < 0) throw new VideoFormatError("unterminated header line");
  return idx;
}

function chromaBytes(colorspace: string, w: number, h: number): number {
  if (colorspace === "mono") return 0;
  if (colorspace.startsWith("420")) return 2 * ((w >> 1) * (h >> 1));
  if (colorspace.startsWith("422")) return 2 * ((w >> 1) * h);
  if (colorspace.startsWith("444")) return 2 * (w * h);
  throw new VideoFormatError(`unsupported colorspace C${colorspace}`);
}

export function parseY4m(buf: Buffer): Video {
  const headerEnd = lineEnd(buf, 0);
  const header = buf.toString("ascii", 0, headerEnd);
  const fields = header.split(" ");
  if (fields[0] !== "YUV4MPEG2") {
    throw new VideoFormatError("not a YUV4MPEG2 stream");
  }
  let width = 0;
  let height = 0;
  let fps = 0;
  let colorspace = "420"; // spec default when the C tag is absent
  for (const f of fields.slice(1)) {
    const tag = f[0];
    const val = f.slice(1);
    if (tag === "W") width = parseInt(val, 10);
    else if (tag === "H") height = parseInt(val, 10);
    else if (tag === "F") {
      const [num, den] = val.split(":").map(Number);
      fps = num / den;
    } else if (tag === "C") colorspace = val;
    // interlacing, aspect and comment tags are irrelevant here
  }
  if (!(width > 0) || !(height > 0)) {
    throw new VideoFormatError("missing or invalid W/H header tags");
  }
  const lumaBytes = width * height;
  const skip = chromaBytes(colorspace, width, height);

  const frames: Uint8Array[] = [];
  let pos = headerEnd + 1;
  while (pos < buf.length) {
    const end = lineEnd(buf, pos);
    if (buf.toString("ascii", pos, pos + 5) !== "FRAME") {
      throw new VideoFormatError(`bad frame marker at byte ${pos}`);
    }
    pos = end + 1;
    if (pos + lumaBytes + skip > buf.length) {
      throw new VideoFormatError("truncated frame data");
    }
    frames.push(new Uint8Array(buf.subarray(pos, pos + lumaBytes)));
    pos += lumaBytes + skip;
  }
  if (frames.length === 0) throw new VideoFormatError("stream has no frames");
  return { width, height, fps, frames };
}
