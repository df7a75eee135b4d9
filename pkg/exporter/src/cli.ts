#!/usr/bin/env node
import yargs from "yargs";
import { hideBin } from "yargs/helpers";

import { exportFeatures } from "./export.js";

async function main(): Promise<number> {
  const argv = await yargs(hideBin(process.argv))
    .command("export", "extract chunk features from a video into a KTFV file")
    .demandCommand(1)
    .option("video", { type: "string", demandOption: true, describe: "input .y4m video" })
    .option("chunk-len", { type: "number", default: 16 })
    .option("stride", { type: "number", default: 8 })
    .option("dim", { type: "number", default: 32, describe: "feature dimension (>= 3)" })
    .option("out", { type: "string", demandOption: true, describe: "output .ktfv path" })
    .option("seed", { type: "number", default: 7, describe: "projection map seed" })
    .strict()
    .parse();

  try {
    const result = exportFeatures({
      videoPath: argv.video,
      chunkLen: argv["chunk-len"],
      stride: argv.stride,
      dim: argv.dim,
      outPath: argv.out,
      seed: argv.seed,
    });
    console.log(
      `wrote ${result.t} x ${result.dim} features for ${result.frameCount} frames to ${argv.out}`,
    );
    return 0;
  } catch (e) {
    console.error(`error: ${(e as Error).message}`);
    return 1;
  }
}

main().then((code) => process.exit(code));
