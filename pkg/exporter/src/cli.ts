#!/usr/bin/env node
/**
 * Export embeddings for one scene and modality:
 *
 *   node dist/cli.js --scene scene.json --modality text --encoder stub \
 *     --dim 768 --out text.d3de [--manifest-out export.json] \
 *     [--descriptions desc.jsonl]
 */

import { parseArgs } from "node:util";

import { makeEncoder, Modality } from "./encoders.js";
import { exportEmbeddings } from "./export.js";

const MODALITIES = new Set(["point3d", "visual2d", "text"]);

export function main(argv: string[]): number {
  let values;
  try {
    ({ values } = parseArgs({
      args: argv,
      options: {
        scene: { type: "string" },
        modality: { type: "string" },
        encoder: { type: "string", default: "stub" },
        dim: { type: "string" },
        out: { type: "string" },
        "manifest-out": { type: "string" },
        descriptions: { type: "string" },
      },
    }));
  } catch (error) {
    console.error(`usage error: ${(error as Error).message}`);
    return 64;
  }
  if (!values.scene || !values.modality || !values.dim || !values.out) {
    console.error("usage: --scene <manifest> --modality point3d|visual2d|text --dim <n> --out <file>");
    return 64;
  }
  if (!MODALITIES.has(values.modality)) {
    console.error(`unknown modality ${values.modality}`);
    return 64;
  }
  const dim = Number.parseInt(values.dim, 10);
  if (!Number.isInteger(dim) || dim < 1) {
    console.error(`--dim must be a positive integer, got ${values.dim}`);
    return 64;
  }
  try {
    const manifest = exportEmbeddings({
      scenePath: values.scene,
      modality: values.modality as Modality,
      encoder: makeEncoder(values.encoder!, dim),
      outPath: values.out,
      manifestOutPath: values["manifest-out"],
      descriptionsPath: values.descriptions,
    });
    console.log(
      `exported ${manifest.count} ${manifest.modality} vectors (dim ${manifest.dim}) -> ${manifest.output}`,
    );
    return 0;
  } catch (error) {
    console.error(`error: ${(error as Error).message}`);
    return 2;
  }
}

if (import.meta.url === `file://${process.argv[1]}`) {
  process.exit(main(process.argv.slice(2)));
}
