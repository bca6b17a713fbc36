/**
 * Export orchestration: run one encoder over every object of a scene, write
 * the interchange file, validate it by re-reading, and emit the export
 * manifest describing what was produced.
 */

import { createHash } from "node:crypto";
import { readFileSync, writeFileSync } from "node:fs";

import { Encoder, Modality, MODALITY_KINDS } from "./encoders.js";
import { decodeEmbeddingFile, encodeEmbeddingFile, FormatError } from "./format.js";
import { readDescriptions, readScene, SceneData } from "./scene.js";

export interface ExportManifest {
  scene_id: string;
  modality: Modality;
  encoder: { name: string; version: string };
  dim: number;
  count: number;
  output: string;
  output_sha256: string;
}

export function encodeScene(
  scene: SceneData,
  modality: Modality,
  encoder: Encoder,
  descriptions?: Map<number, string>,
): Map<number, Float32Array> {
  const vectors = new Map<number, Float32Array>();
  for (const object of scene.objects) {
    const vec = encoder.encode({
      sceneId: scene.sceneId,
      modality,
      object,
      text: descriptions?.get(object.index),
    });
    if (vec.length !== encoder.dim) {
      throw new FormatError(
        `encoder produced ${vec.length} entries for object ${object.index}, expected ${encoder.dim}`,
      );
    }
    vectors.set(object.index, vec);
  }
  return vectors;
}

export interface ExportOptions {
  scenePath: string;
  modality: Modality;
  encoder: Encoder;
  outPath: string;
  manifestOutPath?: string;
  descriptionsPath?: string;
}

export function exportEmbeddings(options: ExportOptions): ExportManifest {
  const scene = readScene(options.scenePath);
  const descriptions = options.descriptionsPath
    ? readDescriptions(options.descriptionsPath)
    : undefined;
  const vectors = encodeScene(scene, options.modality, options.encoder, descriptions);
  const payload = encodeEmbeddingFile(MODALITY_KINDS[options.modality], options.encoder.dim, vectors);
  writeFileSync(options.outPath, payload);

  // validate by re-reading the bytes that actually landed on disk
  const written = readFileSync(options.outPath);
  const { header, vectors: reread } = decodeEmbeddingFile(
    written,
    options.encoder.dim,
    MODALITY_KINDS[options.modality],
  );
  if (header.count !== vectors.size || reread.size !== vectors.size) {
    throw new FormatError(`${options.outPath}: re-read count ${header.count} != ${vectors.size}`);
  }

  const manifest: ExportManifest = {
    scene_id: scene.sceneId,
    modality: options.modality,
    encoder: { name: options.encoder.name, version: options.encoder.version },
    dim: options.encoder.dim,
    count: vectors.size,
    output: options.outPath,
    output_sha256: createHash("sha256").update(written).digest("hex"),
  };
  if (options.manifestOutPath) {
    writeFileSync(options.manifestOutPath, JSON.stringify(sortKeys(manifest), null, 2) + "\n");
  }
  return manifest;
}

function sortKeys(value: unknown): unknown {
  if (Array.isArray(value)) return value.map(sortKeys);
  if (value && typeof value === "object") {
    return Object.fromEntries(
      Object.keys(value as Record<string, unknown>)
        .sort()
        .map((key) => [key, sortKeys((value as Record<string, unknown>)[key])]),
    );
  }
  return value;
}
