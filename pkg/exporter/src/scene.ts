/**
 * Reader for the pipeline's scene files: a JSON manifest next to a binary
 * point blob (per object: point count u32, then count x 6 float32), with the
 * blob's SHA-256 recorded in the manifest.
 */

import { createHash } from "node:crypto";
import { readFileSync } from "node:fs";
import { dirname, join } from "node:path";

import { FormatError } from "./format.js";

export interface SceneObject {
  index: number;
  label: string | null;
  /** flat (pointCount * 6) array: x, y, z, r, g, b per point */
  points: Float32Array;
}

export interface SceneData {
  sceneId: string;
  objects: SceneObject[];
}

export function readScene(manifestPath: string): SceneData {
  const manifest = JSON.parse(readFileSync(manifestPath, "utf-8"));
  for (const key of ["scene_id", "objects", "points_file", "points_sha256"]) {
    if (!(key in manifest)) {
      throw new FormatError(`${manifestPath}: manifest missing field ${key}`);
    }
  }
  const blobPath = join(dirname(manifestPath), manifest.points_file);
  const blob = readFileSync(blobPath);
  const digest = createHash("sha256").update(blob).digest("hex");
  if (digest !== manifest.points_sha256) {
    throw new FormatError(`${blobPath}: checksum mismatch`);
  }

  const objects: SceneObject[] = [];
  let offset = 0;
  for (const entry of manifest.objects) {
    if (blob.length - offset < 4) {
      throw new FormatError(`${blobPath}: object ${entry.index} header truncated`);
    }
    const pointCount = blob.readUInt32LE(offset);
    offset += 4;
    if (pointCount !== entry.point_count) {
      throw new FormatError(
        `${blobPath}: object ${entry.index} has ${pointCount} points, manifest says ${entry.point_count}`,
      );
    }
    const nbytes = pointCount * 6 * 4;
    if (blob.length - offset < nbytes) {
      throw new FormatError(`${blobPath}: object ${entry.index} point data truncated`);
    }
    const points = new Float32Array(pointCount * 6);
    for (let i = 0; i < points.length; i++) {
      points[i] = blob.readFloatLE(offset + 4 * i);
    }
    offset += nbytes;
    objects.push({ index: entry.index, label: entry.label ?? null, points });
  }
  if (offset !== blob.length) {
    throw new FormatError(`${blobPath}: ${blob.length - offset} trailing bytes`);
  }
  return { sceneId: manifest.scene_id, objects };
}

/** Descriptions JSONL from the pipeline: {object_index, text, status, ...} per line. */
export function readDescriptions(path: string): Map<number, string> {
  const out = new Map<number, string>();
  const lines = readFileSync(path, "utf-8").split("\n");
  for (const line of lines) {
    if (!line.trim()) continue;
    const row = JSON.parse(line);
    if (row.status !== "missing" && typeof row.text === "string" && row.text.length > 0) {
      out.set(row.object_index, row.text);
    }
  }
  return out;
}
