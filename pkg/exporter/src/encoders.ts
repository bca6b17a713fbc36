/**
 * Encoder seam. Real pretrained encoders (point-cloud, image, or sentence
 * models) implement Encoder and register here; the built-in stub is a
 * deterministic hash-seeded generator so exports are reproducible without
 * any model weights on disk.
 */

import { FileKind } from "./format.js";
import { SceneObject } from "./scene.js";

export type Modality = "point3d" | "visual2d" | "text";

export const MODALITY_KINDS: Record<Modality, FileKind> = {
  point3d: FileKind.Point3D,
  visual2d: FileKind.Visual2D,
  text: FileKind.Text,
};

export interface EncodeInput {
  sceneId: string;
  modality: Modality;
  object: SceneObject;
  /** present for the text modality when a descriptions file is supplied */
  text?: string;
}

export interface Encoder {
  readonly name: string;
  readonly version: string;
  readonly dim: number;
  encode(input: EncodeInput): Float32Array;
}

const FNV_OFFSET = 0xcbf29ce484222325n;
const FNV_PRIME = 0x100000001b3n;
const U64 = 0xffffffffffffffffn;

export function fnv1a64(data: Uint8Array): bigint {
  let h = FNV_OFFSET;
  for (const byte of data) {
    h = ((h ^ BigInt(byte)) * FNV_PRIME) & U64;
  }
  return h;
}

/** splitmix64, mapped into [0, 1). */
class SplitMix64 {
  private state: bigint;

  constructor(seed: bigint) {
    this.state = seed & U64;
  }

  nextU64(): bigint {
    this.state = (this.state + 0x9e3779b97f4a7c15n) & U64;
    let z = this.state;
    z = ((z ^ (z >> 30n)) * 0xbf58476d1ce4e5b9n) & U64;
    z = ((z ^ (z >> 27n)) * 0x94d049bb133111ebn) & U64;
    return (z ^ (z >> 31n)) & U64;
  }

  nextFloat(): number {
    // top 53 bits -> double in [0, 1)
    return Number(this.nextU64() >> 11n) / 2 ** 53;
  }
}

/**
 * Deterministic stand-in encoder: seeds a PRNG from the object's content
 * (scene id, index, modality, point bytes or text) and emits an
 * L2-normalized vector. Two runs over the same scene produce identical
 * files, which is exactly what the export pipeline tests need.
 */
export class StubEncoder implements Encoder {
  readonly name = "stub";
  readonly version = "1";

  constructor(readonly dim: number) {
    if (dim < 1) throw new Error("encoder dim must be >= 1");
  }

  encode(input: EncodeInput): Float32Array {
    const tag = `${input.sceneId}/${input.object.index}/${input.modality}/${this.dim}/`;
    const tagBytes = new TextEncoder().encode(tag);
    let contentBytes: Uint8Array;
    if (input.modality === "text") {
      contentBytes = new TextEncoder().encode(input.text ?? input.object.label ?? "");
    } else {
      contentBytes = new Uint8Array(
        input.object.points.buffer,
        input.object.points.byteOffset,
        input.object.points.byteLength,
      );
    }
    const seedInput = new Uint8Array(tagBytes.length + contentBytes.length);
    seedInput.set(tagBytes, 0);
    seedInput.set(contentBytes, tagBytes.length);

    const rng = new SplitMix64(fnv1a64(seedInput));
    const vec = new Float32Array(this.dim);
    let normSq = 0;
    for (let i = 0; i < this.dim; i++) {
      const value = 2 * rng.nextFloat() - 1;
      vec[i] = value;
      normSq += value * value;
    }
    const norm = Math.sqrt(normSq) || 1;
    for (let i = 0; i < this.dim; i++) {
      vec[i] = vec[i] / norm;
    }
    return vec;
  }
}

export function makeEncoder(spec: string, dim: number): Encoder {
  if (spec === "stub") {
    return new StubEncoder(dim);
  }
  throw new Error(
    `unknown encoder ${JSON.stringify(spec)}; "stub" is built in, real encoders register via the Encoder interface`,
  );
}
