/**
 * Binary embedding interchange format (.d3de), little-endian throughout:
 *
 *   magic "D3DE" | version u16 = 1 | kind u8 | dim u32 | count u32
 *   then `count` records of: object_index u32, dim x float32
 *
 * Kinds: 0 = Point3D, 1 = Visual2D, 2 = Text, 3 = HeadWeights.
 */

export const MAGIC = "D3DE";
export const VERSION = 1;
export const HEADER_SIZE = 15;

export enum FileKind {
  Point3D = 0,
  Visual2D = 1,
  Text = 2,
  HeadWeights = 3,
}

export class FormatError extends Error {}

export interface EmbeddingFileHeader {
  version: number;
  kind: FileKind;
  dim: number;
  count: number;
}

export function encodeEmbeddingFile(
  kind: FileKind,
  dim: number,
  vectors: Map<number, Float32Array>,
): Buffer {
  const indices = [...vectors.keys()].sort((a, b) => a - b);
  const recordSize = 4 + 4 * dim;
  const out = Buffer.alloc(HEADER_SIZE + indices.length * recordSize);
  out.write(MAGIC, 0, "ascii");
  out.writeUInt16LE(VERSION, 4);
  out.writeUInt8(kind, 6);
  out.writeUInt32LE(dim, 7);
  out.writeUInt32LE(indices.length, 11);
  let offset = HEADER_SIZE;
  for (const index of indices) {
    const vec = vectors.get(index)!;
    if (vec.length !== dim) {
      throw new FormatError(`vector for object ${index} has ${vec.length} entries, expected ${dim}`);
    }
    out.writeUInt32LE(index, offset);
    offset += 4;
    for (const value of vec) {
      if (!Number.isFinite(value)) {
        throw new FormatError(`vector for object ${index} has a non-finite entry`);
      }
      out.writeFloatLE(value, offset);
      offset += 4;
    }
  }
  return out;
}

export function decodeEmbeddingFile(
  data: Buffer,
  expectedDim?: number,
  expectedKind?: FileKind,
): { header: EmbeddingFileHeader; vectors: Map<number, Float32Array> } {
  if (data.length < HEADER_SIZE) {
    throw new FormatError(`file shorter than the ${HEADER_SIZE}-byte header`);
  }
  if (data.toString("ascii", 0, 4) !== MAGIC) {
    throw new FormatError(`bad magic, expected ${MAGIC}`);
  }
  const version = data.readUInt16LE(4);
  if (version !== VERSION) {
    throw new FormatError(`unsupported version ${version}`);
  }
  const kindByte = data.readUInt8(6);
  if (!(kindByte in FileKind)) {
    throw new FormatError(`unknown kind byte ${kindByte}`);
  }
  const kind = kindByte as FileKind;
  const dim = data.readUInt32LE(7);
  const count = data.readUInt32LE(11);
  if (expectedKind !== undefined && kind !== expectedKind) {
    throw new FormatError(`kind is ${FileKind[kind]}, expected ${FileKind[expectedKind]}`);
  }
  if (expectedDim !== undefined && dim !== expectedDim) {
    throw new FormatError(`dimension is ${dim}, expected ${expectedDim}`);
  }

  const recordSize = 4 + 4 * dim;
  const vectors = new Map<number, Float32Array>();
  let offset = HEADER_SIZE;
  for (let record = 0; record < count; record++) {
    if (data.length - offset < recordSize) {
      throw new FormatError(`record ${record} truncated`);
    }
    const index = data.readUInt32LE(offset);
    offset += 4;
    const vec = new Float32Array(dim);
    for (let i = 0; i < dim; i++) {
      vec[i] = data.readFloatLE(offset);
      offset += 4;
      if (!Number.isFinite(vec[i])) {
        throw new FormatError(`record ${record} (object ${index}) has non-finite values`);
      }
    }
    if (vectors.has(index)) {
      throw new FormatError(`record ${record} duplicates object index ${index}`);
    }
    vectors.set(index, vec);
  }
  if (offset !== data.length) {
    throw new FormatError(`${data.length - offset} trailing bytes after ${count} records`);
  }
  return { header: { version, kind, dim, count }, vectors };
}
