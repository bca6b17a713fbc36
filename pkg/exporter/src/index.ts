export {
  decodeEmbeddingFile,
  encodeEmbeddingFile,
  FileKind,
  FormatError,
  HEADER_SIZE,
  MAGIC,
  VERSION,
} from "./format.js";
export type { EmbeddingFileHeader } from "./format.js";
export { fnv1a64, makeEncoder, MODALITY_KINDS, StubEncoder } from "./encoders.js";
export type { EncodeInput, Encoder, Modality } from "./encoders.js";
export { readDescriptions, readScene } from "./scene.js";
export type { SceneData, SceneObject } from "./scene.js";
export { encodeScene, exportEmbeddings } from "./export.js";
export type { ExportManifest, ExportOptions } from "./export.js";
