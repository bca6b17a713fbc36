"""Description-to-vector encoding behind a pluggable encoder seam.

The built-in mock encoder hashes character trigrams with 64-bit FNV-1a so its
vectors are bit-identical across platforms; real sentence encoders plug in via
the TextEncoder protocol or precomputed interchange files.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Mapping, Optional, Protocol

import numpy as np

from .descriptions import DescriptionRecord, DescriptionStatus
from .errors import DomainError

log = logging.getLogger(__name__)

DEFAULT_TEXT_DIM = 768
DEFAULT_POINT_DIM = 1024
DEFAULT_VISUAL_DIM = 1024

FNV_OFFSET = 0xCBF29CE484222325
FNV_PRIME = 0x100000001B3
_U64 = 0xFFFFFFFFFFFFFFFF


class EmbeddingKind(Enum):
    POINT3D = 0
    VISUAL2D = 1
    TEXT = 2


@dataclass(frozen=True)
class EmbeddingRecord:
    object_index: int
    kind: EmbeddingKind
    vector: np.ndarray

    def __post_init__(self):
        vec = np.array(self.vector, dtype=np.float32)
        if vec.ndim != 1:
            raise DomainError(f"embedding for object {self.object_index} must be a flat vector")
        if not np.all(np.isfinite(vec)):
            raise DomainError(f"embedding for object {self.object_index} has non-finite entries")
        vec.flags.writeable = False
        object.__setattr__(self, "vector", vec)

    @property
    def dim(self) -> int:
        return int(self.vector.shape[0])


class TextEncoder(Protocol):
    dim: int

    def encode(self, text: str) -> np.ndarray: ...


def fnv1a64(data: bytes) -> int:
    """64-bit FNV-1a over a byte string."""
    h = FNV_OFFSET
    for byte in data:
        h = ((h ^ byte) * FNV_PRIME) & _U64
    return h


def mock_text_encode(text: str, dim: int = DEFAULT_TEXT_DIM) -> np.ndarray:
    """Hashed bag of character trigrams, folded into `dim` buckets and
    L2-normalized (float64, so the unit norm holds to ~1e-15). Texts shorter
    than 3 characters hash as a single gram."""
    if not text:
        raise DomainError("cannot encode empty text")
    if dim < 1:
        raise DomainError("embedding dimension must be >= 1")
    counts = np.zeros(dim, dtype=np.float64)
    grams = [text[i : i + 3] for i in range(len(text) - 2)] or [text]
    for gram in grams:
        counts[fnv1a64(gram.encode("utf-8")) % dim] += 1.0
    return counts / np.linalg.norm(counts)


class MockTextEncoder:
    """Deterministic, dependency-free TextEncoder."""

    def __init__(self, dim: int = DEFAULT_TEXT_DIM):
        self.dim = dim

    def encode(self, text: str) -> np.ndarray:
        return mock_text_encode(text, self.dim)


def encode_description(text: str, encoder: TextEncoder) -> np.ndarray:
    """Encode one description; the result always has encoder.dim entries."""
    if not text:
        raise DomainError("cannot encode empty description text")
    vec = np.asarray(encoder.encode(text), dtype=np.float32)
    if vec.shape != (encoder.dim,):
        raise DomainError(f"encoder produced shape {vec.shape}, expected ({encoder.dim},)")
    return vec


def encode_records(
    records: Mapping[int, DescriptionRecord],
    encoder: TextEncoder,
) -> dict[int, EmbeddingRecord]:
    """Encode a scene's description records; Missing records encode to the
    zero vector (with a warning) so downstream fusion stays total."""
    out: dict[int, EmbeddingRecord] = {}
    for index in sorted(records):
        record = records[index]
        if record.status is DescriptionStatus.MISSING:
            log.warning("object %d has no description; encoding zero vector", index)
            vec = np.zeros(encoder.dim, dtype=np.float32)
        else:
            vec = encode_description(record.text, encoder)
        out[index] = EmbeddingRecord(index, EmbeddingKind.TEXT, vec)
    return out


def load_precomputed(
    path,
    expected_dim: int,
    expected_indices: Optional[set[int]] = None,
) -> dict[int, np.ndarray]:
    """Load an embedding interchange file written by an external encoder.

    Every vector is validated against expected_dim; when expected_indices is
    given, objects missing from the file are reported via a warning.
    """
    from .io_formats import read_embedding_file

    _, vectors = read_embedding_file(path, expected_dim=expected_dim)
    if expected_indices is not None:
        missing = sorted(expected_indices - set(vectors))
        if missing:
            log.warning("%s lacks embeddings for objects %s", path, missing)
    return vectors
