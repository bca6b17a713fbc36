"""Projection heads into the shared token space, fused per-object token
blocks, scene token serialization, and the response cross-entropy objective
with analytic gradients for the heads.

Each modality embedding z is mapped by its own head f(z); an object's block is
the fixed-order concatenation (identifier, point, visual, text). The training
loss sums -log P(target) over exactly the response positions of a sequence,
never the prefix.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Optional, Sequence

import numpy as np

from .core import Scene, object_identifier
from .errors import DomainError

DEFAULT_TOKEN_DIM = 64
DEFAULT_HIDDEN_DIM = 128
IDENTIFIER_INIT_SCALE = 0.02
PROB_SUM_TOL = 1e-6
PROB_CLAMP = 1e-12


@dataclass(frozen=True)
class ProjectionHead:
    """MLP mapping one modality's embedding into the token space.

    depth 3 (the default) chains in->hidden->hidden->out with a rectifier
    between affine maps; depth 1 degenerates to a single linear projection.
    """

    weights: tuple[np.ndarray, ...]
    biases: tuple[np.ndarray, ...]

    def __post_init__(self):
        if len(self.weights) != len(self.biases) or not self.weights:
            raise DomainError("head needs matching, non-empty weight/bias lists")
        weights = tuple(np.array(w, dtype=np.float64) for w in self.weights)
        biases = tuple(np.array(b, dtype=np.float64) for b in self.biases)
        for i, (w, b) in enumerate(zip(weights, biases)):
            if w.ndim != 2 or b.shape != (w.shape[0],):
                raise DomainError(f"layer {i}: weight {w.shape} / bias {b.shape} do not chain")
            if i > 0 and w.shape[1] != weights[i - 1].shape[0]:
                raise DomainError(f"layer {i} input dim does not match layer {i-1} output dim")
            if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
                raise DomainError(f"layer {i}: non-finite parameters")
            w.flags.writeable = False
            b.flags.writeable = False
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "biases", biases)

    @property
    def depth(self) -> int:
        return len(self.weights)

    @property
    def in_dim(self) -> int:
        return int(self.weights[0].shape[1])

    @property
    def out_dim(self) -> int:
        return int(self.weights[-1].shape[0])

    @staticmethod
    def random(
        in_dim: int,
        out_dim: int,
        hidden_dim: int = DEFAULT_HIDDEN_DIM,
        depth: int = 3,
        seed: int = 0,
        scale: float = 0.02,
    ) -> "ProjectionHead":
        if depth not in (1, 3):
            raise DomainError("head depth must be 1 (linear) or 3 (MLP)")
        rng = np.random.default_rng(seed)
        dims = [in_dim, out_dim] if depth == 1 else [in_dim, hidden_dim, hidden_dim, out_dim]
        weights, biases = [], []
        for d_in, d_out in zip(dims[:-1], dims[1:]):
            weights.append(rng.standard_normal((d_out, d_in)) * scale)
            biases.append(np.zeros(d_out))
        return ProjectionHead(tuple(weights), tuple(biases))


def apply_head(head: ProjectionHead, z: np.ndarray) -> np.ndarray:
    """Forward pass: affine maps with max(0, .) between them (never after the
    last layer)."""
    vec = np.asarray(z, dtype=np.float64)
    if vec.shape != (head.in_dim,):
        raise DomainError(f"input shape {vec.shape} does not match head in_dim {head.in_dim}")
    h = vec
    for w, b in zip(head.weights[:-1], head.biases[:-1]):
        h = np.maximum(0.0, w @ h + b)
    return head.weights[-1] @ h + head.biases[-1]


@dataclass(frozen=True)
class HeadGradients:
    """d(loss)/d(parameters) for one head, aligned layer by layer."""

    weight_grads: tuple[np.ndarray, ...]
    bias_grads: tuple[np.ndarray, ...]
    input_grad: np.ndarray


def head_gradient(head: ProjectionHead, z: np.ndarray, upstream: np.ndarray) -> HeadGradients:
    """Analytic backprop of `upstream` (d loss / d output) through the head."""
    vec = np.asarray(z, dtype=np.float64)
    if vec.shape != (head.in_dim,):
        raise DomainError(f"input shape {vec.shape} does not match head in_dim {head.in_dim}")
    g = np.asarray(upstream, dtype=np.float64)
    if g.shape != (head.out_dim,):
        raise DomainError(f"upstream shape {g.shape} does not match head out_dim {head.out_dim}")

    # forward, keeping pre-activations and layer inputs
    inputs = [vec]
    pre_acts = []
    h = vec
    for i, (w, b) in enumerate(zip(head.weights, head.biases)):
        pre = w @ h + b
        pre_acts.append(pre)
        h = pre if i == len(head.weights) - 1 else np.maximum(0.0, pre)
        inputs.append(h)

    weight_grads: list[np.ndarray] = [None] * head.depth  # type: ignore[list-item]
    bias_grads: list[np.ndarray] = [None] * head.depth  # type: ignore[list-item]
    for i in reversed(range(head.depth)):
        if i < head.depth - 1:
            g = g * (pre_acts[i] > 0.0)
        weight_grads[i] = np.outer(g, inputs[i])
        bias_grads[i] = g.copy()
        g = head.weights[i].T @ g
    return HeadGradients(tuple(weight_grads), tuple(bias_grads), g)


@dataclass(frozen=True)
class HeadSet:
    """The three modality heads, all landing in the same token dimension."""

    point: ProjectionHead
    visual: ProjectionHead
    text: ProjectionHead

    def __post_init__(self):
        dims = {self.point.out_dim, self.visual.out_dim, self.text.out_dim}
        if len(dims) != 1:
            raise DomainError(f"heads disagree on token dimension: {sorted(dims)}")

    @property
    def token_dim(self) -> int:
        return self.point.out_dim

    @staticmethod
    def random(
        point_dim: int,
        visual_dim: int,
        text_dim: int,
        token_dim: int = DEFAULT_TOKEN_DIM,
        hidden_dim: int = DEFAULT_HIDDEN_DIM,
        depth: int = 3,
        seed: int = 0,
    ) -> "HeadSet":
        return HeadSet(
            point=ProjectionHead.random(point_dim, token_dim, hidden_dim, depth, seed),
            visual=ProjectionHead.random(visual_dim, token_dim, hidden_dim, depth, seed + 1),
            text=ProjectionHead.random(text_dim, token_dim, hidden_dim, depth, seed + 2),
        )


class IdentifierEmbeddings:
    """Learnable identifier token table, seeded unit Gaussian scaled by 0.02."""

    def __init__(self, count: int, dim: int = DEFAULT_TOKEN_DIM, seed: int = 0):
        if count < 1:
            raise DomainError("identifier table needs at least one entry")
        rng = np.random.default_rng(seed)
        self.table = rng.standard_normal((count, dim)) * IDENTIFIER_INIT_SCALE
        self.table.flags.writeable = False

    def vector(self, index: int) -> np.ndarray:
        if not 0 <= index < self.table.shape[0]:
            raise DomainError(f"identifier index {index} outside table of {self.table.shape[0]}")
        return self.table[index]


@dataclass(frozen=True)
class ObjectTokenBlock:
    """One object's fused tokens in fixed order: identifier, point, visual, text."""

    identifier_embedding: np.ndarray
    point_token: np.ndarray
    visual_token: np.ndarray
    text_token: np.ndarray

    def __post_init__(self):
        parts = {}
        for name in ("identifier_embedding", "point_token", "visual_token", "text_token"):
            vec = np.array(getattr(self, name), dtype=np.float64)
            if vec.ndim != 1:
                raise DomainError(f"{name} must be a flat vector")
            vec.flags.writeable = False
            parts[name] = vec
        dims = {v.shape[0] for v in parts.values()}
        if len(dims) != 1:
            raise DomainError(f"block vectors disagree on dimension: {sorted(dims)}")
        for name, vec in parts.items():
            object.__setattr__(self, name, vec)

    @property
    def dim(self) -> int:
        return int(self.identifier_embedding.shape[0])

    def stacked(self) -> np.ndarray:
        """(4, dim) matrix in the fixed concatenation order."""
        return np.stack(
            [self.identifier_embedding, self.point_token, self.visual_token, self.text_token]
        )

    def with_zero_text(self) -> "ObjectTokenBlock":
        return ObjectTokenBlock(
            self.identifier_embedding,
            self.point_token,
            self.visual_token,
            np.zeros_like(self.text_token),
        )


def build_object_block(
    identifier_embedding: np.ndarray,
    z_point: Optional[np.ndarray],
    z_visual: Optional[np.ndarray],
    z_text: Optional[np.ndarray],
    heads: HeadSet,
) -> ObjectTokenBlock:
    """Project the three modality embeddings and assemble the block.

    A missing modality vector is a caller error; zero-vector substitution for
    missing descriptions happens upstream in the encoding stage.
    """
    if z_point is None or z_visual is None or z_text is None:
        raise DomainError("all three modality vectors are required to build a token block")
    return ObjectTokenBlock(
        identifier_embedding=np.asarray(identifier_embedding, dtype=np.float64),
        point_token=apply_head(heads.point, z_point),
        visual_token=apply_head(heads.visual, z_visual),
        text_token=apply_head(heads.text, z_text),
    )


@dataclass(frozen=True)
class SceneTokens:
    """Scene token sequence: (identifier, block) pairs in ascending object
    index order plus a flat (4n, dim) matrix view of the same data."""

    entries: tuple[tuple[str, ObjectTokenBlock], ...]
    matrix: np.ndarray


def serialize_scene_tokens(scene: Scene, blocks: Mapping[int, ObjectTokenBlock]) -> SceneTokens:
    indices = sorted(o.index for o in scene.objects)
    missing = [i for i in indices if i not in blocks]
    if missing:
        raise DomainError(f"no token block for objects {missing}")
    entries = tuple((object_identifier(i), blocks[i]) for i in indices)
    if entries:
        matrix = np.concatenate([block.stacked() for _, block in entries], axis=0)
    else:
        matrix = np.zeros((0, 0))
    matrix.flags.writeable = False
    return SceneTokens(entries, matrix)


def zero_text_modality(blocks: Mapping[int, ObjectTokenBlock]) -> dict[int, ObjectTokenBlock]:
    """Replace every text token with zeros (embedding-fusion ablation)."""
    return {index: block.with_zero_text() for index, block in blocks.items()}


@dataclass(frozen=True)
class ResponseLoss:
    per_position_nll: tuple[float, ...]
    total: float

    def __post_init__(self):
        if any(v < 0 for v in self.per_position_nll):
            raise DomainError("negative per-position NLL")
        if abs(self.total - sum(self.per_position_nll)) > 1e-9:
            raise DomainError("loss total does not match per-position sum")


def response_cross_entropy(
    probabilities: np.ndarray,
    targets: Sequence[int],
    response_span: tuple[int, int],
    strict: bool = True,
) -> ResponseLoss:
    """Sum of -log P(target) over exactly the k response positions.

    probabilities is (T, V) with rows summing to 1 within 1e-6; response_span
    is (start, k). Prefix positions never contribute. In strict mode a zero
    probability at a target raises; lenient mode clamps at 1e-12.
    """
    probs = np.asarray(probabilities, dtype=np.float64)
    if probs.ndim != 2:
        raise DomainError("probabilities must be a (positions, vocab) matrix")
    t, vocab = probs.shape
    ids = np.asarray(targets, dtype=np.int64)
    if ids.shape != (t,):
        raise DomainError(f"targets shape {ids.shape} does not match {t} positions")
    if ids.min(initial=0) < 0 or ids.max(initial=0) >= vocab:
        raise DomainError("target id outside vocabulary")
    start, k = response_span
    if k < 1:
        raise DomainError("response length k must be >= 1")
    if start < 0 or start + k > t:
        raise DomainError(f"response span ({start}, {k}) outside sequence of length {t}")
    row_sums = probs.sum(axis=1)
    if np.abs(row_sums - 1.0).max() > PROB_SUM_TOL:
        raise DomainError("probability rows must sum to 1 within 1e-6")

    nll = []
    for pos in range(start, start + k):
        p = probs[pos, ids[pos]]
        if p <= 0.0:
            if strict:
                raise DomainError(f"zero probability at response position {pos}")
            p = PROB_CLAMP
        nll.append(float(-np.log(p)))
    return ResponseLoss(tuple(nll), float(sum(nll)))
