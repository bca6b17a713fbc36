"""Stage orchestration: glue between the geometry, description, fusion,
prompting, and metric modules, plus the deterministic mock embedding sources
used when no precomputed encoder files are supplied.

Every stage is a pure function of its inputs and the run seed, so re-running
a stage with unchanged inputs reproduces its output byte for byte.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Mapping, Optional, Sequence

import numpy as np

from .backends import MockLlmBackend
from .core import Scene, proposal_aabb
from .descriptions import DescriptionRecord
from .fusion import (
    DEFAULT_TOKEN_DIM,
    HeadSet,
    IdentifierEmbeddings,
    ObjectTokenBlock,
    SceneTokens,
    build_object_block,
    serialize_scene_tokens,
    zero_text_modality,
)
from .metrics import Prediction, TaskInstance, TaskKind
from .projection import ProjectionResult, aggregate_view_features, project_object
from .prompting import (
    IDENTIFIER_PATTERN,
    IntegrationFlags,
    PromptBundle,
    PromptTemplates,
    ReferenceStyle,
    assemble_prompt,
    build_scene_vocabulary,
    detect_referenced_objects,
)
from .text_encoding import (
    DEFAULT_POINT_DIM,
    DEFAULT_TEXT_DIM,
    DEFAULT_VISUAL_DIM,
    MockTextEncoder,
    encode_records,
    fnv1a64,
)

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class EmbeddingDims:
    point: int = DEFAULT_POINT_DIM
    visual: int = DEFAULT_VISUAL_DIM
    text: int = DEFAULT_TEXT_DIM
    token: int = DEFAULT_TOKEN_DIM


def project_scene(scene: Scene) -> dict[str, list[ProjectionResult]]:
    """Project every object into every view, in scene order."""
    return {
        view.view_id: [project_object(view, obj) for obj in scene.objects]
        for view in scene.views
    }


def _stable_rng(*parts) -> np.random.Generator:
    seed = fnv1a64("/".join(str(p) for p in parts).encode("utf-8"))
    return np.random.default_rng(seed)


def mock_point_embeddings(scene: Scene, dim: int, seed: int) -> dict[int, np.ndarray]:
    """Deterministic stand-in for a pretrained point-cloud encoder."""
    out = {}
    for obj in scene.objects:
        rng = _stable_rng("point3d", scene.scene_id, obj.index, seed)
        vec = rng.standard_normal(dim)
        out[obj.index] = (vec / np.linalg.norm(vec)).astype(np.float32)
    return out


def mock_visual_embeddings(
    scene: Scene,
    projections_by_view: Mapping[str, Sequence[ProjectionResult]],
    dim: int,
    seed: int,
) -> dict[int, np.ndarray]:
    """Deterministic stand-in for a pretrained image encoder: one vector per
    view, combined with the size-weighted average; objects visible nowhere
    get the zero vector with a warning."""
    out = {}
    for obj in scene.objects:
        per_view = []
        for view in scene.views:
            result = next(
                r for r in projections_by_view[view.view_id] if r.object_index == obj.index
            )
            if result.visible_point_count == 0:
                continue
            rng = _stable_rng("visual2d", scene.scene_id, obj.index, view.view_id, seed)
            vec = rng.standard_normal(dim)
            per_view.append((vec / np.linalg.norm(vec), float(result.visible_point_count)))
        if per_view:
            out[obj.index] = aggregate_view_features(per_view).astype(np.float32)
        else:
            log.warning("object %d visible in no view; zero visual embedding", obj.index)
            out[obj.index] = np.zeros(dim, dtype=np.float32)
    return out


def text_embeddings_for_records(
    records: Mapping[int, DescriptionRecord], dim: int
) -> dict[int, np.ndarray]:
    encoder = MockTextEncoder(dim)
    return {index: rec.vector for index, rec in encode_records(records, encoder).items()}


def build_scene_blocks(
    scene: Scene,
    point_vectors: Mapping[int, np.ndarray],
    visual_vectors: Mapping[int, np.ndarray],
    text_vectors: Mapping[int, np.ndarray],
    dims: EmbeddingDims,
    seed: int,
) -> dict[int, ObjectTokenBlock]:
    """Project all three modalities through seeded heads into token blocks."""
    heads = HeadSet.random(dims.point, dims.visual, dims.text, dims.token, seed=seed)
    max_index = max(obj.index for obj in scene.objects)
    identifiers = IdentifierEmbeddings(max_index + 1, dims.token, seed=seed)
    blocks = {}
    for obj in scene.objects:
        blocks[obj.index] = build_object_block(
            identifiers.vector(obj.index),
            point_vectors[obj.index],
            visual_vectors[obj.index],
            text_vectors[obj.index],
            heads,
        )
    return blocks


def scene_tokens_with_flags(
    scene: Scene, blocks: Mapping[int, ObjectTokenBlock], flags: IntegrationFlags
) -> SceneTokens:
    """Serialize token blocks, zeroing the text modality when embedding
    fusion is off. The flags never touch prompt text."""
    if not flags.embedding_fusion:
        blocks = zero_text_modality(blocks)
    return serialize_scene_tokens(scene, blocks)


def prompts_for_tasks(
    scene: Scene,
    records: Mapping[int, DescriptionRecord],
    tasks: Sequence[TaskInstance],
    style: ReferenceStyle,
    flags: IntegrationFlags,
    templates: PromptTemplates = PromptTemplates(),
) -> list[tuple[str, PromptBundle]]:
    return [
        (task.instance_id, assemble_prompt(scene, records, task.query, style, flags, templates))
        for task in tasks
    ]


def answer_to_prediction(
    scene: Scene,
    task: TaskInstance,
    answer: str,
) -> Prediction:
    """Turn a responder's text answer into an evaluable prediction.

    Identifier tokens in the answer become predicted boxes (from the named
    objects' point envelopes). A captioning answer without identifiers is
    grounded to the object the query references, matching the protocol where
    the model captions the box it was asked about.
    """
    indices = []
    for match in IDENTIFIER_PATTERN.finditer(answer):
        index = int(match.group(1))
        try:
            scene.object_by_index(index)
        except Exception:
            log.warning("%s: answer names unknown object %d", task.instance_id, index)
            continue
        if index not in indices:
            indices.append(index)
    if not indices and task.task_kind is TaskKind.CAPTION:
        detected = detect_referenced_objects(task.query, build_scene_vocabulary(scene))
        if detected:
            indices = [detected[0]]
    boxes = tuple(proposal_aabb(scene.object_by_index(i)) for i in indices)
    return Prediction(boxes=boxes, text=answer)


def answer_tasks_mock(
    scene: Scene,
    records: Mapping[int, DescriptionRecord],
    tasks: Sequence[TaskInstance],
    bundles: Mapping[str, PromptBundle],
) -> list[Prediction]:
    backend = MockLlmBackend(scene, records)
    predictions = []
    for task in tasks:
        bundle = bundles[task.instance_id]
        predictions.append(answer_to_prediction(scene, task, backend.answer(bundle)))
    return predictions
