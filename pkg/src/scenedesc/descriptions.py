"""Relational description generation: request planning across views with
deduplication, the fixed describer prompt template, a deterministic geometric
mock describer, and coverage/fallback handling."""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum
from typing import Mapping, Optional, Protocol, Sequence

import numpy as np

from .core import Scene
from .errors import BackendError, DomainError
from .projection import KeyObjectPolicy, ProjectionResult, camera_space, label_anchor, select_key_objects

log = logging.getLogger(__name__)

DESCRIBE_TEMPLATE = (
    "Describe clearly and briefly the relationships between the {key} in the scene "
    "and nearby objects ({others}). Do not describe objects you cannot see."
)
DESCRIBE_TEMPLATE_NO_OTHERS = (
    "Describe clearly and briefly the relationships between the {key} in the scene "
    "and nearby objects. Do not describe objects you cannot see."
)

# Geometric predicate thresholds for the mock describer (meters).
NEAR_DISTANCE = 1.0
LATERAL_OFFSET = 0.2
VERTICAL_OFFSET = 0.3


class DescriptionStatus(Enum):
    GENERATED = "generated"
    FALLBACK = "fallback"
    MISSING = "missing"


@dataclass(frozen=True)
class VlmRequest:
    """One describer call: a key object, every visible object of its view,
    the prompt text, and per-object label overlay anchors."""

    view_id: str
    key_object_index: int
    visible_object_indices: tuple[int, ...]
    prompt_text: str
    annotations: tuple[tuple[int, tuple[float, float], str], ...]

    def __post_init__(self):
        if self.key_object_index not in self.visible_object_indices:
            raise DomainError("key object must be among the visible objects")
        if not self.prompt_text:
            raise DomainError("prompt text is empty")


@dataclass(frozen=True)
class DescriptionRecord:
    object_index: int
    text: str
    source_view: str
    status: DescriptionStatus

    def __post_init__(self):
        if self.status is not DescriptionStatus.MISSING and not self.text:
            raise DomainError("non-missing description must carry text")


class DescriptionBackend(Protocol):
    def describe(self, request: VlmRequest) -> str: ...


def scene_display_names(scene: Scene) -> dict[int, str]:
    """Stable display name per object: the category label, numbered in object
    index order when the scene holds several objects of that category.

    Unlabeled objects fall back to the category "object". The mapping is a
    deterministic function of the scene, so name -> index lookups stay
    reversible everywhere downstream.
    """
    by_label: dict[str, list[int]] = {}
    for obj in scene.objects:
        by_label.setdefault(obj.label or "object", []).append(obj.index)
    names: dict[int, str] = {}
    for label, indices in by_label.items():
        indices.sort()
        if len(indices) == 1:
            names[indices[0]] = label
        else:
            for rank, index in enumerate(indices, start=1):
                names[index] = f"{label} {rank}"
    return names


def scene_name_map(scene: Scene) -> dict[str, int]:
    """Inverse of scene_display_names, extended with bare category names.

    An ambiguous bare category resolves to its lowest-index bearer so that
    identifier substitution stays total even on text from non-mock describers.
    """
    names = scene_display_names(scene)
    mapping = {name: index for index, name in names.items()}
    for obj in scene.objects:
        label = obj.label or "object"
        if label not in mapping:
            mapping[label] = min(o.index for o in scene.objects if (o.label or "object") == label)
    return mapping


def build_vlm_prompt(key_name: str, other_names: Sequence[str]) -> str:
    """Fill the describer prompt template; the parenthetical listing nearby
    objects is omitted when there are none."""
    if not key_name:
        raise DomainError("key object name is empty")
    if not other_names:
        return DESCRIBE_TEMPLATE_NO_OTHERS.format(key=key_name)
    return DESCRIBE_TEMPLATE.format(key=key_name, others=", ".join(other_names))


def plan_description_requests(
    scene: Scene,
    projections_by_view: Mapping[str, Sequence[ProjectionResult]],
    policy: KeyObjectPolicy = KeyObjectPolicy(),
) -> list[VlmRequest]:
    """One request per object that is a key object of some view.

    Views are walked in scene order; within a view key objects come in
    select_key_objects order, and an object already covered by an earlier
    view is skipped. Each request lists every visible object of its view.
    """
    names = scene_display_names(scene)
    described: set[int] = set()
    plan: list[VlmRequest] = []
    for view in scene.views:
        if view.view_id not in projections_by_view:
            raise DomainError(f"no projections supplied for view {view.view_id!r}")
        results = {r.object_index: r for r in projections_by_view[view.view_id]}
        keys = select_key_objects(view, list(results.values()), policy)
        visible = tuple(sorted(i for i, r in results.items() if r.visible))
        annotations = tuple(
            (i, label_anchor(view, results[i]), names[i]) for i in visible
        )
        for key in keys:
            if key in described:
                continue
            others = [names[i] for i in visible if i != key]
            plan.append(
                VlmRequest(
                    view_id=view.view_id,
                    key_object_index=key,
                    visible_object_indices=visible,
                    prompt_text=build_vlm_prompt(names[key], others),
                    annotations=annotations,
                )
            )
            described.add(key)
    return plan


def mock_describe(request: VlmRequest, scene: Scene) -> str:
    """Deterministic stand-in for the vision-language describer.

    Emits relational sentences from centroid geometry: near (world distance
    < 1 m), left/right of (camera-space x offset > 0.2 m), above/below (world
    z offset > 0.3 m), walking the other visible objects in ascending index
    order. Only objects visible in the request are ever mentioned.
    """
    names = scene_display_names(scene)
    view = scene.view_by_id(request.view_id)
    key = scene.object_by_index(request.key_object_index)
    key_name = names[key.index]
    key_centroid = key.centroid()
    key_cam_x = camera_space(view, key_centroid.reshape(1, 3))[0, 0]

    parts = [f"There is a {key_name} in the room."]
    for index in request.visible_object_indices:
        if index == request.key_object_index:
            continue
        other = scene.object_by_index(index)
        other_name = names[index]
        other_centroid = other.centroid()
        if np.linalg.norm(key_centroid - other_centroid) < NEAR_DISTANCE:
            parts.append(f"The {key_name} is near the {other_name}.")
        dx = key_cam_x - camera_space(view, other_centroid.reshape(1, 3))[0, 0]
        if dx > LATERAL_OFFSET:
            parts.append(f"The {key_name} is to the right of the {other_name}.")
        elif dx < -LATERAL_OFFSET:
            parts.append(f"The {key_name} is to the left of the {other_name}.")
        dz = key_centroid[2] - other_centroid[2]
        if dz > VERTICAL_OFFSET:
            parts.append(f"The {key_name} is above the {other_name}.")
        elif dz < -VERTICAL_OFFSET:
            parts.append(f"The {key_name} is below the {other_name}.")
    return " ".join(parts)


class MockDescriptionBackend:
    """DescriptionBackend that answers from scene geometry, deterministically."""

    def __init__(self, scene: Scene):
        self.scene = scene

    def describe(self, request: VlmRequest) -> str:
        return mock_describe(request, self.scene)


def run_descriptions(
    plan: Sequence[VlmRequest],
    backend: DescriptionBackend,
    parallelism: int = 1,
) -> dict[int, DescriptionRecord]:
    """Execute a plan against a describer backend.

    Up to `parallelism` calls run concurrently, but records are committed in
    plan order so the output is identical at any parallelism level. A request
    whose backend call fails (after the backend's own retries) yields a
    Missing record rather than aborting the scene.
    """
    if parallelism < 1:
        raise DomainError("parallelism must be >= 1")

    def call(request: VlmRequest):
        try:
            return backend.describe(request)
        except BackendError as exc:
            log.warning("describer failed for object %d: %s", request.key_object_index, exc)
            return None

    if parallelism == 1:
        outcomes = [call(req) for req in plan]
    else:
        with ThreadPoolExecutor(max_workers=parallelism) as pool:
            outcomes = list(pool.map(call, plan))

    records: dict[int, DescriptionRecord] = {}
    for request, text in zip(plan, outcomes):
        if request.key_object_index in records:
            continue
        if text is None:
            records[request.key_object_index] = DescriptionRecord(
                request.key_object_index, "", request.view_id, DescriptionStatus.MISSING
            )
        else:
            records[request.key_object_index] = DescriptionRecord(
                request.key_object_index, text, request.view_id, DescriptionStatus.GENERATED
            )
    return records


def fallback_requests(
    scene: Scene,
    projections_by_view: Mapping[str, Sequence[ProjectionResult]],
    covered: set[int],
) -> list[VlmRequest]:
    """Requests for objects never selected as key in any view, built from the
    view that maximizes their visible point count (ties: scene view order)."""
    names = scene_display_names(scene)
    requests = []
    for obj in scene.objects:
        if obj.index in covered:
            continue
        best_view_id, best_count = None, 0
        for view in scene.views:
            for res in projections_by_view[view.view_id]:
                if res.object_index == obj.index and res.visible_point_count > best_count:
                    best_view_id, best_count = view.view_id, res.visible_point_count
        if best_view_id is None:
            continue  # invisible everywhere; stays Missing
        results = {r.object_index: r for r in projections_by_view[best_view_id]}
        view = scene.view_by_id(best_view_id)
        visible = tuple(sorted(i for i, r in results.items() if r.visible))
        others = [names[i] for i in visible if i != obj.index]
        requests.append(
            VlmRequest(
                view_id=best_view_id,
                key_object_index=obj.index,
                visible_object_indices=visible,
                prompt_text=build_vlm_prompt(names[obj.index], others),
                annotations=tuple((i, label_anchor(view, results[i]), names[i]) for i in visible),
            )
        )
    return requests


def describe_scene(
    scene: Scene,
    projections_by_view: Mapping[str, Sequence[ProjectionResult]],
    backend: DescriptionBackend,
    policy: KeyObjectPolicy = KeyObjectPolicy(),
    parallelism: int = 1,
    fallback: bool = True,
) -> dict[int, DescriptionRecord]:
    """Plan, execute, and (optionally) backfill descriptions for a scene.

    With fallback enabled, objects that were never key in any view are
    described from their max-visibility view and marked Fallback; objects
    visible nowhere (or with fallback disabled) come back Missing.
    """
    plan = plan_description_requests(scene, projections_by_view, policy)
    records = run_descriptions(plan, backend, parallelism)
    if fallback:
        extra = fallback_requests(scene, projections_by_view, set(records))
        for index, record in run_descriptions(extra, backend, parallelism).items():
            if record.status is DescriptionStatus.GENERATED:
                record = DescriptionRecord(
                    record.object_index, record.text, record.source_view, DescriptionStatus.FALLBACK
                )
            records[index] = record
    for obj in scene.objects:
        if obj.index not in records:
            records[obj.index] = DescriptionRecord(obj.index, "", "", DescriptionStatus.MISSING)
    return {index: records[index] for index in sorted(records)}


@dataclass(frozen=True)
class CoverageReport:
    generated: tuple[int, ...]
    fallback: tuple[int, ...]
    missing: tuple[int, ...]

    @property
    def covered_fraction(self) -> float:
        total = len(self.generated) + len(self.fallback) + len(self.missing)
        return 1.0 if total == 0 else (total - len(self.missing)) / total


def coverage_report(scene: Scene, records: Mapping[int, DescriptionRecord]) -> CoverageReport:
    """Which objects got a description, and how."""
    generated, fallback, missing = [], [], []
    for obj in scene.objects:
        record = records.get(obj.index)
        if record is None or record.status is DescriptionStatus.MISSING:
            missing.append(obj.index)
        elif record.status is DescriptionStatus.FALLBACK:
            fallback.append(obj.index)
        else:
            generated.append(obj.index)
    return CoverageReport(tuple(generated), tuple(fallback), tuple(missing))
