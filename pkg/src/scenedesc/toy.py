"""Bundled toy scene: 8 objects, 3 views, 6 tasks.

Small enough that every pipeline stage runs offline in well under five
seconds, yet it exercises duplicate-category naming (two chairs), an
edge-of-view object, every task kind including a zero-target case, and
queries that quote the deterministic mock descriptions verbatim.
"""

from __future__ import annotations

from typing import Mapping, Sequence

import numpy as np

from .core import ObjectProposal, Scene, object_identifier, proposal_aabb
from .descriptions import DescriptionRecord, scene_display_names
from .metrics import TaskInstance, TaskKind
from .projection import CameraView

TOY_SCENE_ID = "toy-room-001"
_LATTICE = 6  # 6^3 = 216 points per object


def _lattice_points(bounds: Sequence[tuple[float, float]], rgb: tuple[float, float, float]) -> np.ndarray:
    axes = [np.linspace(lo, hi, _LATTICE) for lo, hi in bounds]
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, 3)
    colors = np.tile(np.asarray(rgb, dtype=np.float64), (grid.shape[0], 1))
    return np.concatenate([grid, colors], axis=1).astype(np.float32)


def look_at_view(
    view_id: str,
    eye: Sequence[float],
    target: Sequence[float],
    fx: float = 400.0,
    fy: float = 400.0,
    width: int = 640,
    height: int = 480,
) -> CameraView:
    """Camera at `eye` looking toward `target` in a z-up world; the camera
    looks along its +z axis and +y points down in the image."""
    eye = np.asarray(eye, dtype=np.float64)
    forward = np.asarray(target, dtype=np.float64) - eye
    forward /= np.linalg.norm(forward)
    up = np.array([0.0, 0.0, 1.0])
    right = np.cross(forward, up)
    right /= np.linalg.norm(right)
    down = np.cross(forward, right)
    rot = np.stack([right, down, forward])
    mat = np.eye(4)
    mat[:3, :3] = rot
    mat[:3, 3] = -rot @ eye
    return CameraView(
        view_id=view_id, fx=fx, fy=fy, cx=width / 2.0, cy=height / 2.0,
        world_to_camera=mat, width=width, height=height,
    )


_OBJECTS = [
    # (label, ((x0, x1), (y0, y1), (z0, z1)), rgb)
    ("table", ((2.4, 3.6), (2.6, 3.4), (0.0, 0.75)), (0.55, 0.35, 0.20)),
    ("chair", ((1.7, 2.2), (2.7, 3.3), (0.0, 0.90)), (0.70, 0.10, 0.10)),
    ("chair", ((3.8, 4.3), (2.7, 3.3), (0.0, 0.90)), (0.10, 0.10, 0.70)),
    ("sofa", ((0.8, 2.4), (4.6, 5.4), (0.0, 0.80)), (0.20, 0.50, 0.20)),
    ("curtain", ((5.7, 5.8), (2.2, 3.8), (0.5, 2.40)), (0.90, 0.85, 0.70)),
    ("window", ((5.85, 5.95), (2.3, 3.7), (0.8, 2.20)), (0.60, 0.80, 0.95)),
    ("shelf", ((2.6, 3.4), (5.6, 5.9), (0.0, 1.80)), (0.45, 0.30, 0.15)),
    ("lamp", ((2.9, 3.1), (2.9, 3.1), (0.75, 1.30)), (0.95, 0.90, 0.30)),
]


def toy_scene() -> Scene:
    objects = tuple(
        ObjectProposal(index=i, points=_lattice_points(bounds, rgb), label=label)
        for i, (label, bounds, rgb) in enumerate(_OBJECTS)
    )
    views = (
        look_at_view("view_front", eye=(3.0, 0.2, 1.4), target=(3.0, 3.2, 0.8)),
        look_at_view("view_side", eye=(0.4, 3.0, 1.5), target=(4.8, 3.0, 1.2)),
        look_at_view("view_back", eye=(2.2, 7.0, 1.9), target=(2.4, 4.2, 0.8)),
    )
    return Scene(scene_id=TOY_SCENE_ID, objects=objects, views=views)


def toy_tasks(scene: Scene, records: Mapping[int, DescriptionRecord]) -> list[TaskInstance]:
    """Six benchmark items over the toy scene. Grounding and QA queries quote
    the supplied descriptions verbatim, so a responder that understands the
    descriptions can solve them exactly."""
    names = scene_display_names(scene)
    box = {obj.index: proposal_aabb(obj) for obj in scene.objects}
    return [
        TaskInstance(
            instance_id="toy-ground-1",
            task_kind=TaskKind.GROUND_SINGLE,
            query=f"Which object matches this description: {records[0].text}",
            gt_boxes=(box[0],),
            target_object=0,
        ),
        TaskInstance(
            instance_id="toy-ground-2",
            task_kind=TaskKind.GROUND_SINGLE,
            query=f"Which object matches this description: {records[2].text}",
            gt_boxes=(box[2],),
            target_object=2,
        ),
        TaskInstance(
            instance_id="toy-multi-zt",
            task_kind=TaskKind.GROUND_MULTI,
            query="Are there any bathtubs or sinks here?",
            gt_boxes=(),
        ),
        TaskInstance(
            instance_id="toy-caption-1",
            task_kind=TaskKind.CAPTION,
            query=f"Describe the {names[6]} briefly.",
            gt_boxes=(box[6],),
            gt_texts=(records[6].text,),
            target_object=6,
        ),
        TaskInstance(
            instance_id="toy-caption-2",
            task_kind=TaskKind.CAPTION,
            query=f"Describe the {names[4]} briefly.",
            gt_boxes=(box[4],),
            gt_texts=(records[4].text,),
            target_object=4,
        ),
        TaskInstance(
            instance_id="toy-qa-1",
            task_kind=TaskKind.QA,
            query=f'What is the ID of the object that matches the description "{records[7].text}"?',
            gt_texts=(object_identifier(7),),
            target_object=7,
        ),
    ]
