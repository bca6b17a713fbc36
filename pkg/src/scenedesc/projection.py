"""Pinhole projection of object point sets into multi-view images.

Covers per-point projection, per-object visibility aggregation, key-object
selection inside a view's central region, label anchor placement, and the
size-weighted multi-view feature average.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .core import ObjectProposal
from .errors import DomainError

DEPTH_EPS = 1e-6
ROTATION_TOL = 1e-6


@dataclass(frozen=True)
class CameraView:
    """Pinhole camera: intrinsics, a 4x4 world-to-camera rigid transform
    (right-handed, camera looks along +z), and the image size in pixels."""

    view_id: str
    fx: float
    fy: float
    cx: float
    cy: float
    world_to_camera: np.ndarray
    width: int
    height: int
    image_ref: Optional[str] = None

    def __post_init__(self):
        if self.fx <= 0 or self.fy <= 0:
            raise DomainError(f"view {self.view_id!r}: focal lengths must be positive")
        if self.width < 1 or self.height < 1:
            raise DomainError(f"view {self.view_id!r}: image size must be >= 1 px")
        mat = np.array(self.world_to_camera, dtype=np.float64)
        if mat.shape != (4, 4):
            raise DomainError(f"view {self.view_id!r}: world_to_camera must be 4x4")
        rot = mat[:3, :3]
        if np.abs(rot @ rot.T - np.eye(3)).max() > ROTATION_TOL:
            raise DomainError(f"view {self.view_id!r}: rotation block is not orthonormal")
        if np.abs(mat[3] - np.array([0.0, 0.0, 0.0, 1.0])).max() > ROTATION_TOL:
            raise DomainError(f"view {self.view_id!r}: last transform row must be [0 0 0 1]")
        mat.flags.writeable = False
        object.__setattr__(self, "world_to_camera", mat)


@dataclass(frozen=True)
class ProjectionResult:
    """Aggregate of one object's point projections into one view."""

    object_index: int
    visible_point_count: int
    visible_fraction: float
    center_px: Optional[tuple[float, float]] = None
    bbox2d: Optional[tuple[float, float, float, float]] = None
    mean_depth: Optional[float] = None

    def __post_init__(self):
        if (self.center_px is not None) != (self.visible_point_count > 0):
            raise DomainError("center_px must be present iff some point is visible")

    @property
    def visible(self) -> bool:
        return self.visible_point_count > 0


@dataclass(frozen=True)
class KeyObjectPolicy:
    """Which projected objects count as key objects of a view.

    The central region spans [margin*w, (1-margin)*w] x [margin*h, (1-margin)*h];
    an object also needs at least min_visible projected points.
    """

    central_margin: float = 0.25
    min_visible: int = 50

    def __post_init__(self):
        if not 0.0 <= self.central_margin < 0.5:
            raise DomainError("central_margin must lie in [0, 0.5)")
        if self.min_visible < 0:
            raise DomainError("min_visible must be >= 0")


def camera_space(view: CameraView, points) -> np.ndarray:
    """Transform (m, 3) world points into camera coordinates."""
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    rot = view.world_to_camera[:3, :3]
    trans = view.world_to_camera[:3, 3]
    return pts @ rot.T + trans


def project_point(view: CameraView, point) -> Optional[tuple[float, float, float]]:
    """Project one world point; returns (u, v, depth) or None when not visible.

    A point is not visible when its camera depth is <= DEPTH_EPS or its pixel
    falls outside [0, width) x [0, height).
    """
    cam = camera_space(view, np.asarray(point, dtype=np.float64))[0]
    depth = cam[2]
    if depth <= DEPTH_EPS:
        return None
    u = view.fx * cam[0] / depth + view.cx
    v = view.fy * cam[1] / depth + view.cy
    if not (0.0 <= u < view.width and 0.0 <= v < view.height):
        return None
    return (float(u), float(v), float(depth))


def project_object(
    view: CameraView,
    proposal: ObjectProposal,
    depth_map: Optional[np.ndarray] = None,
    depth_tolerance: float = 0.05,
) -> ProjectionResult:
    """Project all of a proposal's points and aggregate visibility.

    center_px is the mean of the visible pixel coordinates. When a per-view
    depth map is supplied, points further than depth_tolerance (meters) behind
    the stored surface depth are treated as occluded; by default there is no
    occlusion test.
    """
    cam = camera_space(view, proposal.xyz())
    depth = cam[:, 2]
    in_front = depth > DEPTH_EPS
    safe_depth = np.where(in_front, depth, 1.0)
    u = view.fx * cam[:, 0] / safe_depth + view.cx
    v = view.fy * cam[:, 1] / safe_depth + view.cy
    visible = in_front & (u >= 0.0) & (u < view.width) & (v >= 0.0) & (v < view.height)

    if depth_map is not None:
        dmap = np.asarray(depth_map, dtype=np.float64)
        if dmap.shape != (view.height, view.width):
            raise DomainError(
                f"depth map shape {dmap.shape} does not match image ({view.height}, {view.width})"
            )
        ui = np.clip(u.astype(np.int64), 0, view.width - 1)
        vi = np.clip(v.astype(np.int64), 0, view.height - 1)
        visible &= depth <= dmap[vi, ui] + depth_tolerance

    count = int(visible.sum())
    total = proposal.point_count
    if count == 0:
        return ProjectionResult(proposal.index, 0, 0.0)
    uu, vv = u[visible], v[visible]
    return ProjectionResult(
        object_index=proposal.index,
        visible_point_count=count,
        visible_fraction=count / total,
        center_px=(float(uu.mean()), float(vv.mean())),
        bbox2d=(float(uu.min()), float(vv.min()), float(uu.max()), float(vv.max())),
        mean_depth=float(depth[visible].mean()),
    )


def project_scene_view(view: CameraView, scene_objects: Sequence[ObjectProposal]) -> list[ProjectionResult]:
    return [project_object(view, obj) for obj in scene_objects]


def select_key_objects(
    view: CameraView,
    results: Sequence[ProjectionResult],
    policy: KeyObjectPolicy = KeyObjectPolicy(),
) -> list[int]:
    """Objects whose projected center lies in the view's central region.

    Ordered by descending visible point count, ties broken by ascending index;
    objects hugging the image edge or with too few visible points are dropped.
    """
    u_lo, u_hi = policy.central_margin * view.width, (1.0 - policy.central_margin) * view.width
    v_lo, v_hi = policy.central_margin * view.height, (1.0 - policy.central_margin) * view.height
    eligible = []
    for res in results:
        if not res.visible or res.visible_point_count < policy.min_visible:
            continue
        u, v = res.center_px
        if u_lo <= u <= u_hi and v_lo <= v <= v_hi:
            eligible.append(res)
    eligible.sort(key=lambda r: (-r.visible_point_count, r.object_index))
    return [r.object_index for r in eligible]


def label_anchor(view: CameraView, result: ProjectionResult) -> tuple[float, float]:
    """Where to anchor an object's name overlay: its projected center clamped
    to the image interior with a 2 px margin."""
    if not result.visible:
        raise DomainError(f"object {result.object_index} is not visible in view {view.view_id!r}")
    u, v = result.center_px
    u = min(max(u, 2.0), max(2.0, view.width - 2.0))
    v = min(max(v, 2.0), max(2.0, view.height - 2.0))
    return (u, v)


def aggregate_view_features(per_view: Sequence[tuple[np.ndarray, float]]) -> np.ndarray:
    """Size-weighted average of per-view embeddings: sum(w_i e_i) / sum(w_i).

    Weights are the per-view visible projected point counts; at least one
    weight must be positive and all embeddings must share a dimension.
    """
    if not per_view:
        raise DomainError("no per-view features to aggregate")
    dim = np.asarray(per_view[0][0], dtype=np.float64).shape
    total_weight = 0.0
    acc = np.zeros(dim, dtype=np.float64)
    for embedding, weight in per_view:
        vec = np.asarray(embedding, dtype=np.float64)
        if vec.shape != dim:
            raise DomainError(f"embedding dimension mismatch: {vec.shape} vs {dim}")
        if weight < 0:
            raise DomainError("negative aggregation weight")
        acc += float(weight) * vec
        total_weight += float(weight)
    if total_weight <= 0.0:
        raise DomainError("all aggregation weights are zero")
    return acc / total_weight
