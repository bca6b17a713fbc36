"""Domain types for scenes, object proposals, and axis-aligned box arithmetic.

Boxes are axis-aligned in world coordinates and derived from proposal point
sets; all grounding metrics build on ``iou_aabb``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING, Optional, Sequence

import numpy as np

from .errors import DomainError

if TYPE_CHECKING:
    from .projection import CameraView

MAX_IDENTIFIER_INDEX = 999
DEFAULT_PROPOSAL_CAP = 100


def object_identifier(index: int) -> str:
    """Format an object index as its identifier token, e.g. 23 -> "<OBJ023>"."""
    if not 0 <= index <= MAX_IDENTIFIER_INDEX:
        raise DomainError(f"object index {index} outside [0, {MAX_IDENTIFIER_INDEX}]")
    return f"<OBJ{index:03d}>"


def parse_identifier(token: str) -> int:
    """Inverse of object_identifier; raises DomainError on malformed tokens."""
    if len(token) == 8 and token.startswith("<OBJ") and token.endswith(">") and token[4:7].isdigit():
        return int(token[4:7])
    raise DomainError(f"malformed identifier token: {token!r}")


@dataclass(frozen=True)
class ObjectProposal:
    """One segmented object: an (m, 6) point array of XYZ meters + RGB in [0, 1]."""

    index: int
    points: np.ndarray
    label: Optional[str] = None

    def __post_init__(self):
        if not 0 <= self.index <= MAX_IDENTIFIER_INDEX:
            raise DomainError(f"object index {self.index} outside [0, {MAX_IDENTIFIER_INDEX}]")
        pts = np.array(self.points, dtype=np.float32)
        if pts.ndim != 2 or pts.shape[1] != 6:
            raise DomainError(f"points must have shape (m, 6), got {pts.shape}")
        if pts.shape[0] < 1:
            raise DomainError("proposal point set is empty")
        if not np.all(np.isfinite(pts)):
            raise DomainError(f"object {self.index}: non-finite point values")
        rgb = pts[:, 3:6]
        if rgb.min() < 0.0 or rgb.max() > 1.0:
            raise DomainError(f"object {self.index}: RGB components outside [0, 1]")
        pts.flags.writeable = False
        object.__setattr__(self, "points", pts)

    @property
    def identifier(self) -> str:
        return object_identifier(self.index)

    @property
    def point_count(self) -> int:
        return int(self.points.shape[0])

    def xyz(self) -> np.ndarray:
        """(m, 3) float64 view of the point coordinates."""
        return self.points[:, :3].astype(np.float64)

    def centroid(self) -> np.ndarray:
        return self.xyz().mean(axis=0)


@dataclass(frozen=True)
class Aabb:
    """Axis-aligned box given by closed min/max corners (meters)."""

    min_corner: tuple[float, float, float]
    max_corner: tuple[float, float, float]

    def __post_init__(self):
        lo = tuple(float(v) for v in self.min_corner)
        hi = tuple(float(v) for v in self.max_corner)
        if len(lo) != 3 or len(hi) != 3:
            raise DomainError("box corners must be 3-dimensional")
        if any(not np.isfinite(v) for v in lo + hi):
            raise DomainError("box corners must be finite")
        if any(a > b for a, b in zip(lo, hi)):
            raise DomainError(f"box min {lo} exceeds max {hi}")
        object.__setattr__(self, "min_corner", lo)
        object.__setattr__(self, "max_corner", hi)

    @property
    def volume(self) -> float:
        lo, hi = self.min_corner, self.max_corner
        return float((hi[0] - lo[0]) * (hi[1] - lo[1]) * (hi[2] - lo[2]))

    def contains(self, point: Sequence[float]) -> bool:
        return all(lo <= p <= hi for lo, p, hi in zip(self.min_corner, point, self.max_corner))

    def translated(self, offset: Sequence[float]) -> "Aabb":
        dx, dy, dz = (float(v) for v in offset)
        lo, hi = self.min_corner, self.max_corner
        return Aabb((lo[0] + dx, lo[1] + dy, lo[2] + dz), (hi[0] + dx, hi[1] + dy, hi[2] + dz))

    def as_tuple(self) -> tuple[float, float, float, float, float, float]:
        return self.min_corner + self.max_corner


def aabb_from_points(points) -> Aabb:
    """Componentwise min/max envelope of an (m, 3) point array.

    Every input point lies inside the returned box (closed bounds).
    """
    pts = np.asarray(points, dtype=np.float64)
    if pts.size == 0:
        raise DomainError("cannot build a box from an empty point list")
    if pts.ndim != 2 or pts.shape[1] < 3:
        raise DomainError(f"expected (m, 3) points, got shape {pts.shape}")
    xyz = pts[:, :3]
    lo = xyz.min(axis=0)
    hi = xyz.max(axis=0)
    return Aabb(tuple(lo), tuple(hi))


def proposal_aabb(proposal: ObjectProposal) -> Aabb:
    return aabb_from_points(proposal.xyz())


def iou_aabb(a: Aabb, b: Aabb) -> float:
    """Intersection-over-union of two axis-aligned boxes.

    Returns 0 for disjoint boxes; a zero-volume union is defined as IoU 0 so
    the metric is total (degenerate predictions never count as hits).
    """
    inter = 1.0
    for lo_a, hi_a, lo_b, hi_b in zip(a.min_corner, a.max_corner, b.min_corner, b.max_corner):
        overlap = min(hi_a, hi_b) - max(lo_a, lo_b)
        if overlap <= 0.0:
            return 0.0
        inter *= overlap
    union = a.volume + b.volume - inter
    if union <= 0.0:
        return 0.0
    return inter / union


@dataclass(frozen=True)
class Scene:
    """A scene: object proposals plus the camera views they were scanned from."""

    scene_id: str
    objects: tuple[ObjectProposal, ...]
    views: tuple["CameraView", ...] = ()
    proposal_cap: int = DEFAULT_PROPOSAL_CAP

    def __post_init__(self):
        objects = tuple(self.objects)
        views = tuple(self.views)
        if len(objects) > self.proposal_cap:
            raise DomainError(
                f"scene {self.scene_id!r} has {len(objects)} objects, cap is {self.proposal_cap}"
            )
        indices = [o.index for o in objects]
        if len(set(indices)) != len(indices):
            raise DomainError(f"scene {self.scene_id!r} has duplicate object identifiers")
        view_ids = [v.view_id for v in views]
        if len(set(view_ids)) != len(view_ids):
            raise DomainError(f"scene {self.scene_id!r} has duplicate view ids")
        object.__setattr__(self, "objects", objects)
        object.__setattr__(self, "views", views)

    def object_by_index(self, index: int) -> ObjectProposal:
        for obj in self.objects:
            if obj.index == index:
                return obj
        raise DomainError(f"scene {self.scene_id!r} has no object with index {index}")

    def view_by_id(self, view_id: str) -> "CameraView":
        for view in self.views:
            if view.view_id == view_id:
                return view
        raise DomainError(f"scene {self.scene_id!r} has no view {view_id!r}")
