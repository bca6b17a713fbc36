"""Object-centric 3D scene description pipeline.

Projects segmented objects into multi-view images, generates per-object
relational text, fuses text/geometry/appearance embeddings into token blocks,
assembles dual-level prompts, and scores grounding, captioning, and QA tasks.
"""

__version__ = "0.1.0"

from .core import Aabb, ObjectProposal, Scene, aabb_from_points, iou_aabb, object_identifier
from .projection import CameraView, KeyObjectPolicy, ProjectionResult

__all__ = [
    "Aabb",
    "CameraView",
    "KeyObjectPolicy",
    "ObjectProposal",
    "ProjectionResult",
    "Scene",
    "aabb_from_points",
    "iou_aabb",
    "object_identifier",
]
