from __future__ import annotations

import numpy as np
import pytest

from scenedesc.core import ObjectProposal, Scene
from scenedesc.toy import look_at_view, toy_scene

LABEL_POOL = [
    "chair", "table", "sofa", "lamp", "shelf",
    "cabinet", "desk", "curtain", "window", "monitor",
]


def make_random_scene(seed: int, points_per_object: int = 80) -> Scene:
    """Small synthetic scene with duplicate labels, an occasional unlabeled
    object, and 2-3 valid look-at cameras. Deterministic per seed."""
    rng = np.random.default_rng(seed)
    n_objects = int(rng.integers(3, 9))
    objects = []
    for index in range(n_objects):
        center = np.array([rng.uniform(1.0, 5.0), rng.uniform(1.0, 5.0), rng.uniform(0.2, 1.6)])
        size = rng.uniform(0.3, 1.2, size=3)
        xyz = center + rng.uniform(-0.5, 0.5, size=(points_per_object, 3)) * size
        rgb = np.tile(rng.uniform(0.0, 1.0, size=3), (points_per_object, 1))
        label = None if rng.random() < 0.15 else str(rng.choice(LABEL_POOL))
        objects.append(
            ObjectProposal(index=index, points=np.concatenate([xyz, rgb], axis=1), label=label)
        )
    n_views = int(rng.integers(2, 4))
    views = []
    for v in range(n_views):
        angle = rng.uniform(0.0, 2.0 * np.pi)
        eye = (3.0 + 4.5 * np.cos(angle), 3.0 + 4.5 * np.sin(angle), rng.uniform(1.0, 2.0))
        target = (rng.uniform(2.0, 4.0), rng.uniform(2.0, 4.0), rng.uniform(0.4, 1.2))
        views.append(look_at_view(f"view_{v}", eye, target))
    return Scene(scene_id=f"random-{seed}", objects=tuple(objects), views=tuple(views))


def random_box(rng: np.random.Generator):
    from scenedesc.core import Aabb

    lo = rng.uniform(0.0, 4.0, size=3)
    hi = lo + rng.uniform(0.2, 1.5, size=3)
    return Aabb(tuple(lo), tuple(hi))


@pytest.fixture(scope="session")
def toy():
    return toy_scene()
