"""Boxes and overlap: the geometry every grounding metric is built on.

Run: python demos/01_box_geometry.py
"""

import numpy as np

from scenedesc.core import Aabb, aabb_from_points, iou_aabb

# An axis-aligned box is just the min/max envelope of a point set.
rng = np.random.default_rng(0)
points = rng.uniform(0.0, 1.0, size=(500, 3))
box = aabb_from_points(points)
print("envelope of 500 unit-cube samples:")
print("  min:", [round(v, 3) for v in box.min_corner])
print("  max:", [round(v, 3) for v in box.max_corner])
print("  volume:", round(box.volume, 4))

# IoU is intersection volume over union volume.
unit = Aabb((0, 0, 0), (1, 1, 1))
print("\noverlap as a shifted copy slides away along x:")
for shift in (0.0, 0.25, 0.5, 0.75, 1.0, 1.5):
    other = unit.translated((shift, 0.0, 0.0))
    print(f"  shift {shift:4.2f} -> IoU {iou_aabb(unit, other):.4f}")

# The half-overlap case is the classic hand check: 0.5 / 1.5 = 1/3.
half = Aabb((0.5, 0, 0), (1.5, 1, 1))
print("\nhalf-overlap IoU:", iou_aabb(unit, half))

# Degenerate boxes never count as hits: a zero-volume union is defined as 0.
flat = Aabb((0, 0, 0), (1, 1, 0))
print("flat-box IoU with itself:", iou_aabb(flat, flat))
