from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from scenedesc.core import (
    Aabb,
    ObjectProposal,
    Scene,
    aabb_from_points,
    iou_aabb,
    object_identifier,
    parse_identifier,
)
from scenedesc.errors import DomainError

from conftest import random_box


def test_identifier_format():
    assert object_identifier(1) == "<OBJ001>"
    assert object_identifier(23) == "<OBJ023>"
    assert object_identifier(999) == "<OBJ999>"
    assert parse_identifier("<OBJ042>") == 42
    with pytest.raises(DomainError):
        object_identifier(1000)
    with pytest.raises(DomainError):
        parse_identifier("<OBJ42>")


def test_envelope_of_two_points():
    box = aabb_from_points([(0, 0, 0), (1, 2, 3)])
    assert box.min_corner == (0.0, 0.0, 0.0)
    assert box.max_corner == (1.0, 2.0, 3.0)


def test_envelope_degenerate_single_point():
    box = aabb_from_points([(5, 5, 5)])
    assert box.min_corner == box.max_corner == (5.0, 5.0, 5.0)
    assert box.volume == 0.0


def test_envelope_contains_all_samples():
    # brute-force containment over 1000 unit-cube samples
    rng = np.random.default_rng(7)
    pts = rng.uniform(0.0, 1.0, size=(1000, 3))
    box = aabb_from_points(pts)
    unit = Aabb((0, 0, 0), (1, 1, 1))
    assert unit.contains(box.min_corner) and unit.contains(box.max_corner)
    for p in pts:
        assert box.contains(p)


def test_envelope_monotone_under_extra_point():
    rng = np.random.default_rng(3)
    pts = rng.uniform(-1.0, 1.0, size=(10, 3))
    base = aabb_from_points(pts)
    grown = aabb_from_points(np.vstack([pts, [[2.0, -3.0, 0.5]]]))
    assert all(g <= b for g, b in zip(grown.min_corner, base.min_corner))
    assert all(g >= b for g, b in zip(grown.max_corner, base.max_corner))


def test_envelope_empty_rejected():
    with pytest.raises(DomainError):
        aabb_from_points(np.zeros((0, 3)))


def test_iou_identity_and_disjoint():
    unit = Aabb((0, 0, 0), (1, 1, 1))
    assert iou_aabb(unit, unit) == 1.0
    far = Aabb((2, 2, 2), (3, 3, 3))
    assert iou_aabb(unit, far) == 0.0


def test_iou_hand_derived_third():
    # intersection 0.5, union 1.5 -> exactly 1/3
    a = Aabb((0, 0, 0), (1, 1, 1))
    b = Aabb((0.5, 0, 0), (1.5, 1, 1))
    assert abs(iou_aabb(a, b) - 0.5 / 1.5) <= 1e-12
    assert abs(iou_aabb(a, b) - 1.0 / 3.0) <= 1e-12


def test_iou_degenerate_boxes_score_zero():
    flat = Aabb((0, 0, 0), (1, 1, 0))
    assert iou_aabb(flat, flat) == 0.0
    point = Aabb((0.5, 0.5, 0.5), (0.5, 0.5, 0.5))
    assert iou_aabb(point, point) == 0.0


@settings(max_examples=200, deadline=None)
@given(st.integers(min_value=0, max_value=2**31 - 1))
def test_iou_symmetry_and_bounds(seed):
    rng = np.random.default_rng(seed)
    a, b = random_box(rng), random_box(rng)
    ab, ba = iou_aabb(a, b), iou_aabb(b, a)
    assert abs(ab - ba) <= 1e-12
    assert 0.0 <= ab <= 1.0


def test_iou_translation_invariance():
    rng = np.random.default_rng(11)
    for _ in range(100):
        a, b = random_box(rng), random_box(rng)
        offset = rng.uniform(-5.0, 5.0, size=3)
        assert abs(iou_aabb(a, b) - iou_aabb(a.translated(offset), b.translated(offset))) <= 1e-12


def test_proposal_validation():
    good = np.array([[0.0, 0.0, 0.0, 0.5, 0.5, 0.5]])
    obj = ObjectProposal(index=1, points=good)
    assert obj.identifier == "<OBJ001>"
    assert obj.point_count == 1
    with pytest.raises(DomainError):
        ObjectProposal(index=0, points=np.zeros((0, 6)))
    bad_rgb = np.array([[0.0, 0.0, 0.0, 1.5, 0.5, 0.5]])
    with pytest.raises(DomainError):
        ObjectProposal(index=0, points=bad_rgb)


def test_scene_rejects_duplicates_and_overflow():
    pts = np.array([[0.0, 0.0, 0.0, 0.5, 0.5, 0.5]])
    a = ObjectProposal(index=0, points=pts)
    dup = ObjectProposal(index=0, points=pts, label="chair")
    with pytest.raises(DomainError):
        Scene(scene_id="s", objects=(a, dup))
    many = tuple(ObjectProposal(index=i, points=pts) for i in range(5))
    with pytest.raises(DomainError):
        Scene(scene_id="s", objects=many, proposal_cap=4)
