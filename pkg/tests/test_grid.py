import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from srmg.grid import (
    EMPTY, AlignmentError, Box, ExtentError, Field, Region, boxes_pairwise_disjoint, cell_center,
    coarsen, grow, intersect, refine, region_axpy, region_copy, region_fill, region_inf_norm, subtract,
)


def cube(lo, hi):
    return Box((lo,) * 3, (hi,) * 3)


@st.composite
def boxes(draw, lo=-4, hi=6):
    a = [draw(st.integers(lo, hi)) for _ in range(3)]
    n = [draw(st.integers(0, 5)) for _ in range(3)]
    return Box(a, [x + m - 1 for x, m in zip(a, n)])


def test_grow_examples():
    assert grow(cube(0, 3), 2) == cube(-2, 5)
    assert grow(cube(0, 3), 0) == cube(0, 3)
    assert grow(EMPTY, 5).is_empty


def test_intersect_examples():
    assert intersect(cube(0, 3), cube(2, 5)) == cube(2, 3)
    assert intersect(cube(0, 3), cube(4, 5)).is_empty
    b = Box((1, 2, 3), (4, 4, 9))
    assert intersect(b, b) == b


def test_subtract_examples():
    assert subtract(cube(0, 3), cube(0, 3)).is_empty
    assert subtract(cube(0, 3), cube(1, 2)).volume == 56
    r = subtract(cube(0, 3), cube(10, 12))
    assert list(r) == [cube(0, 3)]


def test_refine_coarsen_examples():
    assert refine(cube(0, 3)) == cube(0, 7)
    with pytest.raises(AlignmentError):
        coarsen(cube(1, 4))


def test_cell_center_examples():
    assert cell_center((0, 0, 0), 0.5) == (0.25, 0.25, 0.25)
    assert cell_center((3, 1, 1), 0.5) == (1.75, 0.75, 0.75)
    assert cell_center((-1, 0, 0), 1.0) == (-0.5, 0.5, 0.5)


@settings(max_examples=200, deadline=None)
@given(boxes(), boxes())
def test_volume_identity(a, b):
    assert intersect(a, b).volume + subtract(a, b).volume == a.volume


@settings(max_examples=150, deadline=None)
@given(boxes(), boxes())
def test_subtract_matches_set_difference(a, b):
    r = subtract(a, b)
    assert len(r) <= 6
    assert boxes_pairwise_disjoint(list(r))
    want = {c for c in grow(a, 1).cells() if a.contains_index(c) and not b.contains_index(c)}
    assert r.cells() == want


@settings(max_examples=100, deadline=None)
@given(boxes())
def test_coarsen_inverts_refine(b):
    if b.is_empty:
        assert coarsen(refine(b)).is_empty
    else:
        assert coarsen(refine(b)) == b


@settings(max_examples=100, deadline=None)
@given(boxes(), st.integers(0, 3))
def test_grow_contains(b, j):
    if not b.is_empty:
        g = grow(b, j)
        assert g.contains(b)
        assert g.volume == np.prod([n + 2 * j for n in b.shape])


def test_region_norm_and_fill():
    f = Field(cube(0, 3), 1, 0.5)
    region_fill(f, -2.5, cube(1, 2))
    assert region_inf_norm(f, cube(0, 3)) == 2.5
    assert region_inf_norm(f, Region()) == 0.0
    assert region_inf_norm(f, EMPTY) == 0.0


def test_region_ops_touch_only_region():
    sentinel = 123.0
    y = Field(cube(0, 3), 1, 1.0)
    y.values[...] = sentinel
    x = Field(cube(0, 3), 1, 1.0)
    x.values[...] = 3.0
    r = subtract(cube(0, 3), cube(1, 2))
    region_fill(y, 1.0, r)
    region_axpy(y, 2.0, x, r)
    for c in grow(cube(0, 3), 1).cells():
        inside = cube(0, 3).contains_index(c) and not cube(1, 2).contains_index(c)
        assert y[c] == (7.0 if inside else sentinel)
    z = Field(cube(0, 3), 1, 1.0)
    region_copy(z, y, cube(1, 2))
    assert np.all(z.view(cube(1, 2)) == sentinel)
    assert region_inf_norm(z, subtract(cube(0, 3), cube(1, 2))) == 0.0


def test_field_extent_errors():
    f = Field(cube(0, 3), 1, 1.0)
    with pytest.raises(ExtentError):
        f.view(cube(-2, 0))
    with pytest.raises(ExtentError):
        f[(5, 0, 0)]
    with pytest.raises(ExtentError):
        Field(cube(0, 3), 1, 1.0, np.zeros((4, 4, 4)))


def test_field_layout_x_fastest():
    f = Field(Box((0, 0, 0), (2, 1, 0)), 0, 1.0)
    assert f.values.flags.f_contiguous
    assert [c for c in f.box.cells()][:3] == [(0, 0, 0), (1, 0, 0), (2, 0, 0)]
