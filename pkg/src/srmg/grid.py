"""Integer box/region algebra and cell-centered field storage.

Boxes are closed integer intervals ``[lo, hi]`` in cell-index space.  A box is
empty when ``hi < lo`` in any dimension; empty boxes propagate through every
operation.  A :class:`Region` is a disjoint union of boxes.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Iterator, Sequence

import numpy as np

DIM = 3


class GridError(ValueError):
    """Base class for index-space errors."""


class AlignmentError(GridError):
    """Raised when coarsening a box that does not sit on even boundaries."""


class ExtentError(GridError):
    """Raised when a region reaches outside a field's storage."""


def _vec(v) -> tuple[int, int, int]:
    t = tuple(int(x) for x in v)
    if len(t) != DIM:
        raise GridError(f"expected a {DIM}-vector, got {v!r}")
    return t


@dataclass(frozen=True)
class Box:
    lo: tuple[int, int, int]
    hi: tuple[int, int, int]

    def __post_init__(self):
        object.__setattr__(self, "lo", _vec(self.lo))
        object.__setattr__(self, "hi", _vec(self.hi))

    @classmethod
    def from_shape(cls, shape, lo=(0, 0, 0)) -> "Box":
        lo = _vec(lo)
        return cls(lo, tuple(l + n - 1 for l, n in zip(lo, _vec(shape))))

    @classmethod
    def empty(cls) -> "Box":
        return EMPTY

    @property
    def is_empty(self) -> bool:
        return any(h < l for l, h in zip(self.lo, self.hi))

    @property
    def shape(self) -> tuple[int, int, int]:
        if self.is_empty:
            return (0, 0, 0)
        return tuple(h - l + 1 for l, h in zip(self.lo, self.hi))

    @property
    def volume(self) -> int:
        s = self.shape
        return s[0] * s[1] * s[2]

    def contains(self, other: "Box") -> bool:
        if other.is_empty:
            return True
        if self.is_empty:
            return False
        return all(a <= c and d <= b for a, b, c, d in zip(self.lo, self.hi, other.lo, other.hi))

    def contains_index(self, i) -> bool:
        return not self.is_empty and all(l <= x <= h for l, x, h in zip(self.lo, i, self.hi))

    def cells(self) -> Iterator[tuple[int, int, int]]:
        """Iterate cell indices (x fastest)."""
        if self.is_empty:
            return
        for k in range(self.lo[2], self.hi[2] + 1):
            for j in range(self.lo[1], self.hi[1] + 1):
                for i in range(self.lo[0], self.hi[0] + 1):
                    yield (i, j, k)

    def __repr__(self) -> str:
        if self.is_empty:
            return "Box(empty)"
        return f"Box({list(self.lo)}..{list(self.hi)})"


EMPTY = Box((0, 0, 0), (-1, -1, -1))


def grow(b: Box, j: int) -> Box:
    if j < 0:
        raise GridError("grow width must be non-negative")
    if b.is_empty:
        return EMPTY
    return Box(tuple(x - j for x in b.lo), tuple(x + j for x in b.hi))


def intersect(a: Box, b: Box) -> Box:
    if a.is_empty or b.is_empty:
        return EMPTY
    lo = tuple(max(x, y) for x, y in zip(a.lo, b.lo))
    hi = tuple(min(x, y) for x, y in zip(a.hi, b.hi))
    if any(h < l for l, h in zip(lo, hi)):
        return EMPTY
    return Box(lo, hi)


def subtract(a: Box, b: Box) -> "Region":
    """Return ``a \\ b`` as at most six disjoint boxes (axis sweep)."""
    c = intersect(a, b)
    if c.is_empty:
        return Region([a]) if not a.is_empty else Region()
    boxes = []
    lo, hi = list(a.lo), list(a.hi)
    for d in range(DIM):
        if lo[d] < c.lo[d]:
            blo, bhi = list(lo), list(hi)
            bhi[d] = c.lo[d] - 1
            boxes.append(Box(blo, bhi))
        if c.hi[d] < hi[d]:
            blo, bhi = list(lo), list(hi)
            blo[d] = c.hi[d] + 1
            boxes.append(Box(blo, bhi))
        lo[d], hi[d] = c.lo[d], c.hi[d]
    return Region(boxes)


def refine(b: Box) -> Box:
    if b.is_empty:
        return EMPTY
    return Box(tuple(2 * x for x in b.lo), tuple(2 * x + 1 for x in b.hi))


def coarsen(b: Box) -> Box:
    """Exact inverse of :func:`refine`; requires even ``lo`` and odd ``hi``."""
    if b.is_empty:
        return EMPTY
    if any(x % 2 for x in b.lo) or any(x % 2 == 0 for x in b.hi):
        raise AlignmentError(f"{b} is not aligned to even boundaries")
    return Box(tuple(x // 2 for x in b.lo), tuple(x // 2 for x in b.hi))


def coarsen_cover(b: Box) -> Box:
    """Smallest coarse box whose refinement covers ``b`` (no alignment needed)."""
    if b.is_empty:
        return EMPTY
    return Box(tuple(x // 2 for x in b.lo), tuple(x // 2 for x in b.hi))


def prolong_footprint(b: Box) -> Box:
    """Coarse cells read by cell-centered trilinear interpolation onto ``b``."""
    if b.is_empty:
        return EMPTY
    return Box(tuple((x - 1) // 2 for x in b.lo), tuple((x + 1) // 2 for x in b.hi))


def cell_center(i, h: float, origin=(0.0, 0.0, 0.0)) -> tuple[float, float, float]:
    return tuple(o + x * h + 0.5 * h for x, o in zip(i, origin))


class Region:
    """Disjoint union of boxes."""

    def __init__(self, boxes: Iterable[Box] = ()):
        self.boxes: tuple[Box, ...] = tuple(b for b in boxes if not b.is_empty)

    @classmethod
    def of(cls, b: Box) -> "Region":
        return cls([b])

    @property
    def volume(self) -> int:
        return sum(b.volume for b in self.boxes)

    @property
    def is_empty(self) -> bool:
        return not self.boxes

    def __iter__(self) -> Iterator[Box]:
        return iter(self.boxes)

    def __len__(self) -> int:
        return len(self.boxes)

    def __repr__(self) -> str:
        return f"Region({list(self.boxes)})"

    def cells(self) -> set[tuple[int, int, int]]:
        return {c for b in self.boxes for c in b.cells()}

    def subtract(self, b: Box) -> "Region":
        return Region([x for a in self.boxes for x in subtract(a, b)])

    def intersect(self, b: Box) -> "Region":
        return Region([intersect(a, b) for a in self.boxes])


def as_region(r) -> Region:
    if isinstance(r, Region):
        return r
    if isinstance(r, Box):
        return Region.of(r)
    return Region(r)


@dataclass
class Field:
    """Cell-centered scalar over ``box`` with a ``ghost``-cell margin.

    ``values`` covers exactly ``grow(box, ghost)`` and is stored with the x
    index varying fastest.
    """

    box: Box
    ghost: int
    h: float
    values: np.ndarray = field(repr=False, default=None)

    def __post_init__(self):
        shape = self.storage.shape
        if self.values is None:
            self.values = np.zeros(shape, order="F")
        elif self.values.shape != shape:
            raise ExtentError(f"values shape {self.values.shape} != storage {shape}")

    @property
    def storage(self) -> Box:
        return grow(self.box, self.ghost)

    def slices(self, b: Box) -> tuple[slice, slice, slice]:
        st = self.storage
        if b.is_empty:
            return (slice(0, 0),) * DIM
        if not st.contains(b):
            raise ExtentError(f"{b} exceeds storage {st}")
        return tuple(slice(l - s, h - s + 1) for l, h, s in zip(b.lo, b.hi, st.lo))

    def view(self, b: Box) -> np.ndarray:
        return self.values[self.slices(b)]

    def __getitem__(self, i) -> float:
        st = self.storage
        if not st.contains_index(i):
            raise ExtentError(f"cell {i} outside storage {st}")
        return self.values[tuple(x - l for x, l in zip(i, st.lo))]

    def __setitem__(self, i, v) -> None:
        st = self.storage
        if not st.contains_index(i):
            raise ExtentError(f"cell {i} outside storage {st}")
        self.values[tuple(x - l for x, l in zip(i, st.lo))] = v

    def like(self) -> "Field":
        return Field(self.box, self.ghost, self.h)

    def copy(self) -> "Field":
        return Field(self.box, self.ghost, self.h, self.values.copy(order="F"))


def region_inf_norm(f: Field, r) -> float:
    out = 0.0
    for b in as_region(r):
        v = f.view(b)
        if v.size:
            out = max(out, float(np.max(np.abs(v))))
    return out


def region_axpy(y: Field, a: float, x: Field, r) -> None:
    for b in as_region(r):
        xv = x.view(b)
        y.view(b)[...] += a * xv


def region_copy(dst: Field, src: Field, r) -> None:
    for b in as_region(r):
        dst.view(b)[...] = src.view(b)


def region_fill(dst: Field, value: float, r) -> None:
    for b in as_region(r):
        dst.view(b)[...] = value


def sample(f: Field, fn, r=None) -> None:
    """Evaluate ``fn(x, y, z)`` (vectorized) at the cell centers of ``r``."""
    for b in as_region(f.storage if r is None else r):
        if b.is_empty:
            continue
        axes = [(np.arange(l, h + 1) + 0.5) * f.h for l, h in zip(b.lo, b.hi)]
        x, y, z = np.meshgrid(*axes, indexing="ij")
        f.view(b)[...] = fn(x, y, z)


def boxes_pairwise_disjoint(boxes: Sequence[Box]) -> bool:
    return all(
        intersect(a, b).is_empty for i, a in enumerate(boxes) for b in boxes[i + 1 :]
    )
