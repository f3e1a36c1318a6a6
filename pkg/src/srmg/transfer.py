"""Inter-grid transfers: 8-child averaging restriction and cell-centered trilinear prolongation."""

from __future__ import annotations

import enum

import numpy as np

from .grid import ExtentError, Field, as_region, prolong_footprint, refine


# fixed child order keeps the averaging bitwise independent of decomposition
_CHILDREN = [
    tuple(slice(o, None, 2) for o in (ox, oy, oz))
    for oz in (0, 1)
    for oy in (0, 1)
    for ox in (0, 1)
]


class TransferKind(enum.Enum):
    RESTRICT_AVG = "restrict_avg"
    PROLONG_TRILINEAR = "prolong_trilinear"


def restrict_avg(fine: Field, coarse: Field, rc) -> None:
    """coarse(I) = mean of the 8 children of I, for every I in ``rc``."""
    for b in as_region(rc):
        if b.is_empty:
            continue
        kids = fine.view(refine(b))
        acc = kids[0::2, 0::2, 0::2] + kids[1::2, 0::2, 0::2]
        for c in _CHILDREN[2:]:
            acc += kids[c]
        acc *= 0.125
        coarse.view(b)[...] = acc


def _interp_axis(a: np.ndarray, axis: int, lo_f: int, hi_f: int, lo_c: int) -> np.ndarray:
    """1D cell-centered linear interpolation along ``axis``.

    ``a`` holds coarse cells starting at coarse index ``lo_c``; returns fine
    cells ``lo_f..hi_f``.  Each fine cell takes 3/4 of its parent and 1/4 of
    the parent's neighbor on the fine cell's side.
    """
    i = np.arange(lo_f, hi_f + 1)
    parent = i // 2
    other = np.where(i % 2 == 0, parent - 1, parent + 1)
    near = np.take(a, parent - lo_c, axis=axis)
    far = np.take(a, other - lo_c, axis=axis)
    near *= 0.75
    near += 0.25 * far
    return near


def prolong_block(coarse: Field, rf_box) -> np.ndarray:
    fp = prolong_footprint(rf_box)
    if not coarse.storage.contains(fp):
        raise ExtentError(f"prolongation footprint {fp} exceeds coarse storage {coarse.storage}")
    a = coarse.view(fp)
    for d in range(3):
        a = _interp_axis(a, d, rf_box.lo[d], rf_box.hi[d], fp.lo[d])
    return a


def prolong_trilinear(coarse: Field, fine: Field, rf, mode: str = "set") -> None:
    """Trilinear interpolation of ``coarse`` onto fine cells of ``rf``.

    ``mode='set'`` overwrites, ``mode='add_correction'`` accumulates.  Coarse
    ghosts covering the footprint must already be filled.
    """
    if mode not in ("set", "add_correction"):
        raise ValueError(f"unknown prolongation mode {mode!r}")
    for b in as_region(rf):
        if b.is_empty:
            continue
        vals = prolong_block(coarse, b)
        if mode == "set":
            fine.view(b)[...] = vals
        else:
            fine.view(b)[...] += vals


def fmg_prolong(coarse: Field, fine: Field, rf) -> None:
    """FMG interpolation; the same linear operator as the V-cycle correction."""
    prolong_trilinear(coarse, fine, rf, mode="set")
