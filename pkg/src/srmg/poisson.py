"""Model problem: 27-point cell-centered Laplacian with homogeneous Dirichlet BCs.

The stencil is the trilinear (Q1) Laplacian, center ``-8/3``, edge ``1/6``,
corner ``1/12`` and face ``0`` (all scaled by ``1/h**2``).  It factors as

    L = D(x) M(y) M(z) + M(x) D(y) M(z) + M(x) M(y) D(z)

with ``D = [1, -2, 1]`` and ``M = [1, 4, 1] / 6``, which is how it is applied.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product

import numpy as np

from .grid import Box, Field, as_region, grow, intersect

CENTER = -8.0 / 3.0
FACE = 0.0
EDGE = 1.0 / 6.0
CORNER = 1.0 / 12.0


@dataclass(frozen=True)
class ProblemSpec:
    """Rectangular domain ``[0, R_1] x [0, R_2] x [0, R_3]`` with u = 0 on the boundary."""

    R: tuple[float, float, float] = (2.0, 1.0, 1.0)
    origin: tuple[float, float, float] = (0.0, 0.0, 0.0)

    def __post_init__(self):
        if any(r <= 0 for r in self.R):
            raise ValueError("domain extents must be positive")

    def exact_u(self, x, y, z):
        return exact_u((x, y, z), self.R)

    def rhs_f(self, x, y, z):
        return rhs_f((x, y, z), self.R)


def stencil_weights(h: float = 1.0) -> np.ndarray:
    """27 weights indexed ``w[ox + 1, oy + 1, oz + 1]``."""
    w = np.empty((3, 3, 3))
    by_count = {0: CENTER, 1: FACE, 2: EDGE, 3: CORNER}
    for o in product((-1, 0, 1), repeat=3):
        w[o[0] + 1, o[1] + 1, o[2] + 1] = by_count[sum(map(abs, o))]
    return w / (h * h)


def _factor(x, R):
    return x**4 - R * R * x * x


def exact_u(x, R=(2.0, 1.0, 1.0)):
    """u = prod_d (x_d^4 - R_d^2 x_d^2)."""
    return _factor(x[0], R[0]) * _factor(x[1], R[1]) * _factor(x[2], R[2])


def rhs_f(x, R=(2.0, 1.0, 1.0)):
    """Analytic Laplacian of :func:`exact_u`."""
    g = [_factor(x[d], R[d]) for d in range(3)]
    dd = [12.0 * x[d] ** 2 - 2.0 * R[d] ** 2 for d in range(3)]
    return dd[0] * g[1] * g[2] + g[0] * dd[1] * g[2] + g[0] * g[1] * dd[2]


def _shifts(n, axis):
    lo = [slice(None)] * 3
    mid = [slice(None)] * 3
    hi = [slice(None)] * 3
    lo[axis], mid[axis], hi[axis] = slice(0, n - 2), slice(1, n - 1), slice(2, n)
    return tuple(lo), tuple(mid), tuple(hi)


def _mass(a, axis):
    lo, mid, hi = _shifts(a.shape[axis], axis)
    out = a[lo] + a[hi]
    out += 4.0 * a[mid]
    out *= 1.0 / 6.0
    return out


def _diff2(a, axis):
    lo, mid, hi = _shifts(a.shape[axis], axis)
    out = a[lo] + a[hi]
    out -= 2.0 * a[mid]
    return out


def stencil_apply(U: np.ndarray, h: float) -> np.ndarray:
    """Apply L to a padded block ``U``; the result is one cell smaller on every side."""
    mx = _mass(U, 0)
    out = _diff2(_mass(mx, 1), 2)
    out += _diff2(_mass(mx, 2), 1)
    out += _diff2(_mass(_mass(U, 2), 1), 0)
    out *= 1.0 / (h * h)
    return out


def apply_operator(u: Field, out: Field, r) -> None:
    """out = L_h u on every cell of ``r``; ghosts of ``u`` must already be set."""
    for b in as_region(r):
        out.view(b)[...] = stencil_apply(u.view(grow(b, 1)), u.h)


def residual(u: Field, f: Field, out: Field, r) -> None:
    """out = f - L_h u on ``r``."""
    for b in as_region(r):
        lu = stencil_apply(u.view(grow(b, 1)), u.h)
        np.subtract(f.view(b), lu, out=out.view(b))


def fill_bc_ghosts(u: Field, domain: Box) -> None:
    """Set storage cells outside ``domain`` by odd reflection across each face.

    Dimensions are processed in order so edge and corner ghosts pick up a sign
    per out-of-domain dimension.  Cells inside the domain are untouched.
    """
    st = u.storage
    v = u.values
    for d in range(3):
        n_lo = domain.lo[d] - st.lo[d]
        for j in range(n_lo):
            ghost = n_lo - 1 - j
            mirror = n_lo + j
            if mirror >= v.shape[d]:
                break
            _slab(v, d, ghost)[...] = -_slab(v, d, mirror)
        n_hi = st.hi[d] - domain.hi[d]
        last = v.shape[d] - 1
        for j in range(n_hi):
            ghost = last - n_hi + 1 + j
            mirror = last - n_hi - j
            if mirror < 0:
                break
            _slab(v, d, ghost)[...] = -_slab(v, d, mirror)


def _slab(v, d, i):
    s = [slice(None)] * 3
    s[d] = i
    return v[tuple(s)]


def error_inf(u: Field, r, problem: ProblemSpec = ProblemSpec()) -> float:
    """max |u - exact_u| over the cell centers of ``r``."""
    out = 0.0
    for b in as_region(r):
        if b.is_empty:
            continue
        axes = [problem.origin[d] + (np.arange(b.lo[d], b.hi[d] + 1) + 0.5) * u.h for d in range(3)]
        x, y, z = np.meshgrid(*axes, indexing="ij")
        out = max(out, float(np.max(np.abs(u.view(b) - problem.exact_u(x, y, z)))))
    return out


def domain_box(shape) -> Box:
    return Box.from_shape(shape)


def interior(b: Box, domain: Box) -> Box:
    """Cells of ``b`` whose whole 27-point footprint lies inside ``domain``."""
    return intersect(b, Box(tuple(l + 1 for l in domain.lo), tuple(h - 1 for h in domain.hi)))
