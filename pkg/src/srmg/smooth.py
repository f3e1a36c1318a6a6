"""Chebyshev polynomial smoothing and the coarsest-grid solver."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .grid import Box, Field, grow
from .poisson import CENTER, CORNER, EDGE, FACE, fill_bc_ghosts, stencil_apply


class SolverFailure(RuntimeError):
    pass


@dataclass(frozen=True)
class ChebConfig:
    degree: int = 2
    interval: tuple[float, float] = (0.1, 1.1)

    def __post_init__(self):
        if self.degree < 0:
            raise ValueError("degree must be >= 0")
        lo, hi = self.interval
        if not 0 < lo < hi:
            raise ValueError("need 0 < lo_frac < hi_frac")


def spectral_bound(h: float) -> float:
    """Gershgorin bound on the spectrum of -L_h: sum of absolute stencil weights."""
    return (abs(CENTER) + 6 * abs(FACE) + 12 * EDGE + 8 * CORNER) / (h * h)


class OpCounter:
    """Counts operator applications made by the smoothers."""

    def __init__(self):
        self.count = 0


OPS = OpCounter()


def chebyshev(
    us: Sequence[Field],
    fs: Sequence[Field],
    boxes: Sequence[Box],
    cfg: ChebConfig,
    refresh: Callable[[], None],
) -> None:
    """One degree-``cfg.degree`` Chebyshev smoothing of ``L u = f``.

    Works on a set of per-rank fields at once.  ``refresh()`` must bring the
    ghost cells of every ``us[p]`` up to date; it is called once before each
    of the ``degree`` operator applications, so it is the only
    synchronization point.  The iteration targets ``-L`` on
    ``[lo_frac, hi_frac] * spectral_bound(h)``.
    """
    if cfg.degree == 0 or not us:
        return
    h = us[0].h
    lam = spectral_bound(h)
    a, b = cfg.interval[0] * lam, cfg.interval[1] * lam
    theta = 0.5 * (b + a)
    delta = 0.5 * (b - a)
    sigma = theta / delta
    rho = 1.0 / sigma

    def neg_residual(p):
        # s = (-f) - (-L) u = L u - f
        u, bx = us[p], boxes[p]
        s = stencil_apply(u.view(grow(bx, 1)), h)
        s -= fs[p].view(bx)
        return s

    refresh()
    OPS.count += 1
    ds = []
    for p in range(len(us)):
        s = neg_residual(p)
        s *= 1.0 / theta
        ds.append(s)
    for it in range(cfg.degree):
        for p in range(len(us)):
            us[p].view(boxes[p])[...] += ds[p]
        if it == cfg.degree - 1:
            break
        refresh()
        OPS.count += 1
        rho_new = 1.0 / (2.0 * sigma - rho)
        for p in range(len(us)):
            s = neg_residual(p)
            ds[p] *= rho_new * rho
            s *= 2.0 * rho_new / delta
            ds[p] += s
        rho = rho_new


def coarse_solve(
    u: Field,
    f: Field,
    domain: Box,
    rtol: float = 1e-13,
    maxiter: int = 10000,
) -> int:
    """Conjugate gradients on ``-L u = -f`` over ``u.box``; returns iterations used.

    ``u`` must cover the whole (tiny) domain.  Stops once
    ``|f - L u|_inf <= rtol * |f|_inf``.
    """
    box = u.box
    h = u.h
    fnorm = float(np.max(np.abs(f.view(box)))) if box.volume else 0.0
    if fnorm == 0.0:
        u.values[...] = 0.0
        return 0

    def apply_neg(field: Field) -> np.ndarray:
        fill_bc_ghosts(field, domain)
        return -stencil_apply(field.view(grow(box, 1)), h)

    # r = b - A u with A = -L, b = -f
    r = -f.view(box) - apply_neg(u)
    if float(np.max(np.abs(r))) <= rtol * fnorm:
        fill_bc_ghosts(u, domain)
        return 0
    p = u.like()
    p.view(box)[...] = r
    rr = float(np.vdot(r, r))
    for it in range(1, maxiter + 1):
        ap = apply_neg(p)
        alpha = rr / float(np.vdot(p.view(box), ap))
        u.view(box)[...] += alpha * p.view(box)
        r -= alpha * ap
        if float(np.max(np.abs(r))) <= rtol * fnorm:
            fill_bc_ghosts(u, domain)
            return it
        rr_new = float(np.vdot(r, r))
        p.view(box)[...] = r + (rr_new / rr) * p.view(box)
        rr = rr_new
    raise SolverFailure(f"coarse CG did not reach rtol={rtol} in {maxiter} iterations")
