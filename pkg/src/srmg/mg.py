"""Conventional distributed FAS multigrid: V-cycle, full multigrid, solve reports."""

from __future__ import annotations

import csv
import io
import time
from collections import defaultdict
from dataclasses import dataclass, field

import numpy as np

from . import dd
from .dd import CommLedger, LevelHierarchy
from .grid import region_inf_norm, sample
from .poisson import apply_operator, error_inf, residual
from .smooth import ChebConfig, chebyshev, coarse_solve


@dataclass(frozen=True)
class CycleParams:
    """F(alpha, nu1, nu2) cycle: smoother degrees before each FMG V-cycle, pre and post."""

    alpha: int = 1
    nu1: int = 2
    nu2: int = 2
    n_vcycles: int = 1
    interval: tuple[float, float] = (0.1, 1.1)
    restrict_solution: bool = True

    def __post_init__(self):
        if min(self.alpha, self.nu1, self.nu2, self.n_vcycles) < 0:
            raise ValueError("cycle parameters must be non-negative")

    def cheb(self, degree: int) -> ChebConfig:
        return ChebConfig(degree, self.interval)


@dataclass
class LevelReport:
    k: int
    shape: tuple[int, int, int]
    h: float
    error_inf: float
    residual_inf: float


@dataclass
class SolveReport:
    levels: list[LevelReport] = field(default_factory=list)
    phases: int = 0
    messages: int = 0
    wall_time: float = 0.0
    visits: dict[int, int] = field(default_factory=dict)

    @property
    def error_inf(self) -> float:
        return self.levels[-1].error_inf

    @property
    def residual_inf(self) -> float:
        return self.levels[-1].residual_inf

    def by_shape(self, shape) -> LevelReport:
        for lr in self.levels:
            if lr.shape == tuple(shape):
                return lr
        raise KeyError(shape)

    def to_csv(self, header: dict | None = None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        if header:
            w.writerow(["# " + " ".join(f"{k}={v}" for k, v in header.items())])
        w.writerow(["level", "N", "error_inf", "residual_inf"])
        for lr in self.levels:
            w.writerow([lr.k, "x".join(map(str, lr.shape)), f"{lr.error_inf:.9e}", f"{lr.residual_inf:.9e}"])
        return buf.getvalue()


def gamma_of_r(r: float) -> float:
    """V-cycle error reduction needed for FMG to keep algebraic/discretization error ratio r."""
    if r <= 0:
        raise ValueError("r must be positive")
    return r / (4.0 * r + 3.0)


class ConventionalSolver:
    """Halo-exchange FAS multigrid over simulated ranks.

    Levels are addressed by global index ``g`` (0 = coarsest).  ``top``
    restricts the solver to levels ``0..top``; the segmental refinement
    solver uses it to run the conventional part up to the transition level.
    """

    def __init__(self, hierarchy: LevelHierarchy, params: CycleParams | None = None,
                 ledger: CommLedger | None = None, top: int | None = None):
        self.hier = hierarchy
        self.params = params or CycleParams()
        self.ledger = ledger if ledger is not None else CommLedger()
        self.top = hierarchy.M if top is None else top
        self.visits: dict[int, int] = defaultdict(int)  # keyed by level index k
        levels = hierarchy.levels[: self.top + 1]
        self.u = [lev.new_field() for lev in levels]
        self.f = [lev.new_field() for lev in levels]
        self.rhs = [lev.new_field() for lev in levels]
        self.res = [lev.new_field() for lev in levels]
        self.t = [lev.new_field() for lev in levels]
        prob = hierarchy.problem
        for lev, fd in zip(levels, self.f):
            for r, fld in fd.items():
                sample(fld, prob.rhs_f, lev.owners[r])

    # -- building blocks ---------------------------------------------------

    def level(self, g):
        return self.hier.levels[g]

    def exchange(self, g, dfs, kind, visit=None):
        dd.exchange_ghosts(self.level(g), dfs, self.ledger, kind, visit)

    def smooth(self, g, degree, rhs, kind="smooth"):
        lev = self.level(g)
        ranks = lev.ranks
        chebyshev(
            [self.u[g][r] for r in ranks],
            [rhs[r] for r in ranks],
            [lev.owners[r] for r in ranks],
            self.params.cheb(degree),
            lambda: self.exchange(g, [self.u[g]], kind),
        )

    def compute_residual(self, g, rhs, kind="residual"):
        lev = self.level(g)
        self.exchange(g, [self.u[g]], kind)
        for r, b in lev.owners.items():
            residual(self.u[g][r], rhs[r], self.res[g][r], b)

    def coarse(self, rhs):
        lev = self.level(0)
        (r,) = lev.ranks
        coarse_solve(self.u[0][r], rhs[r], lev.domain)

    def tau_rhs(self, g, visit):
        """rhs[g] = res[g] + L u[g] on owned cells (FAS coarse right-hand side)."""
        lev = self.level(g)
        self.exchange(g, [self.u[g]], "tau", visit)
        for r, b in lev.owners.items():
            apply_operator(self.u[g][r], self.rhs[g][r], b)
            self.rhs[g][r].view(b)[...] += self.res[g][r].view(b)

    def snapshot(self, g):
        for r, b in self.level(g).owners.items():
            self.t[g][r].view(b)[...] = self.u[g][r].view(b)

    def correction(self, g):
        """t[g] <- u[g] - t[g] on owned cells."""
        for r, b in self.level(g).owners.items():
            np.subtract(self.u[g][r].view(b), self.t[g][r].view(b), out=self.t[g][r].view(b))

    # -- cycles -------------------------------------------------------------

    def vcycle(self, g, rhs=None):
        """FAS V-cycle from level ``g`` with right-hand side ``rhs`` (default: f)."""
        rhs = self.f[g] if rhs is None else rhs
        self.visits[self.level(g).k] += 1
        if g == 0:
            self.coarse(rhs)
            return
        p = self.params
        lev, levc = self.level(g), self.level(g - 1)
        self.smooth(g, p.nu1, rhs)
        self.compute_residual(g, rhs)
        if p.restrict_solution:
            dd.restrict_down(lev, levc, [(self.u[g], self.u[g - 1]), (self.res[g], self.res[g - 1])],
                             self.ledger, lev.k)
        else:
            dd.restrict_down(lev, levc, [(self.res[g], self.res[g - 1])], self.ledger, lev.k)
            for fld in self.u[g - 1].values():
                fld.values[...] = 0.0
        self.snapshot(g - 1)
        self.tau_rhs(g - 1, visit=lev.k)
        self.vcycle(g - 1, self.rhs[g - 1])
        self.correction(g - 1)
        dd.prolong_up(levc, lev, self.t[g - 1], self.u[g], "add_correction", self.ledger, "prolong", lev.k)
        self.smooth(g, p.nu2, rhs)

    def fmg(self) -> SolveReport:
        t0 = time.perf_counter()
        n0 = len(self.ledger.records)
        for df in self.u:
            for fld in df.values():
                fld.values[...] = 0.0
        report = SolveReport()
        self.vcycle(0, self.f[0])
        report.levels.append(self.level_report(0))
        for g in range(1, self.top + 1):
            self.fmg_step(g)
            report.levels.append(self.level_report(g))
        return self._finish(report, t0, n0)

    def fmg_start(self, g):
        """FMG interpolation onto level g followed by the alpha pre-V-cycle smoothing."""
        dd.prolong_up(self.level(g - 1), self.level(g), self.u[g - 1], self.u[g], "set", self.ledger, "fmg_prolong")
        self.smooth(g, self.params.alpha, self.f[g], kind="fmg_smooth")

    def fmg_step(self, g):
        self.fmg_start(g)
        for _ in range(self.params.n_vcycles):
            self.vcycle(g, self.f[g])

    def vcycle_solve(self, rtol: float = 1e-4, maxit: int = 100) -> SolveReport:
        """Iterate V-cycles from u = 0 until |r|_inf <= rtol |f|_inf on the top level."""
        t0 = time.perf_counter()
        n0 = len(self.ledger.records)
        g = self.top
        for fld in self.u[g].values():
            fld.values[...] = 0.0
        fnorm = max(region_inf_norm(self.f[g][r], b) for r, b in self.level(g).owners.items())
        report = SolveReport()
        for _ in range(maxit):
            self.vcycle(g, self.f[g])
            lr = self.level_report(g)
            report.levels.append(lr)
            if lr.residual_inf <= rtol * fnorm:
                break
        return self._finish(report, t0, n0)

    def _finish(self, report, t0, n0):
        recs = self.ledger.records[n0:]
        report.phases = len(recs)
        report.messages = sum(r.messages for r in recs)
        report.visits = dict(self.visits)
        report.wall_time = time.perf_counter() - t0
        return report

    # -- diagnostics (never recorded in the ledger) -------------------------

    def residual_inf(self, g, rhs=None) -> float:
        rhs = self.f[g] if rhs is None else rhs
        lev = self.level(g)
        with self.ledger.paused():
            dd.exchange_ghosts(lev, [self.u[g]], None)
        out = 0.0
        for r, b in lev.owners.items():
            tmp = self.u[g][r].like()
            residual(self.u[g][r], rhs[r], tmp, b)
            out = max(out, region_inf_norm(tmp, b))
        return out

    def error_inf(self, g) -> float:
        lev = self.level(g)
        return max(error_inf(self.u[g][r], b, self.hier.problem) for r, b in lev.owners.items())

    def level_report(self, g) -> LevelReport:
        lev = self.level(g)
        return LevelReport(lev.k, lev.shape, lev.h, self.error_inf(g), self.residual_inf(g))

    def gather_solution(self, g=None) -> np.ndarray:
        """Global array of u on level ``g`` (default: top)."""
        g = self.top if g is None else g
        lev = self.level(g)
        out = np.zeros(lev.shape, order="F")
        for r, b in lev.owners.items():
            out[tuple(slice(l, h + 1) for l, h in zip(b.lo, b.hi))] = self.u[g][r].view(b)
        return out


def fas_vcycle(solver: ConventionalSolver, g: int | None = None, rhs=None) -> None:
    solver.vcycle(solver.top if g is None else g, rhs)


def fmg(hierarchy: LevelHierarchy, params: CycleParams | None = None,
        ledger: CommLedger | None = None) -> SolveReport:
    return ConventionalSolver(hierarchy, params, ledger).fmg()


def discrete_solution(hierarchy: LevelHierarchy, g: int, params: CycleParams | None = None,
                      cycles: int = 40) -> np.ndarray:
    """Level-g discrete solution, by iterating V-cycles far past convergence."""
    s = ConventionalSolver(hierarchy, params, top=g)
    for _ in range(cycles):
        s.vcycle(g)
    return s.gather_solution(g)


def fmg_contraction(hierarchy: LevelHierarchy, params: CycleParams | None = None) -> dict[int, float]:
    """Error reduction of the V-cycle(s) on each FMG level, keyed by level index k.

    Measured against the discrete solution of that level, from the state left
    by FMG interpolation and the alpha smoothing.
    """
    s = ConventionalSolver(hierarchy, params)
    s.vcycle(0, s.f[0])
    out = {}
    for g in range(1, s.top + 1):
        ref = discrete_solution(hierarchy, g, params)
        s.fmg_start(g)
        before = float(np.max(np.abs(s.gather_solution(g) - ref)))
        for _ in range(s.params.n_vcycles):
            s.vcycle(g, s.f[g])
        after = float(np.max(np.abs(s.gather_solution(g) - ref)))
        out[s.level(g).k] = after / before
    return out


def asymptotic_contraction(hierarchy: LevelHierarchy, params: CycleParams | None = None,
                           cycles: int = 30, seed: int = 0) -> float:
    """Late-cycle error reduction of V-cycles on the homogeneous problem from random data."""
    s = ConventionalSolver(hierarchy, params)
    g = s.top
    for df in s.f:
        for fld in df.values():
            fld.values[...] = 0.0
    rng = np.random.default_rng(seed)
    for r, b in s.level(g).owners.items():
        s.u[g][r].view(b)[...] = rng.standard_normal(b.shape)
    prev = float(np.max(np.abs(s.gather_solution(g))))
    rate = 0.0
    for _ in range(cycles):
        s.vcycle(g)
        cur = float(np.max(np.abs(s.gather_solution(g))))
        rate, prev = cur / prev, cur
    return rate
