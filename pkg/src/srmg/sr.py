"""Segmental refinement (SR): buffer schedules, per-rank regions, SR-FMG and SR V-cycle.

Levels k = 1..K above the transition level are processed per rank on the
rank's compute region ``C`` (genuine region ``V`` grown by ``J_k`` buffer
cells).  In-domain ghost cells of ``C`` (``GSR``) are only ever written by
prolongation, so SR levels never exchange ghosts.  The only cross-rank
traffic is the k = 0 -> 1 prolongation, which reads conventional level-0
data from neighboring ranks.
"""

from __future__ import annotations

import csv
import io
import time
from dataclasses import dataclass

import numpy as np

from . import dd
from .dd import CommLedger, LevelHierarchy
from .grid import Box, Field, Region, coarsen, grow, intersect, prolong_footprint, sample, subtract
from .mg import ConventionalSolver, CycleParams, LevelReport, SolveReport
from .poisson import apply_operator, error_inf, fill_bc_ghosts, residual
from .smooth import chebyshev
from .transfer import prolong_trilinear, restrict_avg


class InfeasibleConfig(ValueError):
    """The buffer schedule cannot be realized without extra communication."""


@dataclass(frozen=True)
class SRConfig:
    K: int
    schedule: str = "linear"
    A: int = 2
    B: int = 0
    J1: int = 4
    pN0V: int = 4
    nearest_neighbor: bool = True

    def __post_init__(self):
        if self.K < 1:
            raise ValueError("K must be >= 1")
        if self.schedule not in ("linear", "mbs"):
            raise ValueError(f"unknown schedule {self.schedule!r}")
        if self.A < 0 or self.B < 0:
            raise ValueError("A and B must be non-negative")
        if self.schedule == "mbs" and (self.J1 < 2 or self.J1 % 2):
            raise ValueError("J1 must be an even integer >= 2")

    def label(self) -> str:
        if self.schedule == "mbs":
            return f"mbs(J1={self.J1})"
        return f"linear(A={self.A},B={self.B})"


def buffer_schedule(cfg: SRConfig, k: int) -> int:
    """Buffer width J_k on SR level k (always even)."""
    if not 1 <= k <= cfg.K:
        raise ValueError(f"level {k} outside 1..{cfg.K}")
    if cfg.schedule == "mbs":
        return cfg.J1 * 2 ** (k - 1)
    return 2 * ((cfg.A + cfg.B * (cfg.K - k)) // 2)


@dataclass(frozen=True)
class SRRegions:
    """Regions of one rank on one SR level.

    ``F`` is the support of level k+1's compute region on this level
    (empty on the finest level).
    """

    V: Box
    C: Box
    G: Region
    GBC: Region
    GSR: Region
    F: Box

    @property
    def prolong_range(self) -> Box:
        """C plus its in-domain ghost layer (C u GSR) as a single box."""
        return self._range

    @property
    def unsupported(self) -> Region:
        """C \\ F: cells whose coarse equation carries no fine residual."""
        return subtract(self.C, self.F)


def _regions(V: Box, J: int, domain: Box, F: Box) -> SRRegions:
    C = intersect(grow(V, J), domain)
    G = subtract(grow(C, 1), C)
    GBC = Region([x for b in G for x in subtract(b, domain)])
    GSR = G.intersect(domain)
    reg = SRRegions(V, C, G, GBC, GSR, F)
    object.__setattr__(reg, "_range", intersect(grow(C, 1), domain))
    return reg


def compute_regions(hierarchy: LevelHierarchy, cfg: SRConfig) -> dict[tuple[int, int], SRRegions]:
    """Regions keyed by (k, rank) for k = 1..K.

    Raises :class:`InfeasibleConfig` when a level's prolongation footprint or
    restriction support leaves the coarser level's storage, or (with
    ``nearest_neighbor``) when a buffer is wider than a rank's genuine extent.
    """
    if hierarchy.K != cfg.K:
        raise InfeasibleConfig(f"hierarchy has {hierarchy.K} SR levels, config wants {cfg.K}")
    lev0 = hierarchy.at(0)
    Cs: dict[tuple[int, int], Box] = {}
    Vs: dict[tuple[int, int], Box] = {}
    for k in range(1, cfg.K + 1):
        lev = hierarchy.at(k)
        J = buffer_schedule(cfg, k)
        for r, V0 in lev0.owners.items():
            V = Box(tuple(x * 2**k for x in V0.lo), tuple((x + 1) * 2**k - 1 for x in V0.hi))
            if cfg.nearest_neighbor and J > min(V.shape):
                raise InfeasibleConfig(f"J_{k}={J} exceeds the genuine extent {min(V.shape)}")
            Vs[(k, r)] = V
            Cs[(k, r)] = intersect(grow(V, J), lev.domain)
    out = {}
    for k in range(1, cfg.K + 1):
        lev = hierarchy.at(k)
        J = buffer_schedule(cfg, k)
        for r in lev0.owners:
            C = Cs[(k, r)]
            if k < cfg.K:
                F = coarsen(Cs[(k + 1, r)])
                if not C.contains(F):
                    raise InfeasibleConfig(f"level {k + 1} compute region is not supported by level {k}")
            else:
                F = Box.empty()
            reg = _regions(Vs[(k, r)], J, lev.domain, F)
            assert reg.C == C
            if k >= 2 and not grow(Cs[(k - 1, r)], 1).contains(prolong_footprint(reg.prolong_range)):
                raise InfeasibleConfig(f"level {k} prolongation reads outside level {k - 1} storage")
            out[(k, r)] = reg
    return out


class SRSolver:
    """Segmental refinement FAS-FMG on top of a conventional solver for k <= 0."""

    def __init__(self, hierarchy: LevelHierarchy, cfg: SRConfig, params: CycleParams | None = None,
                 ledger: CommLedger | None = None):
        self.hier = hierarchy
        self.cfg = cfg
        self.params = params or CycleParams()
        self.regions = compute_regions(hierarchy, cfg)
        self.conv = ConventionalSolver(hierarchy, self.params, ledger, top=hierarchy.transition)
        self.ledger = self.conv.ledger
        self.ranks = list(hierarchy.at(0).owners)
        self.u: dict[int, dict[int, Field]] = {}
        self.f: dict[int, dict[int, Field]] = {}
        self.rhs: dict[int, dict[int, Field]] = {}
        self.res: dict[int, dict[int, Field]] = {}
        self.t: dict[int, dict[int, Field]] = {}
        self.visits: dict[int, int] = {}
        prob = hierarchy.problem
        for k in range(1, cfg.K + 1):
            h = hierarchy.at(k).h
            for name in ("u", "f", "rhs", "res", "t"):
                getattr(self, name)[k] = {r: Field(self.regions[(k, r)].C, 1, h) for r in self.ranks}
            for r in self.ranks:
                sample(self.f[k][r], prob.rhs_f, self.regions[(k, r)].C)

    @property
    def T(self) -> int:
        return self.hier.transition

    def domain(self, k) -> Box:
        return self.hier.at(k).domain

    def refresh(self, k) -> None:
        """Boundary-condition ghosts only; GSR ghosts stay frozen."""
        dom = self.domain(k)
        for r in self.ranks:
            fill_bc_ghosts(self.u[k][r], dom)

    def smooth(self, k, degree, rhs) -> None:
        chebyshev(
            [self.u[k][r] for r in self.ranks],
            [rhs[r] for r in self.ranks],
            [self.regions[(k, r)].C for r in self.ranks],
            self.params.cheb(degree),
            lambda: self.refresh(k),
        )

    # -- level transitions ---------------------------------------------------

    def prolong_from_transition(self, src, mode, kind, visit=None) -> None:
        """Level 0 (distributed) -> level 1 onto C u GSR; reads neighbor data."""
        lev0 = self.hier.at(0)
        moves = []
        for r in self.ranks:
            rng = self.regions[(1, r)].prolong_range
            tmp, sources = dd.gather_box(lev0, src, prolong_footprint(rng))
            prolong_trilinear(tmp, self.u[1][r], rng, mode)
            moves.extend((q, r, n) for q, n in sources.items())
        self.ledger.record(1, dd.VERTICAL, kind, moves, visit)

    def prolong_local(self, k, src, mode, kind, visit=None) -> None:
        """Level k-1 -> k on each rank's own storage (k >= 2)."""
        for r in self.ranks:
            rng = self.regions[(k, r)].prolong_range
            prolong_trilinear(src[r], self.u[k][r], rng, mode)
        self.ledger.record(k, dd.VERTICAL, kind, [(r, r, 0) for r in self.ranks], visit)

    # -- cycles ---------------------------------------------------------------

    def vcycle(self, k, rhs) -> None:
        """SR FAS V-cycle at level k >= 1 with right-hand side ``rhs``."""
        self.visits[k] = self.visits.get(k, 0) + 1
        p = self.params
        self.smooth(k, p.nu1, rhs)
        self.refresh(k)
        for r in self.ranks:
            residual(self.u[k][r], rhs[r], self.res[k][r], self.regions[(k, r)].C)
        if k == 1:
            self._descend_to_transition()
        else:
            self._descend_local(k)
        self.smooth(k, p.nu2, rhs)

    def _descend_to_transition(self) -> None:
        conv, T = self.conv, self.T
        lev1 = self.hier.at(1)
        lev0 = self.hier.at(0)
        for r in self.ranks:
            V0 = lev0.owners[r]
            if self.params.restrict_solution:
                restrict_avg(self.u[1][r], conv.u[T][r], V0)
            else:
                conv.u[T][r].values[...] = 0.0
            restrict_avg(self.res[1][r], conv.res[T][r], V0)
        self.ledger.record(1, dd.VERTICAL, "restrict", [(r, r, 0) for r in self.ranks], 1)
        conv.snapshot(T)
        conv.tau_rhs(T, visit=lev1.k)
        conv.vcycle(T, conv.rhs[T])
        conv.correction(T)
        self.prolong_from_transition(conv.t[T], "add_correction", "prolong", 1)

    def _descend_local(self, k) -> None:
        kc = k - 1
        dom_c = self.domain(kc)
        for r in self.ranks:
            F = self.regions[(kc, r)].F
            Cc = self.regions[(kc, r)].C
            uc, tc, rc = self.u[kc][r], self.t[kc][r], self.rhs[kc][r]
            if self.params.restrict_solution:
                restrict_avg(self.u[k][r], uc, F)
            else:
                uc.values[...] = 0.0
            tc.values[...] = uc.values
            fill_bc_ghosts(uc, dom_c)
            apply_operator(uc, rc, Cc)
            tmp = self.res[kc][r]
            restrict_avg(self.res[k][r], tmp, F)
            rc.view(F)[...] += tmp.view(F)
        self.ledger.record(k, dd.VERTICAL, "restrict", [(r, r, 0) for r in self.ranks], k)
        self.vcycle(kc, self.rhs[kc])
        for r in self.ranks:
            c = self.t[kc][r]
            np.subtract(self.u[kc][r].values, c.values, out=c.values)
            fill_bc_ghosts(c, dom_c)
        self.prolong_local(k, self.t[kc], "add_correction", "prolong", k)

    def fmg(self) -> SolveReport:
        t0 = time.perf_counter()
        n0 = len(self.ledger.records)
        report = self.conv.fmg()
        for k in range(1, self.cfg.K + 1):
            if k == 1:
                self.prolong_from_transition(self.conv.u[self.T], "set", "fmg_prolong")
            else:
                self.refresh(k - 1)
                self.prolong_local(k, self.u[k - 1], "set", "fmg_prolong")
            self.smooth(k, self.params.alpha, self.f[k])
            for _ in range(self.params.n_vcycles):
                self.vcycle(k, self.f[k])
            report.levels.append(self.level_report(k))
        recs = self.ledger.records[n0:]
        report.phases = len(recs)
        report.messages = sum(r.messages for r in recs)
        report.visits = {**self.conv.visits, **self.visits}
        report.wall_time = time.perf_counter() - t0
        return report

    def extra_vcycle(self) -> float:
        """One more SR V-cycle on the finest level; returns the new genuine-region error."""
        self.vcycle(self.cfg.K, self.f[self.cfg.K])
        return self.error_inf(self.cfg.K)

    # -- diagnostics ------------------------------------------------------------

    def error_inf(self, k) -> float:
        return max(error_inf(self.u[k][r], self.regions[(k, r)].V, self.hier.problem) for r in self.ranks)

    def residual_inf(self, k) -> float:
        self.refresh(k)
        out = 0.0
        for r in self.ranks:
            V = self.regions[(k, r)].V
            tmp = self.u[k][r].like()
            residual(self.u[k][r], self.f[k][r], tmp, V)
            out = max(out, float(np.max(np.abs(tmp.view(V)))))
        return out

    def level_report(self, k) -> LevelReport:
        lev = self.hier.at(k)
        return LevelReport(k, lev.shape, lev.h, self.error_inf(k), self.residual_inf(k))

    def gather_solution(self, k=None) -> np.ndarray:
        k = self.cfg.K if k is None else k
        lev = self.hier.at(k)
        out = np.zeros(lev.shape, order="F")
        for r in self.ranks:
            V = self.regions[(k, r)].V
            out[tuple(slice(l, h + 1) for l, h in zip(V.lo, V.hi))] = self.u[k][r].view(V)
        return out


def fasfmgsr(hierarchy: LevelHierarchy, cfg: SRConfig, params: CycleParams | None = None,
             ledger: CommLedger | None = None) -> SolveReport:
    return SRSolver(hierarchy, cfg, params, ledger).fmg()


def error_ratio(sr_report: SolveReport, conv_report: SolveReport) -> float:
    """e_SR / e_conv on the finest grid."""
    if sr_report.levels[-1].shape != conv_report.levels[-1].shape:
        raise ValueError("reports are for different fine grids")
    return sr_report.error_inf / conv_report.error_inf


def acceptable(e_r: float, tol: float = 1.1) -> bool:
    return e_r <= tol


@dataclass
class SweepRow:
    A: int
    B: int
    K: int
    pN0V: int
    schedule: str
    e_sr: float | None
    e_conv: float
    horiz_msgs_fine: int | None
    vert_msgs_fine: int | None

    @property
    def e_r(self) -> float | None:
        return None if self.e_sr is None else self.e_sr / self.e_conv


SWEEP_COLUMNS = ["A", "B", "K", "pN0V", "schedule", "e_sr", "e_conv", "e_r", "horiz_msgs_fine", "vert_msgs_fine"]


def run_sr_case(hierarchy: LevelHierarchy, cfg: SRConfig, e_conv: float,
                params: CycleParams | None = None) -> SweepRow:
    """One SR solve; infeasible schedules give a row with ``e_sr=None`` (NA)."""
    A, B = (cfg.A, cfg.B) if cfg.schedule == "linear" else (cfg.J1, 0)
    try:
        solver = SRSolver(hierarchy, cfg, params)
    except InfeasibleConfig:
        return SweepRow(A, B, cfg.K, cfg.pN0V, cfg.schedule, None, e_conv, None, None)
    rep = solver.fmg()
    fine = range(1, cfg.K + 1)
    led = solver.ledger
    return SweepRow(A, B, cfg.K, cfg.pN0V, cfg.schedule, rep.error_inf, e_conv,
                    led.messages(direction=dd.HORIZONTAL, levels=fine),
                    led.messages(direction=dd.VERTICAL, levels=fine))


def sweep_csv(rows: list[SweepRow], header: dict | None = None) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    if header:
        w.writerow(["# " + " ".join(f"{k}={v}" for k, v in header.items())])
    w.writerow(SWEEP_COLUMNS)
    for row in rows:
        def fmt(x):
            return "NA" if x is None else (f"{x:.6e}" if isinstance(x, float) else str(x))
        w.writerow([row.A, row.B, row.K, row.pN0V, row.schedule, fmt(row.e_sr), fmt(row.e_conv),
                    fmt(row.e_r), fmt(row.horiz_msgs_fine), fmt(row.vert_msgs_fine)])
    return buf.getvalue()
