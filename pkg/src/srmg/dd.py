"""Simulated-rank domain decomposition with an instrumented communication ledger.

Ranks live in one process.  A "message" is an accounted copy between two
distinct ranks; a "phase" is one bulk-synchronous step (a barrier).
"""

from __future__ import annotations

import csv
import io
from collections import defaultdict
from contextlib import contextmanager
from dataclasses import dataclass, field
from typing import Iterable

from .grid import Box, Field, GridError, coarsen, grow, intersect, prolong_footprint
from .poisson import ProblemSpec, fill_bc_ghosts

HORIZONTAL = "horizontal"
VERTICAL = "vertical"
NEAR = "near"
FAR = "far"


class ConfigError(ValueError):
    """Raised for decompositions that do not divide evenly."""


def _is_pow2(n: int) -> bool:
    return n >= 1 and n & (n - 1) == 0


@dataclass(frozen=True)
class ProcessGrid:
    P: tuple[int, int, int] = (4, 2, 2)

    def __post_init__(self):
        P = tuple(int(p) for p in self.P)
        if len(P) != 3 or any(p < 1 for p in P):
            raise ConfigError(f"bad process grid {self.P}")
        object.__setattr__(self, "P", P)

    @property
    def size(self) -> int:
        return self.P[0] * self.P[1] * self.P[2]

    def coords(self, rank: int) -> tuple[int, int, int]:
        px, py, _ = self.P
        return (rank % px, (rank // px) % py, rank // (px * py))

    def rank(self, c) -> int:
        px, py, _ = self.P
        return c[0] + px * (c[1] + py * c[2])


@dataclass
class MemoryPartition:
    """Assigns ranks to memory partitions for near/far classification.

    On SR/fine levels (k >= 1) each block of ``ranks_per_partition``
    consecutive ranks forms a partition; on k <= 0 all ranks share one.
    """

    ranks_per_partition: int = 1

    def partition(self, k: int, rank: int) -> int:
        if k <= 0:
            return 0
        return rank // self.ranks_per_partition

    def distance(self, k: int, a: int, b: int) -> str:
        return NEAR if self.partition(k, a) == self.partition(k, b) else FAR

    def default_distance(self, k: int) -> str:
        return FAR if k >= 1 and self.ranks_per_partition == 1 else NEAR


@dataclass
class Level:
    g: int
    k: int
    domain: Box
    h: float
    active: tuple[int, int, int]
    owners: dict[int, Box]
    neighbors: dict[int, list[int]] = field(default_factory=dict)

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.domain.shape

    @property
    def ranks(self) -> list[int]:
        return list(self.owners)

    def owner_of(self, b: Box) -> int:
        """The single rank owning all of ``b``."""
        for r, ob in self.owners.items():
            if ob.contains(b):
                return r
        raise GridError(f"{b} is not owned by a single rank on level {self.k}")

    def new_field(self, ghost: int = 1) -> dict[int, Field]:
        return {r: Field(b, ghost, self.h) for r, b in self.owners.items()}


@dataclass
class LevelHierarchy:
    pgrid: ProcessGrid
    levels: list[Level]
    transition: int
    problem: ProblemSpec = ProblemSpec()

    @property
    def finest(self) -> Level:
        return self.levels[-1]

    @property
    def coarsest(self) -> Level:
        return self.levels[0]

    @property
    def M(self) -> int:
        return len(self.levels) - 1

    @property
    def K(self) -> int:
        return len(self.levels) - 1 - self.transition

    def at(self, k: int) -> Level:
        """Level by index relative to the transition level."""
        return self.levels[self.transition + k]


def _level(pgrid: ProcessGrid, g: int, k: int, shape, h: float) -> Level:
    active = []
    for p, n in zip(pgrid.P, shape):
        a = max(1, min(p, n // 2))
        if n % a:
            raise ConfigError(f"{n} cells do not split over {a} ranks")
        active.append(a)
    stride = tuple(p // a for p, a in zip(pgrid.P, active))
    ext = tuple(n // a for n, a in zip(shape, active))
    owners = {}
    for r in range(pgrid.size):
        c = pgrid.coords(r)
        if any(ci % s for ci, s in zip(c, stride)):
            continue
        blk = tuple(ci // s for ci, s in zip(c, stride))
        lo = tuple(bi * e for bi, e in zip(blk, ext))
        owners[r] = Box.from_shape(ext, lo)
    lev = Level(g, k, Box.from_shape(shape), h, tuple(active), owners)
    for r, b in owners.items():
        gb = grow(b, 1)
        lev.neighbors[r] = [q for q, ob in owners.items() if q != r and not intersect(gb, ob).is_empty]
    return lev


def hierarchy_from_fine_shape(
    fine_shape,
    P=(1, 1, 1),
    K: int = 0,
    problem: ProblemSpec = ProblemSpec(),
) -> LevelHierarchy:
    """Hierarchy halving ``fine_shape`` down to the coarsest grid.

    The transition level (k = 0) sits ``K`` levels below the finest.
    """
    pgrid = ProcessGrid(tuple(P))
    for p in pgrid.P:
        if not _is_pow2(p):
            raise ConfigError(f"process grid extents must be powers of 2, got {pgrid.P}")
    shape = tuple(int(n) for n in fine_shape)
    hs = {problem.R[d] / shape[d] for d in range(3)}
    if max(hs) - min(hs) > 1e-12 * max(hs):
        raise ConfigError(f"grid {shape} is not isotropic on domain {problem.R}")
    shapes = [shape]
    while all(n % 2 == 0 for n in shapes[-1]):
        shapes.append(tuple(n // 2 for n in shapes[-1]))
    shapes.reverse()
    n = len(shapes)
    if K > n - 1:
        raise ConfigError(f"K={K} exceeds the {n - 1} available refinements")
    T = n - 1 - K
    h0 = problem.R[0] / shapes[0][0]
    levels = [_level(pgrid, g, g - T, s, h0 / 2**g) for g, s in enumerate(shapes)]
    return LevelHierarchy(pgrid, levels, T, problem)


def build_hierarchy(
    P=(4, 2, 2),
    pN0V: int = 4,
    K: int = 2,
    problem: ProblemSpec = ProblemSpec(),
) -> LevelHierarchy:
    """Transition level has per-rank cubes of edge ``pN0V``; ``K`` fine levels above it."""
    if not isinstance(pN0V, int) or pN0V < 2 or not _is_pow2(pN0V):
        raise ConfigError(f"pN0V must be a power of 2 >= 2, got {pN0V}")
    if K < 0:
        raise ConfigError("K must be >= 0")
    pgrid = ProcessGrid(tuple(P))
    fine = tuple(p * pN0V * 2**K for p in pgrid.P)
    h = hierarchy_from_fine_shape(fine, pgrid.P, K, problem)
    T = h.levels[h.transition]
    if T.active != pgrid.P:
        raise ConfigError("transition level must use every rank")
    return h


# ----------------------------------------------------------------------------
# communication ledger


@dataclass
class PhaseRecord:
    level: int
    direction: str
    kind: str
    visit: int
    distance: str
    messages: int
    near_messages: int
    far_messages: int
    cells: int
    per_rank: dict[int, int]


class CommLedger:
    """Append-only record of communication phases."""

    def __init__(self, partition: MemoryPartition | None = None):
        self.partition = partition or MemoryPartition()
        self.records: list[PhaseRecord] = []
        self._paused = 0

    def reset(self) -> None:
        self.records.clear()

    @contextmanager
    def paused(self):
        self._paused += 1
        try:
            yield
        finally:
            self._paused -= 1

    def record(self, k: int, direction: str, kind: str, pairs: Iterable[tuple[int, int, int]], visit=None):
        """Record one phase.  ``pairs`` are (src, dst, cells) copies; same-rank pairs are free."""
        if self._paused:
            return
        near = far = cells = 0
        per_rank: dict[int, int] = defaultdict(int)
        for src, dst, n in pairs:
            if src == dst:
                continue
            cells += n
            per_rank[dst] += 1
            if self.partition.distance(k, src, dst) == NEAR:
                near += 1
            else:
                far += 1
        if direction == VERTICAL and k >= 1:
            dist = FAR
        elif near + far == 0:
            dist = self.partition.default_distance(k)
        else:
            dist = FAR if far else NEAR
        self.records.append(
            PhaseRecord(k, direction, kind, k if visit is None else visit, dist,
                        near + far, near, far, cells, dict(per_rank))
        )

    def counters(self) -> dict[tuple[int, str, str], dict[str, int]]:
        out: dict = defaultdict(lambda: {"phases": 0, "messages": 0, "cells": 0})
        for r in self.records:
            out[(r.level, r.direction, r.distance)]["phases"] += 1
            if r.near_messages:
                out[(r.level, r.direction, NEAR)]["messages"] += r.near_messages
            if r.far_messages:
                out[(r.level, r.direction, FAR)]["messages"] += r.far_messages
            out[(r.level, r.direction, r.distance)]["cells"] += r.cells
        return dict(out)

    def phases(self, level=None, direction=None, levels=None) -> int:
        return sum(1 for r in self._select(level, direction, levels))

    def messages(self, level=None, direction=None, levels=None) -> int:
        return sum(r.messages for r in self._select(level, direction, levels))

    def rank_messages(self, rank: int, level=None, direction=None, visit=None) -> int:
        return sum(
            r.per_rank.get(rank, 0)
            for r in self._select(level, direction, None)
            if visit is None or r.visit == visit
        )

    def _select(self, level, direction, levels):
        for r in self.records:
            if level is not None and r.level != level:
                continue
            if levels is not None and r.level not in levels:
                continue
            if direction is not None and r.direction != direction:
                continue
            yield r

    def to_csv(self, header: dict | None = None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        if header:
            w.writerow(["# " + " ".join(f"{k}={v}" for k, v in header.items())])
        w.writerow(["level", "direction", "distance", "phases", "messages", "cells"])
        counters = self.counters()
        for key in sorted(counters):
            c = counters[key]
            w.writerow([*key, c["phases"], c["messages"], c["cells"]])
        return buf.getvalue()


# ----------------------------------------------------------------------------
# data movement


def exchange_ghosts(
    level: Level,
    fields: Iterable[dict[int, Field]],
    ledger: CommLedger | None,
    kind: str = "exchange",
    visit: int | None = None,
) -> None:
    """Refresh the 1-deep process ghosts of every field, then the BC ghosts.

    All fields in ``fields`` travel in one phase (one message per neighbor pair).
    """
    pairs: dict[tuple[int, int], int] = {}
    for df in fields:
        for p, fp in df.items():
            st = fp.storage
            for q in level.neighbors[p]:
                ov = intersect(st, level.owners[q])
                fp.view(ov)[...] = df[q].view(ov)
                pairs[(q, p)] = pairs.get((q, p), 0) + ov.volume
        for fp in df.values():
            fill_bc_ghosts(fp, level.domain)
    if ledger is not None:
        ledger.record(level.k, HORIZONTAL, kind, [(q, p, n) for (q, p), n in pairs.items()], visit)


def gather_box(level: Level, df: dict[int, Field], target: Box, ghost: int = 0):
    """Assemble ``df`` over ``grow(target, ghost)`` from the owning ranks.

    Cells outside the domain get the odd-reflection boundary values.
    Returns ``(field, {owner: cells})``.
    """
    out = Field(target, ghost, level.h)
    st = out.storage
    sources = {}
    for q, ob in level.owners.items():
        ov = intersect(st, ob)
        if ov.is_empty:
            continue
        out.view(ov)[...] = df[q].view(ov)
        sources[q] = ov.volume
    fill_bc_ghosts(out, level.domain)
    return out, sources


def restrict_down(
    fine: Level,
    coarse: Level,
    pairs: list[tuple[dict[int, Field], dict[int, Field]]],
    ledger: CommLedger | None,
    visit: int | None = None,
) -> None:
    """Average each fine rank's owned cells onto the owning coarse rank (one vertical phase)."""
    from .transfer import restrict_avg

    moves = []
    for p, fb in fine.owners.items():
        cb = coarsen(fb)
        q = coarse.owner_of(cb)
        for fdf, cdf in pairs:
            restrict_avg(fdf[p], cdf[q], cb)
        moves.append((p, q, cb.volume * len(pairs)))
    if ledger is not None:
        ledger.record(fine.k, VERTICAL, "restrict", moves, visit)


def prolong_up(
    coarse: Level,
    fine: Level,
    cdf: dict[int, Field],
    fdf: dict[int, Field],
    mode: str,
    ledger: CommLedger | None,
    kind: str = "prolong",
    visit: int | None = None,
) -> None:
    """Trilinear interpolation from ``cdf`` onto each fine rank's owned cells (one vertical phase)."""
    from .transfer import prolong_trilinear

    moves = []
    for p, fb in fine.owners.items():
        tmp, src = gather_box(coarse, cdf, prolong_footprint(fb))
        prolong_trilinear(tmp, fdf[p], fb, mode)
        moves.extend((q, p, n) for q, n in src.items())
    if ledger is not None:
        ledger.record(fine.k, VERTICAL, kind, moves, visit)


def transfer_across_levels(coarse: Level, fine: Level, direction: str = "restrict") -> list[tuple[int, int, int]]:
    """Owner map of a level transition as (src, dst, cells) triples (no data moved)."""
    moves = []
    for p, fb in fine.owners.items():
        if direction == "restrict":
            cb = coarsen(fb)
            moves.append((p, coarse.owner_of(cb), cb.volume))
        else:
            fp = prolong_footprint(fb)
            for q, ob in coarse.owners.items():
                ov = intersect(fp, ob)
                if not ov.is_empty:
                    moves.append((q, p, ov.volume))
    return moves


def serial_reference_solve(hierarchy: LevelHierarchy, params=None):
    """Run the conventional FMG on a one-rank copy of ``hierarchy`` (oracle)."""
    from .mg import ConventionalSolver

    h1 = hierarchy_from_fine_shape(hierarchy.finest.shape, (1, 1, 1), hierarchy.K, hierarchy.problem)
    solver = ConventionalSolver(h1, params)
    report = solver.fmg()
    return solver, report
