"""Analytic communication-complexity model and reconciliation with the instrumented ledger.

Counts are in model units (phases, messages, cells).  The phase table lists
per-grid-visit phase counts; the global ``log2(N)^2 / 8`` factor is kept as a
labeled multiplier rather than folded into the entries.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field
from typing import NamedTuple

from . import dd
from .dd import CommLedger

# phases per grid visit of a V(2,2) cycle with degree-2 Chebyshev smoothing
H_PHASES_PER_VISIT = 6
V_PHASES_PER_VISIT = 2
NEIGHBORS_27PT = 26
FMG_KINDS = ("fmg_prolong", "fmg_smooth")


@dataclass(frozen=True)
class ModelInputs:
    M: int
    K: int
    N: int
    Q: int = 1

    def __post_init__(self):
        if not 0 <= self.K <= self.M:
            raise ValueError("need 0 <= K <= M")
        if self.N < 1 or self.N & (self.N - 1):
            raise ValueError("N must be a power of two")


class GridVisits(NamedTuple):
    exact: int
    approx: int


def grid_visits(M: int) -> GridVisits:
    """FMG grid visits with M+1 levels: exact sum of (j+1), and the (M+1)M/2 estimate."""
    if M < 0:
        raise ValueError("M must be >= 0")
    return GridVisits((M + 1) * (M + 2) // 2, (M + 1) * M // 2)


def messages_per_level_visit(neighbors: int = NEIGHBORS_27PT, phases: int = H_PHASES_PER_VISIT) -> int:
    return neighbors * phases


@dataclass(frozen=True)
class Term:
    """``cH * c_H + cV * c_V`` phase-count expression."""

    cH: int = 0
    cV: int = 0
    scale: int = 1

    def __str__(self) -> str:
        parts = []
        if self.cH:
            parts.append(f"{self.cH}c_H")
        if self.cV:
            parts.append(f"{self.cV}c_V")
        body = " + ".join(parts) or "0"
        if self.scale != 1 and parts:
            return f"{self.scale}*({body})"
        return body

    def value(self, cH: float = 1.0, cV: float = 1.0) -> float:
        return self.scale * (self.cH * cH + self.cV * cV)


ROWS = ("coarse grids", "conventional fine grids", "SR fine grids")


@dataclass(frozen=True)
class PhaseTable:
    M: int
    K: int
    near: dict[str, Term]
    far: dict[str, Term]
    multiplier: str = "log2(N)^2/8"

    def rows(self):
        for name in ROWS:
            yield name, self.near[name], self.far[name]

    def to_csv(self, header: dict | None = None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        meta = {**(header or {}), "M": self.M, "K": self.K, "multiplier": self.multiplier}
        w.writerow(["# " + " ".join(f"{k}={v}" for k, v in meta.items())])
        w.writerow(["type", "near", "far"])
        for name, n, f in self.rows():
            w.writerow([name, str(n), str(f)])
        return buf.getvalue()

    def to_dict(self) -> dict:
        return {
            "M": self.M,
            "K": self.K,
            "multiplier": self.multiplier,
            "rows": [{"type": name, "near": str(n), "far": str(f)} for name, n, f in self.rows()],
        }


def phase_table(M: int, K: int) -> PhaseTable:
    # coarse half sees ~3M^2/8 visits, fine half ~M^2/8, hence the factor 3
    near = {
        "coarse grids": Term(6, 2, scale=3),
        "conventional fine grids": Term(6, 0),
        "SR fine grids": Term(6, 0),
    }
    far = {
        "coarse grids": Term(0, 0),
        "conventional fine grids": Term(6, 2),
        "SR fine grids": Term(0, 2),
    }
    return PhaseTable(M, K, near, far)


def bisection(N: int, method: str) -> float:
    """Leading-order bisection traffic: N^2 conventional, N log2(N)^3 for SR."""
    if N < 2:
        raise ValueError("N must be >= 2")
    if method == "conventional":
        return float(N) ** 2
    if method == "sr":
        return N * math.log2(N) ** 3
    raise ValueError(f"unknown method {method!r}")


def bisection_curve(exponents=range(4, 15)) -> list[dict]:
    rows = []
    for e in exponents:
        n = 2**e
        c, s = bisection(n, "conventional"), bisection(n, "sr")
        rows.append({"N": n, "conventional": c, "sr": s, "ratio": c / s})
    return rows


def bisection_csv(exponents=range(4, 15), header: dict | None = None) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    if header:
        w.writerow(["# " + " ".join(f"{k}={v}" for k, v in header.items())])
    w.writerow(["N", "conventional", "sr", "ratio"])
    for r in bisection_curve(exponents):
        w.writerow([r["N"], f"{r['conventional']:.6e}", f"{r['sr']:.6e}", f"{r['ratio']:.6e}"])
    return buf.getvalue()


# -- reconciliation -------------------------------------------------------------


@dataclass
class Fact:
    name: str
    passed: bool
    detail: str = ""


@dataclass
class ReconcileReport:
    solver: str
    facts: list[Fact] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return all(f.passed for f in self.facts)

    def lines(self) -> list[str]:
        return [f"{'PASS' if f.passed else 'FAIL'} {f.name}: {f.detail}" for f in self.facts]

    def to_json(self) -> str:
        return json.dumps({"solver": self.solver, "ok": self.ok, "facts": [asdict(f) for f in self.facts]},
                          indent=2)


def _charged(ledger: CommLedger, direction: str, visit: int):
    return [r for r in ledger.records
            if r.direction == direction and r.visit == visit and r.kind not in FMG_KINDS]


def reconcile(ledger: CommLedger, table: PhaseTable, visits: dict[int, int],
              solver: str = "conventional") -> ReconcileReport:
    """Check the ledger of a completed FMG solve against the phase model.

    ``visits`` maps level index k to V-cycle visits (``SolveReport.visits``).
    Levels k >= 1 are the fine half; for ``solver='sr'`` they must carry no
    horizontal traffic at all.
    """
    if solver not in ("conventional", "sr"):
        raise ValueError(f"unknown solver {solver!r}")
    rep = ReconcileReport(solver)
    coarsest = min(visits) if visits else 0
    if solver == "sr":
        far = table.far["SR fine grids"]
        rep.facts.append(Fact("model: SR far traffic is vertical only", far.cH == 0, str(far)))

    for k in sorted(visits):
        if k == coarsest:
            continue
        n = visits[k]
        v = len(_charged(ledger, dd.VERTICAL, k))
        rep.facts.append(Fact(f"level {k}: vertical phases per visit", v == V_PHASES_PER_VISIT * n,
                              f"{v} phases over {n} visits"))
        h = len(_charged(ledger, dd.HORIZONTAL, k))
        if solver == "sr" and k >= 1:
            on_level = ledger.phases(level=k, direction=dd.HORIZONTAL)
            msgs = ledger.messages(level=k, direction=dd.HORIZONTAL)
            want = 1 if k == 1 else 0  # the tau term is applied on the conventional transition level
            rep.facts.append(Fact(f"level {k}: no horizontal phases", on_level == 0 and msgs == 0,
                                  f"{on_level} phases, {msgs} messages"))
            rep.facts.append(Fact(f"level {k}: horizontal phases charged per visit", h == want * n,
                                  f"{h} phases over {n} visits"))
        else:
            rep.facts.append(Fact(f"level {k}: horizontal phases per visit", h == H_PHASES_PER_VISIT * n,
                                  f"{h} phases over {n} visits"))
    return rep
