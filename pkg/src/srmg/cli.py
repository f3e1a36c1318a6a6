"""Command-line harness: single solves, accuracy sweeps, communication model, convergence study."""

from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import json
import logging
import sys
import time
from dataclasses import dataclass
from pathlib import Path

from . import commmodel
from .dd import CommLedger, ConfigError, build_hierarchy, hierarchy_from_fine_shape
from .mg import ConventionalSolver, CycleParams, fmg_contraction
from .smooth import SolverFailure
from .sr import SRConfig, SRSolver, run_sr_case, sweep_csv

log = logging.getLogger("srmg")

EXIT_OK, EXIT_CONFIG, EXIT_SOLVE, EXIT_CHECK = 0, 1, 2, 3


def _shape(text: str) -> tuple[int, int, int]:
    parts = text.lower().split("x")
    if len(parts) != 3:
        raise ConfigError(f"expected AxBxC, got {text!r}")
    return tuple(int(p) for p in parts)


def _ints(text: str) -> tuple[int, ...]:
    return tuple(int(t) for t in text.split(",") if t.strip())


def _columns(text: str) -> tuple[tuple[int, int], ...]:
    # "4:4,8:5" -> ((4, 4), (8, 5)) as (pN0V, K)
    out = []
    for item in text.split(","):
        p, k = item.split(":")
        out.append((int(p), int(k)))
    return tuple(out)


def _shapes(text: str) -> tuple[tuple[int, int, int], ...]:
    return tuple(_shape(t) for t in text.split(",") if t.strip())


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {text!r}")


@dataclass
class RunConfig:
    solver: str = "conventional"
    ranks: tuple[int, int, int] = (4, 2, 2)
    pN0V: int = 4
    K: int = 4
    fine: tuple[int, int, int] | None = None
    schedule: str = "linear"
    A: int = 2
    B: int = 0
    J1: int = 4
    nearest_neighbor: bool = True
    alpha: int = 1
    nu1: int = 2
    nu2: int = 2
    n_vcycles: int = 1
    rtol: float = 1e-4
    A_values: tuple[int, ...] = (2, 4, 6, 8)
    B_values: tuple[int, ...] = (0, 1, 2, 3)
    columns: tuple[tuple[int, int], ...] = ((4, 4),)
    pn0v_values: tuple[int, ...] = (4, 8)
    sizes: tuple[tuple[int, int, int], ...] = ((64, 32, 32), (128, 64, 64), (256, 128, 128))
    verbosity: int = 0

    PARSERS = {
        "ranks": _shape, "fine": lambda t: None if t.strip().lower() in ("", "none") else _shape(t),
        "nearest_neighbor": _bool, "A_values": _ints, "B_values": _ints, "columns": _columns,
        "pn0v_values": _ints, "sizes": _shapes,
    }

    def set(self, key: str, value: str) -> None:
        names = {f.name: f for f in dataclasses.fields(self)}
        if key not in names:
            raise ConfigError(f"unknown config key {key!r}")
        parse = self.PARSERS.get(key)
        if parse is None:
            typ = type(getattr(RunConfig, key, ""))
            parse = {int: int, float: float}.get(typ, str)
        try:
            setattr(self, key, parse(value))
        except ValueError as exc:
            raise ConfigError(f"bad value for {key}: {value!r} ({exc})") from None

    def validate(self) -> None:
        if self.solver not in ("conventional", "sr", "vcycle-iterative"):
            raise ConfigError(f"unknown solver {self.solver!r}")
        if self.schedule not in ("linear", "mbs"):
            raise ConfigError(f"unknown schedule {self.schedule!r}")

    def params(self) -> CycleParams:
        return CycleParams(self.alpha, self.nu1, self.nu2, self.n_vcycles)

    def sr(self, K=None, pN0V=None, **kw) -> SRConfig:
        base = dict(K=self.K if K is None else K, schedule=self.schedule, A=self.A, B=self.B, J1=self.J1,
                    pN0V=self.pN0V if pN0V is None else pN0V, nearest_neighbor=self.nearest_neighbor)
        base.update(kw)
        return SRConfig(**base)

    def hierarchy(self, pN0V=None, K=None):
        pN0V = self.pN0V if pN0V is None else pN0V
        K = self.K if K is None else K
        if self.fine is not None:
            return hierarchy_from_fine_shape(self.fine, self.ranks, K)
        return build_hierarchy(self.ranks, pN0V, K)

    def echo(self, **extra) -> dict:
        out = {
            "solver": self.solver, "P": "x".join(map(str, self.ranks)), "pN0V": self.pN0V, "K": self.K,
            "A": self.A, "B": self.B,
        }
        if self.schedule == "mbs":
            out["J1"] = self.J1
        if self.fine is not None:
            out["fine"] = "x".join(map(str, self.fine))
        out.update(extra)
        return out


def load_config(path: str | None, overrides: list[str]) -> RunConfig:
    cfg = RunConfig()
    if path:
        for n, line in enumerate(Path(path).read_text().splitlines(), 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{n}: expected key=value")
            k, v = line.split("=", 1)
            cfg.set(k.strip(), v.strip())
    for item in overrides:
        if not item.startswith("--") or "=" not in item:
            raise ConfigError(f"unrecognized argument {item!r}")
        k, v = item[2:].split("=", 1)
        cfg.set(k.replace("-", "_"), v)
    cfg.validate()
    return cfg


class Output:
    def __init__(self, out: str | None):
        self.dir = Path(out) if out else None
        if self.dir:
            self.dir.mkdir(parents=True, exist_ok=True)

    def write(self, name: str, text: str) -> None:
        if self.dir is None:
            sys.stdout.write(text)
            return
        with open(self.dir / name, "w", newline="") as fh:
            fh.write(text)

    def json(self, name: str, obj: dict) -> None:
        text = json.dumps(obj, indent=2, sort_keys=True) + "\n"
        if self.dir is None:
            log.info("%s", text)
            return
        (self.dir / name).write_text(text)


def _csv(header: dict, columns: list[str], rows: list[list]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["# " + " ".join(f"{k}={v}" for k, v in header.items())])
    w.writerow(columns)
    w.writerows(rows)
    return buf.getvalue()


def _conv_error(hier, params) -> float:
    return ConventionalSolver(hier, params).fmg().error_inf


# -- subcommands ----------------------------------------------------------------


def cmd_solve(cfg: RunConfig, out: Output, check: bool) -> int:
    hier = cfg.hierarchy()
    params = cfg.params()
    ledger = CommLedger()
    t0 = time.perf_counter()
    if cfg.solver == "sr":
        solver = SRSolver(hier, cfg.sr(), params, ledger)
        report = solver.fmg()
    else:
        solver = ConventionalSolver(hier, params, ledger)
        report = solver.fmg() if cfg.solver == "conventional" else solver.vcycle_solve(cfg.rtol)
    out.write("solve.csv", report.to_csv(cfg.echo()))
    out.write("ledger.csv", ledger.to_csv(cfg.echo()))
    summary = {
        "config": cfg.echo(), "fine": "x".join(map(str, hier.finest.shape)),
        "error_inf": report.error_inf, "residual_inf": report.residual_inf,
        "phases": report.phases, "messages": report.messages,
        "wall_time": time.perf_counter() - t0,
    }
    status = EXIT_OK
    if cfg.solver != "vcycle-iterative":
        rec = commmodel.reconcile(ledger, commmodel.phase_table(hier.M, hier.K), report.visits,
                                  "sr" if cfg.solver == "sr" else "conventional")
        summary["reconcile_ok"] = rec.ok
        if check and not rec.ok:
            status = EXIT_CHECK
    out.json("summary.json", summary)
    return status


def _table1_layout(rows, columns, header: dict) -> str:
    by = {(r.A, r.B, r.pN0V, r.K): r for r in rows}
    labels = [f"{p.bit_length() - 1}({k})" for p, k in columns]
    lines = []
    for A in sorted({r.A for r in rows}):
        for B in sorted({r.B for r in rows}):
            cells = []
            for p, k in columns:
                r = by.get((A, B, p, k))
                cells.append("NA" if r is None or r.e_r is None else f"{r.e_r:.3f}")
            lines.append([A, B, *cells])
    return _csv({**header, "cell": "e_r", "column_label": "log2(pN0V)(K)"}, ["A", "B", *labels], lines)


def cmd_sweep_table1(cfg: RunConfig, out: Output, check: bool, large: bool) -> int:
    params = cfg.params()
    columns = list(cfg.columns)
    if large:
        columns += [c for c in ((8, 5), (16, 6)) if c not in columns]
    rows = []
    for pN0V, K in columns:
        hier = cfg.hierarchy(pN0V, K)
        e_conv = _conv_error(hier, params)
        for A in cfg.A_values:
            for B in cfg.B_values:
                row = run_sr_case(hier, cfg.sr(K=K, pN0V=pN0V, schedule="linear", A=A, B=B), e_conv, params)
                log.info("pN0V=%d K=%d A=%d B=%d e_r=%s", pN0V, K, A, B, row.e_r)
                rows.append(row)
    echo = cfg.echo(solver="sr", columns=";".join(f"{p}:{k}" for p, k in columns))
    out.write("sweep_table1.csv", sweep_csv(rows, echo))
    out.write("table1.csv", _table1_layout(rows, columns, echo))
    verdict = table1_check(rows, columns[0])
    out.json("summary.json", {"config": echo, "check": verdict})
    return EXIT_CHECK if check and not all(verdict.values()) else EXIT_OK


def table1_check(rows, column) -> dict[str, bool]:
    p, k = column
    er = {(r.A, r.B): r.e_r for r in rows if (r.pN0V, r.K) == (p, k)}
    b0 = [er.get((A, 0)) for A in (2, 4, 6, 8)]
    return {
        "e_r(2,0) in [1.6, 4.1]": er.get((2, 0)) is not None and 1.6 <= er[(2, 0)] <= 4.1,
        "e_r(4,1) <= 1.15": er.get((4, 1)) is not None and er[(4, 1)] <= 1.15,
        "e_r nonincreasing in A at B=0": None not in b0 and all(a >= b for a, b in zip(b0, b0[1:])),
    }


def pn0v_check(e_r: dict[int, float]) -> dict[str, bool]:
    """e_r must grow as pN0V halves; the excess e_r - 1 grows by a factor in [1.05, 3]."""
    ps = sorted(e_r, reverse=True)
    seq = [e_r[p] for p in ps]
    ratios = [(b - 1.0) / (a - 1.0) if a > 1.0 else float("inf") for a, b in zip(seq, seq[1:])]
    return {
        "strictly increasing as pN0V halves": all(b > a for a, b in zip(seq, seq[1:])),
        "per-halving ratio in [1.05, 3.0]": all(1.05 <= r <= 3.0 for r in ratios),
    }


def _sweep_pn0v(cfg: RunConfig, out: Output, check: bool, large: bool, mbs: bool) -> int:
    params = cfg.params()
    values = list(cfg.pn0v_values)
    if large and 16 not in values:
        values.append(16)
    rows = []
    for p in sorted(values, reverse=True):
        hier = cfg.hierarchy(p, cfg.K)
        e_conv = _conv_error(hier, params)
        sc = cfg.sr(pN0V=p, schedule="mbs") if mbs else cfg.sr(pN0V=p, schedule="linear")
        row = run_sr_case(hier, sc, e_conv, params)
        log.info("pN0V=%d e_r=%s", p, row.e_r)
        rows.append(row)
    name = "sweep_mbs" if mbs else "sweep_pn0v"
    extra = {"schedule": "mbs", "J1": cfg.J1} if mbs else {"schedule": "linear"}
    echo = cfg.echo(solver="sr", **extra)
    out.write(f"{name}.csv", sweep_csv(rows, echo))
    verdict = pn0v_check({r.pN0V: r.e_r for r in rows if r.e_r is not None})
    out.json("summary.json", {"config": echo, "check": verdict})
    return EXIT_CHECK if check and not all(verdict.values()) else EXIT_OK


def cmd_comm(cfg: RunConfig, out: Output, check: bool) -> int:
    hier = cfg.hierarchy()
    table = commmodel.phase_table(hier.M, hier.K)
    out.write("phase_table.csv", table.to_csv(cfg.echo()))
    out.write("bisection.csv", commmodel.bisection_csv(header=cfg.echo()))
    reports = {}
    for solver in ("conventional", "sr"):
        ledger = CommLedger()
        if solver == "sr":
            rep = SRSolver(hier, cfg.sr(), cfg.params(), ledger).fmg()
        else:
            rep = ConventionalSolver(hier, cfg.params(), ledger).fmg()
        rec = commmodel.reconcile(ledger, table, rep.visits, solver)
        out.write(f"ledger_{solver}.csv", ledger.to_csv(cfg.echo(solver=solver)))
        out.write(f"reconcile_{solver}.json", rec.to_json() + "\n")
        reports[solver] = rec.ok
    out.json("summary.json", {"config": cfg.echo(), "phase_table": table.to_dict(), "reconcile": reports,
                              "messages_per_level_visit": commmodel.messages_per_level_visit()})
    return EXIT_CHECK if check and not all(reports.values()) else EXIT_OK


def cmd_convergence(cfg: RunConfig, out: Output, check: bool) -> int:
    params = cfg.params()
    rows, errs, ress = [], [], []
    for shape in cfg.sizes:
        hier = hierarchy_from_fine_shape(shape, cfg.ranks)
        solver = ConventionalSolver(hier, params)
        rep = solver.fmg()
        e, r = rep.error_inf, rep.residual_inf
        solver.vcycle(hier.M)
        e_extra = solver.error_inf(hier.M)
        rows.append(["x".join(map(str, shape)), f"{e:.9e}", f"{r:.9e}",
                     f"{errs[-1] / e:.6f}" if errs else "", f"{ress[-1] / r:.6f}" if ress else "",
                     f"{abs(e_extra - e) / e:.6f}"])
        errs.append(e)
        ress.append(r)
        log.info("%s error=%.3e residual=%.3e", shape, e, r)
    out.write("convergence.csv", _csv(cfg.echo(solver="conventional"),
                                      ["N", "error_inf", "residual_inf", "error_ratio", "residual_ratio",
                                       "extra_vcycle_change"], rows))
    gamma = fmg_contraction(hierarchy_from_fine_shape(cfg.sizes[0], cfg.ranks), params)
    e_ratios = [a / b for a, b in zip(errs, errs[1:])]
    r_ratios = [a / b for a, b in zip(ress, ress[1:])]
    verdict = {
        "error ratio in [3.6, 4.4]": all(3.6 <= x <= 4.4 for x in e_ratios),
        "residual ratio in [1.5, 3.0]": all(1.5 <= x <= 3.0 for x in r_ratios),
        "extra V-cycle changes error < 10%": all(float(row[-1]) < 0.1 for row in rows),
        "FMG V-cycle Gamma < 0.25": max(gamma.values()) < 0.25,
    }
    out.json("summary.json", {"config": cfg.echo(solver="conventional"), "gamma": gamma, "check": verdict})
    return EXIT_CHECK if check and not all(verdict.values()) else EXIT_OK


# -- entry point ------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="srmg", description=__doc__)
    ap.add_argument("command", choices=["solve", "sweep-table1", "sweep-pn0v", "sweep-mbs", "comm", "convergence"])
    ap.add_argument("--config", help="key=value configuration file")
    ap.add_argument("--out", help="output directory (default: CSV to stdout)")
    ap.add_argument("--large", action="store_true", help="include the larger sweep columns")
    ap.add_argument("--solver", choices=["conventional", "sr", "vcycle-iterative"])
    ap.add_argument("--ranks", help="process grid, e.g. 4x2x2")
    ap.add_argument("--check", action="store_true", help="exit 3 if the run's acceptance checks fail")
    ap.add_argument("-v", "--verbose", action="count", default=0)
    return ap


def main(argv: list[str] | None = None) -> int:
    ap = build_parser()
    args, rest = ap.parse_known_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        cfg = load_config(args.config, rest)
        if args.solver:
            cfg.set("solver", args.solver)
        if args.ranks:
            cfg.set("ranks", args.ranks)
        cfg.verbosity = max(cfg.verbosity, args.verbose)
        out = Output(args.out)
        if args.command == "solve":
            return cmd_solve(cfg, out, args.check)
        if args.command == "sweep-table1":
            return cmd_sweep_table1(cfg, out, args.check, args.large)
        if args.command in ("sweep-pn0v", "sweep-mbs"):
            return _sweep_pn0v(cfg, out, args.check, args.large, args.command == "sweep-mbs")
        if args.command == "comm":
            return cmd_comm(cfg, out, args.check)
        return cmd_convergence(cfg, out, args.check)
    except ValueError as exc:  # ConfigError, InfeasibleConfig and bad parameters
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SolverFailure as exc:
        print(f"solve failed: {exc}", file=sys.stderr)
        return EXIT_SOLVE


if __name__ == "__main__":
    sys.exit(main())
