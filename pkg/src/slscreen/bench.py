"""Synthetic sweeps: relaxation gaps, screening rates and paired BnB runs per grid cell."""

from __future__ import annotations

import csv
import io
import json
import math
import os
import statistics
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import List, Optional

import numpy as np

from .bnb import BnbConfig, MipStatus, integrality_gap, solve_bnb, solve_screened
from .data import SyntheticConfig, gen_synthetic
from .errors import BoundViolation, ConfigError, SlsError
from .loss import LossConvention
from .relaxations import ProblemSpec, choose_bigm, solve_bigm_relaxation, solve_relaxation
from .screening import ScreenReport, ScreenResult, dual_certificate, round_upper_bound

SCHEMA_VERSION = 1
SAFETY_TOL = 1e-6


class SafetyTripwire(SlsError, RuntimeError):
    """A screened run disagreed with its unscreened twin."""


@dataclass
class SweepConfig:
    problem: str = "reg"
    n: int = 100
    k: int = 10
    s: float = 100.0
    m: List[int] = field(default_factory=lambda: [50, 100, 200])
    gamma: List[float] = field(default_factory=lambda: [1.0, 1.5, 1.8])
    mu: List[float] = field(default_factory=lambda: [5e-4, 1e-3])
    # CARD: ratios k/n, realized by keeping k and setting n = round(k / ratio)
    k_over_n: Optional[List[float]] = None
    replications: int = 10
    seed: int = 0
    time_limit: float = 600.0
    node_limit: Optional[int] = None
    convention: str = "normalized"
    output: Optional[str] = None

    def __post_init__(self):
        if self.problem not in ("reg", "card"):
            raise ConfigError(f"problem must be 'reg' or 'card', got {self.problem!r}")
        grids = {"m": self.m, "gamma": self.gamma}
        if self.problem == "reg":
            grids["mu"] = self.mu
        elif self.k_over_n is not None:
            grids["k_over_n"] = self.k_over_n
        for name, grid in grids.items():
            if not grid:
                raise ConfigError(f"grid '{name}' is empty")
        if self.replications < 1:
            raise ConfigError("replications must be >= 1")
        if self.k < 1 or self.n < self.k:
            raise ConfigError("need 1 <= k <= n")
        LossConvention(self.convention)

    @classmethod
    def from_json(cls, path) -> "SweepConfig":
        raw = json.loads(Path(path).read_text())
        unknown = set(raw) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(**raw)

    def cells(self) -> List[dict]:
        """Grid cells in table order: (mu or k/n) outermost, then m, then gamma."""
        out = []
        if self.problem == "reg":
            outer = [("mu", v) for v in self.mu]
        else:
            ratios = self.k_over_n if self.k_over_n is not None else [self.k / self.n]
            outer = [("k_over_n", v) for v in ratios]
        for key, val in outer:
            for m in self.m:
                for g in self.gamma:
                    cell = {"problem": self.problem, "m": int(m), "gamma": float(g), "k": self.k}
                    if key == "mu":
                        cell.update(mu=float(val), n=self.n)
                    else:
                        cell.update(k_over_n=float(val), n=max(self.k, int(round(self.k / val))))
                    out.append(cell)
        return out


def instance_seed(sweep_seed: int, n: int, m: int, rep: int) -> int:
    """Per-instance seed; instances are shared by every regularization setting."""
    ss = np.random.SeedSequence([sweep_seed, n, m, rep])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


@dataclass
class RunRecord:
    cell: int
    rep: int
    problem: str
    n: int
    m: int
    k: int
    s: float
    gamma: float
    mu: Optional[float]
    k_over_n: Optional[float]
    seed: int
    bigm: Optional[float]
    eta_relax_perspective: Optional[float]
    eta_relax_bigm: Optional[float]
    eta_mip: Optional[float]
    gap_perspective: Optional[float]
    gap_bigm: Optional[float]
    percent_screened: Optional[float]
    fixed_zero: int
    fixed_one: int
    tightness_gap: Optional[float]
    nodes_unscreened: int
    nodes_screened: int
    status_unscreened: str
    status_screened: str
    objective_screened: Optional[float]
    error: Optional[str] = None
    time_unscreened: float = field(default=math.nan)
    time_screened: float = field(default=math.nan)

    TIMING_FIELDS = ("time_unscreened", "time_screened")

    @property
    def both_finished(self) -> bool:
        return (self.status_unscreened == MipStatus.OPTIMAL.value
                and self.status_screened == MipStatus.OPTIMAL.value)

    @property
    def speedup(self) -> Optional[float]:
        if not self.both_finished or not self.time_screened > 0:
            return None
        return self.time_unscreened / self.time_screened

    def deterministic_dict(self) -> dict:
        out = asdict(self)
        for k in self.TIMING_FIELDS:
            out.pop(k)
        return out


def run_instance(cfg: SweepConfig, cell_index: int, cell: dict, rep: int) -> RunRecord:
    conv = LossConvention(cfg.convention)
    seed = instance_seed(cfg.seed, cell["n"], cell["m"], rep)
    data = gen_synthetic(SyntheticConfig(n=cell["n"], m=cell["m"], k=cfg.k, s=cfg.s, seed=seed))
    if cfg.problem == "reg":
        spec = ProblemSpec.reg(cell["gamma"], cell["mu"], conv)
    else:
        spec = ProblemSpec.card(cell["gamma"], cfg.k, conv)
    bnb_cfg = BnbConfig(time_limit=cfg.time_limit, node_limit=cfg.node_limit)

    plain = solve_bnb(data, spec, cfg=bnb_cfg)
    screened = solve_screened(data, spec, cfg=bnb_cfg)
    report = screened.screen
    if report is None:
        # k = n: nothing to screen, but the relaxation numbers are still reported
        report = screen_or_relax(data, spec)
    if screened.status is MipStatus.OPTIMAL and plain.status is MipStatus.OPTIMAL:
        if abs(screened.objective - plain.objective) > SAFETY_TOL:
            raise SafetyTripwire(json.dumps({
                "cell": cell, "rep": rep, "seed": seed,
                "objective_unscreened": plain.objective,
                "objective_screened": screened.objective,
                "fixed_zero": report.result.fixings().zeros.tolist(),
                "fixed_one": report.result.fixings().ones.tolist(),
            }))

    bigm = choose_bigm(data, spec)
    eta_bigm = solve_bigm_relaxation(data, spec, bigm).objective
    eta_persp = report.relax.objective
    eta_mip = plain.objective if plain.status is MipStatus.OPTIMAL else None
    gap_p = gap_b = None
    if eta_mip is not None:
        gap_p = integrality_gap(eta_mip, min(eta_persp, eta_mip))
        try:
            gap_b = integrality_gap(eta_mip, eta_bigm)
        except BoundViolation:
            # M below the optimal coefficients: big-M is not a relaxation here
            gap_b = None
    return RunRecord(
        cell=cell_index, rep=rep, problem=cfg.problem, n=cell["n"], m=cell["m"], k=cfg.k,
        s=cfg.s, gamma=cell["gamma"], mu=cell.get("mu"), k_over_n=cell.get("k_over_n"),
        seed=seed, bigm=bigm, eta_relax_perspective=eta_persp, eta_relax_bigm=eta_bigm,
        eta_mip=eta_mip, gap_perspective=gap_p, gap_bigm=gap_b,
        percent_screened=report.result.percent_screened,
        fixed_zero=report.result.n_fixed_zero, fixed_one=report.result.n_fixed_one,
        tightness_gap=report.cert.tightness_gap,
        nodes_unscreened=plain.nodes_explored, nodes_screened=screened.nodes_explored,
        status_unscreened=plain.status.value, status_screened=screened.status.value,
        objective_screened=screened.objective if screened.status is MipStatus.OPTIMAL else None,
        time_unscreened=plain.wall_time, time_screened=screened.wall_time,
    )


def screen_or_relax(data, spec) -> ScreenReport:
    relax = solve_relaxation(data, spec)
    cert = dual_certificate(relax, data, spec, require_converged=False)
    upper = round_upper_bound(relax, data, spec)
    n = data.n
    result = ScreenResult(np.zeros(n, dtype=np.int8), cert.lower_bound, upper.value,
                          np.zeros(n), np.zeros(n))
    return ScreenReport(relax, cert, upper, result)


def failed_record(cfg: SweepConfig, cell_index: int, cell: dict, rep: int, err: Exception) -> RunRecord:
    nan = None
    return RunRecord(
        cell=cell_index, rep=rep, problem=cfg.problem, n=cell["n"], m=cell["m"], k=cfg.k,
        s=cfg.s, gamma=cell["gamma"], mu=cell.get("mu"), k_over_n=cell.get("k_over_n"),
        seed=instance_seed(cfg.seed, cell["n"], cell["m"], rep), bigm=nan,
        eta_relax_perspective=nan, eta_relax_bigm=nan, eta_mip=None, gap_perspective=None,
        gap_bigm=None, percent_screened=nan, fixed_zero=0, fixed_one=0, tightness_gap=nan,
        nodes_unscreened=0, nodes_screened=0, status_unscreened="failed",
        status_screened="failed", objective_screened=None,
        error=f"{type(err).__name__}: {err}",
    )


def _task(args):
    try:
        return run_instance(*args)
    except SafetyTripwire:
        raise
    except (SlsError, ArithmeticError, np.linalg.LinAlgError) as err:
        # recorded against the cell; the sweep carries on
        return failed_record(*args, err)


def worker_count() -> int:
    env = os.environ.get("SLS_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def run_sweep(cfg: SweepConfig, workers: Optional[int] = None) -> List[RunRecord]:
    """Run every cell x replication; results come back in task order."""
    tasks = [(cfg, ci, cell, rep)
             for ci, cell in enumerate(cfg.cells()) for rep in range(cfg.replications)]
    workers = worker_count() if workers is None else workers
    if workers <= 1:
        return [_task(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_task, tasks))


# --------------------------------------------------------------------------- #
# aggregation and output

TABLE_COLUMNS = [
    "problem", "mu", "k_over_n", "n", "k", "m", "gamma", "runs", "finished",
    "gap_bigm", "gap_perspective", "percent_screened", "fixed_zero", "fixed_one",
    "nodes_unscreened", "nodes_screened",
]
TIMING_COLUMNS = [
    "problem", "mu", "k_over_n", "n", "m", "gamma", "finished",
    "time_unscreened", "time_screened", "speedup",
]


def _mean(vals):
    vals = [v for v in vals if v is not None]
    return statistics.fmean(vals) if vals else None


def aggregate(cfg: SweepConfig, records: List[RunRecord], timing: bool = False) -> List[dict]:
    """Per-cell averages over finished runs; cells without finished runs get None."""
    rows = []
    cells = cfg.cells()
    for ci, cell in enumerate(cells):
        recs = [r for r in records if r.cell == ci]
        fin = [r for r in recs if r.both_finished]
        row = {
            "problem": cell["problem"], "mu": cell.get("mu"), "k_over_n": cell.get("k_over_n"),
            "n": cell["n"], "k": cell["k"], "m": cell["m"], "gamma": cell["gamma"],
            "runs": len(recs), "finished": len(fin),
        }
        if timing:
            row["time_unscreened"] = _mean([r.time_unscreened for r in fin])
            row["time_screened"] = _mean([r.time_screened for r in fin])
            row["speedup"] = _mean([r.speedup for r in fin])
        else:
            row["gap_bigm"] = _mean([r.gap_bigm for r in fin])
            row["gap_perspective"] = _mean([r.gap_perspective for r in fin])
            ok = [r for r in recs if r.error is None]
            row["percent_screened"] = _mean([r.percent_screened for r in ok])
            row["fixed_zero"] = _mean([r.fixed_zero for r in ok])
            row["fixed_one"] = _mean([r.fixed_one for r in ok])
            row["nodes_unscreened"] = _mean([r.nodes_unscreened for r in fin])
            row["nodes_screened"] = _mean([r.nodes_screened for r in fin])
        rows.append(row)
    return rows


def _fmt(v) -> str:
    if v is None:
        return "-"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def rows_to_csv(rows: List[dict], columns: List[str]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([_fmt(row.get(c)) for c in columns])
    return buf.getvalue()


def records_json(cfg: SweepConfig, records: List[RunRecord]) -> str:
    doc = {
        "schema_version": SCHEMA_VERSION,
        "config": asdict(cfg),
        "gap_definition": "100 * (eta_mip - eta_relax) / |eta_mip|",
        "records": [r.deterministic_dict() for r in records],
    }
    return json.dumps(doc, indent=1, sort_keys=True, allow_nan=False)


def _finite(v):
    return v if v is not None and math.isfinite(v) else None


def timings_json(records: List[RunRecord]) -> str:
    doc = {
        "schema_version": SCHEMA_VERSION,
        "timings": [{"cell": r.cell, "rep": r.rep, "time_unscreened": _finite(r.time_unscreened),
                     "time_screened": _finite(r.time_screened), "speedup": r.speedup}
                    for r in records],
    }
    return json.dumps(doc, indent=1, sort_keys=True, allow_nan=False)


def write_outputs(cfg: SweepConfig, records: List[RunRecord], out_dir) -> dict:
    """Deterministic table.csv / records.json plus wall-clock timings.{csv,json}."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "table": out / "table.csv",
        "records": out / "records.json",
        "timings_table": out / "timings.csv",
        "timings": out / "timings.json",
    }
    paths["table"].write_text(rows_to_csv(aggregate(cfg, records), TABLE_COLUMNS), newline="")
    paths["records"].write_text(records_json(cfg, records))
    paths["timings_table"].write_text(
        rows_to_csv(aggregate(cfg, records, timing=True), TIMING_COLUMNS), newline="")
    paths["timings"].write_text(timings_json(records))
    return paths


def records_from_json(text: str) -> List[RunRecord]:
    doc = json.loads(text)
    return [RunRecord(**r) for r in doc["records"]]


def format_table(cfg: SweepConfig, rows: List[dict], metric: str) -> str:
    """Wide text layout: one line per (mu or k/n, m), one column per gamma."""
    outer_key = "mu" if cfg.problem == "reg" else "k_over_n"
    lines = [f"{metric}"]
    lines.append(f"{outer_key:>10} {'m':>6} " + " ".join(f"{'g=' + repr(g):>10}" for g in cfg.gamma))
    seen = []
    for row in rows:
        key = (row[outer_key], row["m"])
        if key in seen:
            continue
        seen.append(key)
        vals = [r.get(metric) for r in rows if (r[outer_key], r["m"]) == key]
        cells = " ".join(f"{'-' if v is None else f'{v:.4g}':>10}" for v in vals)
        lines.append(f"{key[0]:>10} {key[1]:>6} {cells}")
    return "\n".join(lines)
