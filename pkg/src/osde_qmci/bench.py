"""Sweep over the number of time steps comparing the series method, the low-depth
baseline and classical Monte Carlo on the exceedance probability q_N."""

from __future__ import annotations

import csv
import io
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from osde_qmci.errors import DomainError
from osde_qmci.pipeline import DemoSchedule, PipelineConfig, demo_times, run
from osde_qmci.qae import ExactBackend, RqaeBackend, choose_beta, lqae_simulate
from osde_qmci.rbm import RbmKernel, exceed_probability, sample_step

logger = logging.getLogger(__name__)

PROPOSED = "Proposed"
LOW_DEPTH = "LowDepth"
CLASSICAL = "ClassicalMC"
METHODS = (PROPOSED, LOW_DEPTH, CLASSICAL)
_METHOD_CODE = {m: k for k, m in enumerate(METHODS)}

DEMO_NS = (8, 11, 16, 22, 32, 45, 64)


@dataclass(frozen=True)
class BenchConfig:
    kernel: RbmKernel = field(default_factory=RbmKernel)
    x0: float = 0.0
    t0: float = 0.0
    t_first: float = 0.2
    t_last: float = 0.6
    L: int = 5
    R: int = 12
    rqae_base: float = 2.0**-10
    lqae_eps: float = 0.0029
    quad_tol: float = 1e-8
    reference_tol: float = 1e-10
    target_rmse: float = 0.0004
    lowdepth_mode: str = "all"  # "all" expectations or a "single" one
    proposed_backend: str = "rqae"  # or "exact"
    classical_mode: str = "analytic"  # or "sampled"

    def __post_init__(self):
        if self.lowdepth_mode not in ("all", "single"):
            raise DomainError(f"lowdepth_mode must be 'all' or 'single', got {self.lowdepth_mode!r}")
        if self.proposed_backend not in ("rqae", "exact"):
            raise DomainError(f"proposed_backend must be 'rqae' or 'exact', got {self.proposed_backend!r}")
        if self.classical_mode not in ("analytic", "sampled"):
            raise DomainError(f"classical_mode must be 'analytic' or 'sampled', got {self.classical_mode!r}")

    def times(self, N):
        return demo_times(N, self.t0, self.t_first, self.t_last)


@dataclass(frozen=True)
class ExperimentRecord:
    method: str
    N: int
    run: int
    seed: int
    q_hat: float
    abs_err: float
    queries_up_units: int
    queries_raw: int
    max_depth: int
    max_depth_raw: int = 0
    queries_up_single: int = 0
    queries_up_all: int = 0
    error: str = ""


RECORD_COLUMNS = [f.name for f in fields(ExperimentRecord)]


def cell_seed(master_seed: int, method: str, N: int, run_index: int) -> int:
    """Independent 64-bit seed for one (method, N, run) cell."""
    seq = np.random.SeedSequence(master_seed, spawn_key=(_METHOD_CODE[method], N, run_index))
    return int(seq.generate_state(1, np.uint64)[0])


def classical_reference(q: float, N: int, target_rmse: float) -> int:
    """Transition samples a classical estimator of ``q`` needs for RMSE ``target_rmse``."""
    if not 0.0 < q < 1.0:
        raise DomainError(f"q must lie in (0, 1), got {q}")
    if not target_rmse > 0:
        raise DomainError("target_rmse must be positive")
    return N * math.ceil(q * (1.0 - q) / target_rmse**2)


def sample_classical_mc(kernel, N, times, x0, n_paths, rng):
    """Fraction of simulated paths ending above ``x0``; returns (estimate, transition samples)."""
    if n_paths < 1:
        raise DomainError("n_paths must be >= 1")
    if len(times) != N + 1:
        raise DomainError("need N + 1 time points")
    x = np.full(n_paths, float(x0))
    for t, t_next in zip(times[:-1], times[1:]):
        x = sample_step(kernel, x, t_next - t, rng)
    return float(np.mean(x > x0)), n_paths * N


def _proposed_cell(cfg: BenchConfig, N, run_index, seed, q_ref):
    backend = ExactBackend() if cfg.proposed_backend == "exact" else RqaeBackend(cfg.rqae_base, cfg.R)
    pcfg = PipelineConfig(
        N=N,
        times=cfg.times(N),
        L=cfg.L,
        x0=(cfg.x0,),
        kernel=cfg.kernel,
        backend=backend,
        quad_tol=cfg.quad_tol,
        schedule=DemoSchedule(cfg.rqae_base),
    )
    traj = run(pcfg, seed)
    q = traj.exceed_estimate()
    # one transition oracle per Grover application: U_p units equal raw counts
    return ExperimentRecord(
        PROPOSED, N, run_index, seed, q, abs(q - q_ref),
        traj.total_queries, traj.total_queries, traj.max_depth, traj.max_depth,
        traj.total_queries, traj.total_queries,
    )


def _lowdepth_cell(cfg: BenchConfig, N, run_index, seed, q_ref):
    beta = choose_beta(N, cfg.lqae_eps)
    out = lqae_simulate(q_ref, cfg.lqae_eps, beta, cfg.R, np.random.default_rng(seed))
    # each Grover application holds the whole N-step evolution circuit
    single = out.total_queries * N
    every = single * N
    return ExperimentRecord(
        LOW_DEPTH, N, run_index, seed, out.estimate, abs(out.estimate - q_ref),
        every if cfg.lowdepth_mode == "all" else single, out.total_queries,
        out.max_depth * N, out.max_depth, single, every,
    )


def _classical_cell(cfg: BenchConfig, N, run_index, seed, q_ref):
    trials = classical_reference(q_ref, N, cfg.target_rmse)
    if cfg.classical_mode == "sampled":
        n_paths = trials // N
        q, trials = sample_classical_mc(cfg.kernel, N, cfg.times(N), cfg.x0, n_paths, np.random.default_rng(seed))
        err = abs(q - q_ref)
    else:
        q = err = math.nan
    return ExperimentRecord(CLASSICAL, N, run_index, seed, q, err, trials, trials, 0, 0, trials, trials)


_CELLS = {PROPOSED: _proposed_cell, LOW_DEPTH: _lowdepth_cell, CLASSICAL: _classical_cell}


def _run_cell(args):
    cfg, method, N, run_index, seed, q_ref = args
    try:
        return _CELLS[method](cfg, N, run_index, seed, q_ref)
    except Exception as exc:  # a failed cell is recorded, the sweep goes on
        logger.warning("cell %s N=%d run=%d failed: %s", method, N, run_index, exc)
        nan = math.nan
        return ExperimentRecord(method, N, run_index, seed, nan, nan, 0, 0, 0, error=f"{type(exc).__name__}: {exc}")


def reference_values(cfg: BenchConfig, Ns) -> dict[int, float]:
    """q_N for each N, computed once and shared by every method."""
    return {
        N: exceed_probability(cfg.kernel, cfg.x0, cfg.t0, cfg.times(N)[-1], cfg.reference_tol)
        for N in Ns
    }


def run_sweep(Ns, runs_per_cell=10, methods=METHODS, master_seed=0, config=None, workers=1, references=None):
    """Run every (method, N, run) cell and return the records in a fixed order.

    ClassicalMC contributes one record per N (its trial count is analytic
    unless ``classical_mode`` is "sampled").
    """
    cfg = config or BenchConfig()
    Ns = [int(n) for n in Ns]
    if not Ns:
        raise DomainError("Ns must not be empty")
    if runs_per_cell < 1:
        raise DomainError("runs_per_cell must be >= 1")
    unknown = [m for m in methods if m not in _CELLS]
    if unknown:
        raise DomainError(f"unknown method(s): {unknown}")
    refs = references or reference_values(cfg, Ns)
    jobs = []
    for method in METHODS:
        if method not in methods:
            continue
        for N in Ns:
            n_runs = 1 if method == CLASSICAL and cfg.classical_mode == "analytic" else runs_per_cell
            for r in range(n_runs):
                jobs.append((cfg, method, N, r, cell_seed(master_seed, method, N, r), refs[N]))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_run_cell, jobs))
    return [_run_cell(j) for j in jobs]


# ------------------------------------------------------------------ summary


@dataclass(frozen=True)
class CellSummary:
    method: str
    N: int
    runs: int
    rmse: float
    mean_queries: float
    mean_depth: float


@dataclass(frozen=True)
class Slope:
    slope: float
    stderr: float
    intercept: float


@dataclass
class ScalingSummary:
    cells: list
    slopes: dict  # method -> {"queries": Slope, "depth": Slope}
    accounting: str = "up-units"

    def cell(self, method, N) -> CellSummary:
        for c in self.cells:
            if c.method == method and c.N == N:
                return c
        raise KeyError((method, N))

    def to_dict(self):
        return {
            "accounting": self.accounting,
            "cells": [asdict(c) for c in self.cells],
            "slopes": {m: {k: asdict(v) for k, v in s.items()} for m, s in self.slopes.items()},
        }


def loglog_fit(Ns, values) -> Slope:
    """OLS of log(value) on log(N). Non-positive values give NaN."""
    x = np.log(np.asarray(Ns, dtype=float))
    v = np.asarray(values, dtype=float)
    if np.any(~(v > 0)):
        return Slope(math.nan, math.nan, math.nan)
    y = np.log(v)
    X = np.column_stack([x, np.ones_like(x)])
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    dof = len(x) - 2
    if dof > 0:
        resid = y - X @ coef
        s2 = float(resid @ resid) / dof
        se = math.sqrt(s2 / float(np.sum((x - x.mean()) ** 2)))
    else:
        se = 0.0
    return Slope(float(coef[0]), se, float(coef[1]))


def summarize(records, accounting="up-units") -> ScalingSummary:
    """Per-(method, N) RMSE and means, then log-log slopes per method."""
    if accounting not in ("up-units", "raw-grover"):
        raise DomainError(f"unknown accounting {accounting!r}")
    qkey = "queries_up_units" if accounting == "up-units" else "queries_raw"
    dkey = "max_depth" if accounting == "up-units" else "max_depth_raw"
    groups = {}
    for r in records:
        if r.error:
            continue
        groups.setdefault((r.method, r.N), []).append(r)
    cells = []
    for (method, N), rs in sorted(groups.items(), key=lambda kv: (_METHOD_CODE.get(kv[0][0], 99), kv[0][1])):
        errs = np.array([r.abs_err for r in rs], dtype=float)
        cells.append(CellSummary(
            method, N, len(rs),
            float(np.sqrt(np.mean(errs**2))),
            float(np.mean([getattr(r, qkey) for r in rs])),
            float(np.mean([getattr(r, dkey) for r in rs])),
        ))
    slopes = {}
    for method in dict.fromkeys(c.method for c in cells):
        mc = [c for c in cells if c.method == method]
        if len({c.N for c in mc}) < 2:
            raise DomainError(f"{method}: need at least two distinct N to fit a slope")
        Ns = [c.N for c in mc]
        slopes[method] = {
            "queries": loglog_fit(Ns, [c.mean_queries for c in mc]),
            "depth": loglog_fit(Ns, [c.mean_depth for c in mc]),
        }
    if not slopes:
        raise DomainError("no successful records to summarize")
    return ScalingSummary(cells, slopes, accounting)


POWER_LAWS = {
    # method: (depth exponent in N, query exponent in N, query exponent in 1/eps)
    "Proposed": (0.5, 1.5, 1),
    "Naive": (1.0, 2.0, 1),
    "LowDepth": (0.5, 2.5, 1),
    "Simultaneous": (1.5, 1.5, 1),
    "Classical": (None, 1.0, 2),
}


def power_law_line(method, Ns, anchor_N, anchor_value, metric="queries"):
    """Analytic reference line c * N^k through (anchor_N, anchor_value)."""
    k = POWER_LAWS[method][0 if metric == "depth" else 1]
    return [anchor_value * (n / anchor_N) ** k for n in Ns]


# ---------------------------------------------------------------------- IO


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return str(v)


def records_to_csv(records) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(RECORD_COLUMNS)
    for r in records:
        w.writerow([_fmt(getattr(r, c)) for c in RECORD_COLUMNS])
    return buf.getvalue()


def records_from_csv(text) -> list[ExperimentRecord]:
    out = []
    types = {f.name: f.type for f in fields(ExperimentRecord)}
    conv = {"str": str, "int": int, "float": float}
    for row in csv.DictReader(io.StringIO(text)):
        out.append(ExperimentRecord(**{k: conv[types[k]](row[k]) for k in RECORD_COLUMNS}))
    return out


def records_to_json(records) -> str:
    return json.dumps([asdict(r) for r in records], indent=1)


def summary_to_csv(summary: ScalingSummary) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["method", "N", "runs", "rmse", "mean_queries", "mean_depth"])
    for c in summary.cells:
        w.writerow([c.method, c.N, c.runs, _fmt(c.rmse), _fmt(c.mean_queries), _fmt(c.mean_depth)])
    return buf.getvalue()


def plot_tables(summary: ScalingSummary) -> dict[str, str]:
    """CSV text keyed by metric; x = N, one column per method."""
    methods = list(dict.fromkeys(c.method for c in summary.cells))
    Ns = sorted({c.N for c in summary.cells})
    out = {}
    for metric, attr in (("rmse", "rmse"), ("queries", "mean_queries"), ("depth", "mean_depth")):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["N"] + methods)
        for N in Ns:
            row = [N]
            for m in methods:
                try:
                    row.append(_fmt(getattr(summary.cell(m, N), attr)))
                except KeyError:
                    row.append("")
            w.writerow(row)
        out[metric] = buf.getvalue()
    return out
