"""Command-line entry point: ``osde-qmci {pipeline,bench,qae,rbm,project}``."""

from __future__ import annotations

import argparse
import configparser
import csv
import io
import json
import logging
import math
import sys
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from osde_qmci import bench
from osde_qmci.density import interval_probability
from osde_qmci.errors import DomainError, QuadratureError
from osde_qmci.legendre import project
from osde_qmci.pipeline import (
    DemoSchedule,
    ManualSchedule,
    PipelineConfig,
    PipelineError,
    TheoremSchedule,
    demo_times,
    run,
)
from osde_qmci.qae import ExactBackend, LqaeBackend, RqaeBackend, choose_beta, lqae_simulate, rqae_simulate
from osde_qmci.rbm import RbmKernel, transition_density

log = logging.getLogger("osde_qmci")

EXIT_OK, EXIT_RUNTIME, EXIT_USAGE = 0, 1, 2

SCHEMA = {
    "kernel": {"mu": float, "sigma": float, "lower": float, "upper": float, "n_c": int},
    "pipeline": {
        "N": int, "L": int, "x0": float, "t0": float, "t_first": float, "t_last": float,
        "quad_tol": float, "backend": str, "R": int, "schedule": str, "rqae_base": float,
        "eps": float, "delta": float, "beta": float,
    },
    "bench": {
        "Ns": "ints", "runs": int, "methods": "strs", "lqae_eps": float, "target_rmse": float,
        "lowdepth_mode": str, "classical_mode": str, "reference_tol": float,
    },
    "output": {"seed": int, "out_dir": str, "accounting": str},
}


class ConfigError(Exception):
    pass


@dataclass
class RunConfig:
    kernel: dict
    pipeline: dict
    bench: dict = field(default_factory=dict)
    output: dict = field(default_factory=dict)

    def kernel_obj(self) -> RbmKernel:
        return RbmKernel(**self.kernel)

    def pipeline_config(self) -> PipelineConfig:
        p = self.pipeline
        N = p.get("N", 8)
        base = p.get("rqae_base", 2.0**-10)
        kind = p.get("backend", "rqae")
        R = p.get("R", 12)
        if kind == "exact":
            backend = ExactBackend()
        elif kind == "rqae":
            backend = RqaeBackend(base, R)
        elif kind == "lqae":
            if "beta" not in p:
                raise ConfigError("pipeline.beta is required for the lqae backend")
            backend = LqaeBackend(base, p["beta"], R)
        else:
            raise ConfigError(f"pipeline.backend: unknown backend {kind!r}")
        sched = p.get("schedule", "demo")
        if sched == "demo":
            schedule = DemoSchedule(base)
        elif sched in ("theorem", "manual"):
            if "eps" not in p:
                raise ConfigError(f"pipeline.eps is required for the {sched} schedule")
            schedule = TheoremSchedule(p["eps"]) if sched == "theorem" else ManualSchedule(p["eps"], p.get("delta"))
        else:
            raise ConfigError(f"pipeline.schedule: unknown schedule {sched!r}")
        return PipelineConfig(
            N=N,
            times=demo_times(N, p.get("t0", 0.0), p.get("t_first", 0.2), p.get("t_last", 0.6)),
            L=p.get("L", 5),
            x0=(p.get("x0", 0.0),),
            kernel=self.kernel_obj(),
            backend=backend,
            quad_tol=p.get("quad_tol", 1e-8),
            schedule=schedule,
        )

    def bench_config(self) -> bench.BenchConfig:
        p, b = self.pipeline, self.bench
        return bench.BenchConfig(
            kernel=self.kernel_obj(),
            x0=p.get("x0", 0.0),
            t0=p.get("t0", 0.0),
            t_first=p.get("t_first", 0.2),
            t_last=p.get("t_last", 0.6),
            L=p.get("L", 5),
            R=p.get("R", 12),
            rqae_base=p.get("rqae_base", 2.0**-10),
            lqae_eps=b.get("lqae_eps", 0.0029),
            quad_tol=p.get("quad_tol", 1e-8),
            reference_tol=b.get("reference_tol", 1e-10),
            target_rmse=b.get("target_rmse", 0.0004),
            lowdepth_mode=b.get("lowdepth_mode", "all"),
            proposed_backend="exact" if p.get("backend") == "exact" else "rqae",
            classical_mode=b.get("classical_mode", "analytic"),
        )


def _convert(section, key, raw):
    kind = SCHEMA[section][key]
    try:
        if kind == "ints":
            return [int(v) for v in raw.split(",") if v.strip()]
        if kind == "strs":
            return [v.strip() for v in raw.split(",") if v.strip()]
        return kind(raw)
    except ValueError:
        raise ConfigError(f"{section}.{key}: cannot parse {raw!r}") from None


def parse_config(text: str, require=("kernel", "pipeline")) -> RunConfig:
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(str(exc).splitlines()[0]) from None
    parsed = {}
    for section in cp.sections():
        if section not in SCHEMA:
            raise ConfigError(f"unknown section [{section}]")
        parsed[section] = {}
        for key, raw in cp.items(section):
            if key not in SCHEMA[section]:
                raise ConfigError(f"unknown key {section}.{key}")
            parsed[section][key] = _convert(section, key, raw)
    for section in require:
        if section not in parsed:
            raise ConfigError(f"missing section [{section}]")
    cfg = RunConfig(parsed.get("kernel", {}), parsed.get("pipeline", {}), parsed.get("bench", {}), parsed.get("output", {}))
    for m in cfg.bench.get("methods", []):
        if m not in bench.METHODS:
            raise ConfigError(f"bench.methods: unknown method {m!r}")
    if cfg.output.get("accounting", "up-units") not in ("up-units", "raw-grover"):
        raise ConfigError("output.accounting must be up-units or raw-grover")
    try:
        cfg.pipeline_config()
        cfg.bench_config()
    except (DomainError, TypeError) as exc:
        raise ConfigError(str(exc)) from None
    return cfg


def default_config_text() -> str:
    return resources.files("osde_qmci").joinpath("default.ini").read_text()


def load_config(path) -> RunConfig:
    if path is None:
        return parse_config(default_config_text())
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    return parse_config(text)


def _settings(args, cfg: RunConfig):
    seed = args.seed if args.seed is not None else cfg.output.get("seed", 0)
    out_dir = Path(args.out_dir if args.out_dir is not None else cfg.output.get("out_dir", "out"))
    accounting = args.accounting or cfg.output.get("accounting", "up-units")
    return seed, out_dir, accounting


def _write(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        fh.write(text)


# ----------------------------------------------------------------- commands


def cmd_pipeline(args) -> int:
    cfg = load_config(args.config)
    seed, out_dir, _ = _settings(args, cfg)
    pcfg = cfg.pipeline_config()
    traj = run(pcfg, seed)
    q_hat = traj.exceed_estimate()
    doc = traj.to_dict()
    doc["seed"] = seed
    doc["q_hat"] = q_hat
    _write(out_dir / "trajectory.json", json.dumps(doc, indent=1) + "\n")
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["i"] + [f"a{k}" for k in range(len(traj.final.flat))] + ["queries", "depth", "min_on_grid"])
    for series, ledger, flag in zip(traj.densities, traj.ledgers, traj.bona_fide):
        w.writerow([series.time_index] + [repr(float(v)) for v in series.flat]
                   + [ledger.total_queries, ledger.max_depth, repr(flag[0])])
    _write(out_dir / "steps.csv", buf.getvalue())
    print(f"q_hat_N = {q_hat!r}")
    return EXIT_OK


def cmd_bench(args) -> int:
    cfg = load_config(args.config)
    seed, out_dir, accounting = _settings(args, cfg)
    bcfg = cfg.bench_config()
    Ns = args.Ns or cfg.bench.get("Ns", list(bench.DEMO_NS))
    runs = args.runs or cfg.bench.get("runs", 10)
    methods = cfg.bench.get("methods", list(bench.METHODS))
    records = bench.run_sweep(Ns, runs, methods, seed, bcfg, workers=args.threads)
    summary = bench.summarize(records, accounting)
    _write(out_dir / "records.csv", bench.records_to_csv(records))
    _write(out_dir / "records.json", bench.records_to_json(records) + "\n")
    _write(out_dir / "summary.csv", bench.summary_to_csv(summary))
    _write(out_dir / "summary.json", json.dumps(summary.to_dict(), indent=1) + "\n")
    for metric, text in bench.plot_tables(summary).items():
        _write(out_dir / "plotdata" / f"{metric}.csv", text)
    _write(out_dir / "plotdata" / "reference_lines.csv", _reference_lines(summary))
    for method, s in summary.slopes.items():
        print(f"{method}: queries slope {s['queries'].slope:.3f} +- {s['queries'].stderr:.3f}, "
              f"depth slope {s['depth'].slope:.3f} +- {s['depth'].stderr:.3f}")
    failed = [r for r in records if r.error]
    if failed:
        print(f"{len(failed)} cell(s) failed; see records.csv", file=sys.stderr)
    return EXIT_OK


def _reference_lines(summary) -> str:
    """Asymptotic power laws anchored at the smallest N of the series method."""
    Ns = sorted({c.N for c in summary.cells})
    try:
        anchor = summary.cell(bench.PROPOSED, Ns[0])
    except KeyError:
        anchor = summary.cells[0]
    methods = [m for m in bench.POWER_LAWS if bench.POWER_LAWS[m][0] is not None]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["N"] + [f"{m}_queries" for m in methods] + [f"{m}_depth" for m in methods])
    q = {m: bench.power_law_line(m, Ns, Ns[0], anchor.mean_queries) for m in methods}
    d = {m: bench.power_law_line(m, Ns, Ns[0], anchor.mean_depth, "depth") for m in methods}
    for k, N in enumerate(Ns):
        w.writerow([N] + [repr(q[m][k]) for m in methods] + [repr(d[m][k]) for m in methods])
    return buf.getvalue()


def cmd_qae(args) -> int:
    if args.variant == "lqae":
        if args.beta is None and args.N is None:
            raise ConfigError("--variant lqae needs --beta or --N")
        beta = args.beta if args.beta is not None else choose_beta(args.N, args.eps)
    seed = args.seed if args.seed is not None else 0
    root = np.random.SeedSequence(seed)
    trials = []
    for k in range(args.trials):
        rng = np.random.default_rng(root.spawn(1)[0])
        if args.variant == "rqae":
            out = rqae_simulate(args.a, args.eps, args.R, rng)
        else:
            out = lqae_simulate(args.a, args.eps, beta, args.R, rng)
        trials.append({"estimate": out.estimate, "total_queries": out.total_queries, "max_depth": out.max_depth})
    est = np.array([t["estimate"] for t in trials])
    doc = {
        "variant": args.variant,
        "a": args.a,
        "eps": args.eps,
        "R": args.R,
        "seed": seed,
        "trials": trials,
        "aggregate": {
            "mean": float(est.mean()),
            "bias": float(est.mean() - args.a),
            "rmse": float(np.sqrt(np.mean((est - args.a) ** 2))),
            "mean_queries": float(np.mean([t["total_queries"] for t in trials])),
            "max_depth": int(max(t["max_depth"] for t in trials)),
        },
    }
    if args.variant == "lqae":
        doc["beta"] = beta
    print(json.dumps(doc))
    return EXIT_OK


def cmd_rbm(args) -> int:
    cfg = load_config(args.config) if args.config else parse_config(default_config_text())
    k = cfg.kernel_obj()
    x0 = args.x0 if args.x0 is not None else cfg.pipeline.get("x0", 0.0)
    xs = np.linspace(k.lower, k.upper, args.points)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["x", "density"])
    for x, p in zip(xs, transition_density(k, x0, 0.0, xs, args.dt)):
        w.writerow([repr(float(x)), repr(float(p))])
    if args.out_dir:
        _write(Path(args.out_dir) / "rbm_density.csv", buf.getvalue())
    else:
        sys.stdout.write(buf.getvalue())
    return EXIT_OK


TEST_FUNCTIONS = {
    "exp": np.exp,
    "gauss": lambda x: np.exp(-4.0 * np.asarray(x) ** 2),
    "runge": lambda x: 1.0 / (1.0 + 25.0 * np.asarray(x) ** 2),
    "abs": np.abs,
    "cos": lambda x: np.cos(np.pi * np.asarray(x)),
}


def cmd_project(args) -> int:
    series = project(TEST_FUNCTIONS[args.function], args.L, 1, args.quad_tol)
    doc = series.to_dict()
    doc["function"] = args.function
    doc["mass_on_upper_half"] = interval_probability(series, [0.0], [1.0])
    text = json.dumps(doc) + "\n"
    if args.out_dir:
        _write(Path(args.out_dir) / f"project_{args.function}.json", text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None)
    common.add_argument("--threads", type=int, default=1, help="worker processes for sweeps")
    common.add_argument("--out-dir", default=None)
    common.add_argument("--accounting", choices=["up-units", "raw-grover"], default=None)
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="osde-qmci", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("pipeline", parents=[common], help="transport one density trajectory")
    sp.add_argument("config", nargs="?", default=None)
    sp.set_defaults(func=cmd_pipeline)

    sb = sub.add_parser("bench", parents=[common], help="sweep N and compare methods")
    sb.add_argument("config", nargs="?", default=None)
    sb.add_argument("--Ns", type=lambda s: [int(v) for v in s.split(",")], default=None)
    sb.add_argument("--runs", type=int, default=None)
    sb.set_defaults(func=cmd_bench)

    sq = sub.add_parser("qae", parents=[common], help="repeat one simulated amplitude estimation")
    sq.add_argument("--a", type=float, required=True)
    sq.add_argument("--eps", type=float, required=True)
    sq.add_argument("--R", type=int, default=12)
    sq.add_argument("--variant", choices=["rqae", "lqae"], default="rqae")
    sq.add_argument("--beta", type=float, default=None)
    sq.add_argument("--N", type=int, default=None)
    sq.add_argument("--trials", type=int, default=100)
    sq.set_defaults(func=cmd_qae)

    sr = sub.add_parser("rbm", parents=[common], help="dump a transition density table")
    sr.add_argument("config", nargs="?", default=None)
    sr.add_argument("--dt", type=float, default=0.2)
    sr.add_argument("--x0", type=float, default=None)
    sr.add_argument("--points", type=int, default=201)
    sr.set_defaults(func=cmd_rbm)

    so = sub.add_parser("project", parents=[common], help="Legendre projection of a test function")
    so.add_argument("--function", choices=sorted(TEST_FUNCTIONS), default="exp")
    so.add_argument("--L", type=int, default=5)
    so.add_argument("--quad-tol", type=float, default=1e-10)
    so.set_defaults(func=cmd_project)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DomainError as exc:
        print(f"invalid argument: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (PipelineError, QuadratureError, OSError, ArithmeticError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
