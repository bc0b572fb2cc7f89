"""Density transport through a time grid with amplitude-estimated Legendre coefficients.

Each step estimates every non-constant coefficient of the next density as
``a_l = (2 b_l - 1) C(l)``, where ``b_l`` is the probability of a one in an
amplitude-estimation experiment on the current estimate pushed through the
transition kernel, and ``b_l`` is read out by a (simulated) QAE backend. The
constant coefficient is pinned so every estimate has unit mass.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from osde_qmci.density import LegendreSeries, eval_series, min_on_grid
from osde_qmci.errors import DomainError, QuadratureError
from osde_qmci.legendre import MultiIndexSet, eval_p, eval_p_all, gauss_legendre, norm_const
from osde_qmci.qae import ExactBackend, QaeOutcome, RqaeBackend
from osde_qmci.quad import integrate_1d, integrate_2d
from osde_qmci.rbm import RbmKernel

logger = logging.getLogger(__name__)

BONA_FIDE_GRID = 201
MAX_NODES = 4096


# ---------------------------------------------------------------- schedules


@dataclass(frozen=True)
class DemoSchedule:
    """eps = base / sqrt(N); no failure probability."""

    base: float = 2.0**-10
    tag = "demo"


@dataclass(frozen=True)
class TheoremSchedule:
    """Per-coefficient accuracy and failure probability derived from a target ``eps``."""

    eps: float
    tag = "theorem"


@dataclass(frozen=True)
class ManualSchedule:
    eps: float
    delta: float | None = None
    tag = "manual"


@dataclass(frozen=True)
class InitialPoint:
    x0: tuple[float, ...]


def demo_times(N: int, t0: float = 0.0, t_first: float = 0.2, t_last: float = 0.6) -> tuple[float, ...]:
    """``t0`` followed by N equidistant points from ``t_first`` to ``t_last``.

    With N = 1 the single step goes straight to ``t_last``.
    """
    if N < 1:
        raise DomainError("N must be >= 1")
    if N == 1:
        return (t0, t_last)
    return (t0,) + tuple(float(t) for t in np.linspace(t_first, t_last, N))


@dataclass(frozen=True)
class PipelineConfig:
    N: int
    times: tuple[float, ...]
    L: int = 5
    d: int = 1
    x0: tuple[float, ...] = (0.0,)
    kernel: RbmKernel = field(default_factory=RbmKernel)
    backend: object = field(default_factory=lambda: RqaeBackend(2.0**-10, 12))
    quad_tol: float = 1e-8
    schedule: object = field(default_factory=DemoSchedule)

    def __post_init__(self):
        x0 = self.x0
        if np.ndim(x0) == 0:
            x0 = (float(x0),) * self.d
        object.__setattr__(self, "x0", tuple(float(v) for v in x0))
        object.__setattr__(self, "times", tuple(float(t) for t in self.times))
        if self.N < 1:
            raise DomainError("N must be >= 1")
        if len(self.times) != self.N + 1:
            raise DomainError(f"need N + 1 = {self.N + 1} time points, got {len(self.times)}")
        if any(b <= a for a, b in zip(self.times, self.times[1:])):
            raise DomainError("time points must be strictly increasing")
        if self.L < 1:
            raise DomainError("L must be >= 1")
        if len(self.x0) != self.d:
            raise DomainError(f"x0 must have {self.d} coordinates")
        if not self.quad_tol > 0:
            raise DomainError("quad_tol must be positive")
        lo, hi = getattr(self.kernel, "lower", -1.0), getattr(self.kernel, "upper", 1.0)
        if (lo, hi) != (-1.0, 1.0):
            raise DomainError("the transported density must live on [-1, 1]^d")

    @classmethod
    def demo(cls, N, **overrides):
        kw = dict(N=N, times=demo_times(N))
        kw.update(overrides)
        return cls(**kw)

    def to_dict(self):
        out = {
            "N": self.N,
            "times": list(self.times),
            "L": self.L,
            "d": self.d,
            "x0": list(self.x0),
            "quad_tol": self.quad_tol,
            "kernel": _plain(self.kernel),
            "backend": {"variant": getattr(self.backend, "variant", type(self.backend).__name__), **_plain(self.backend)},
            "schedule": {"tag": getattr(self.schedule, "tag", "?"), **_plain(self.schedule)},
        }
        return out


def _plain(obj):
    if hasattr(obj, "__dataclass_fields__"):
        return {k: getattr(obj, k) for k in obj.__dataclass_fields__}
    return {}


def epsilon_schedule(cfg: PipelineConfig) -> tuple[float, float | None]:
    """(per-coefficient accuracy, per-coefficient failure probability or None)."""
    sch = cfg.schedule
    if isinstance(sch, DemoSchedule):
        return sch.base / math.sqrt(cfg.N), None
    if isinstance(sch, TheoremSchedule):
        shared = (cfg.L + 0.5) ** cfg.d * (math.log(2 * cfg.L + 1) + 0.5) ** (cfg.d / 2)
        eps_p = sch.eps / (4.0 * math.sqrt(2.0 * cfg.N) * shared)
        delta_p = sch.eps / (8.0 * math.sqrt(2.0) * cfg.N * shared)
        return eps_p, delta_p
    if isinstance(sch, ManualSchedule):
        return sch.eps, sch.delta
    raise DomainError(f"unknown schedule {sch!r}")


def configured_backend(cfg: PipelineConfig):
    """The backend with its accuracy set from the schedule (the exact backend is left alone)."""
    eps, _ = epsilon_schedule(cfg)
    if hasattr(cfg.backend, "with_eps"):
        return cfg.backend.with_eps(eps)
    return cfg.backend


# ------------------------------------------------------- kernel quadratures


def _interval(kernel, t_i, t_next):
    if not t_next > t_i:
        raise DomainError(f"need t_next > t_i, got {t_i}, {t_next}")
    if getattr(kernel, "time_homogeneous", isinstance(kernel, RbmKernel)):
        return 0.0, round(t_next - t_i, 13)
    return float(t_i), float(t_next)


def _converge(build, L, quad_tol, what):
    n = L + 16
    prev = None
    while True:
        cur = build(n)
        if prev is not None:
            diff = float(np.max(np.abs(cur - prev)))
            if diff < quad_tol:
                return cur
            if 2 * n > MAX_NODES:
                raise QuadratureError(f"{what} did not converge with {n} nodes (change {diff:.3g})")
        prev = cur
        n *= 2


@lru_cache(maxsize=256)
def transfer_matrix_1d(kernel, s: float, s_next: float, L: int, quad_tol: float) -> np.ndarray:
    """T[l, l'] = int int P_l'(x) p(y | x) P_l(y) dx dy for one axis, l, l' = 0..L."""

    def build(n):
        x, w = gauss_legendre(n)
        pm = kernel.density(x[:, None], s, x[None, :], s_next)  # rows: from x, cols: to y
        basis = eval_p_all(L, x) * w  # (L+1, n), weights folded in
        return basis @ pm.T @ basis.T

    out = _converge(build, L, quad_tol, "transfer matrix")
    out.flags.writeable = False
    return out


@lru_cache(maxsize=256)
def initial_vector_1d(kernel, x0: float, s: float, s_next: float, L: int, quad_tol: float) -> np.ndarray:
    """v[l] = int p(y | x0) P_l(y) dy for one axis."""

    def build(n):
        y, w = gauss_legendre(n)
        return eval_p_all(L, y) @ (w * kernel.density(x0, s, y, s_next))

    out = _converge(build, L, quad_tol, "initial projection")
    out.flags.writeable = False
    return out


def _kron_all(mats):
    out = mats[0]
    for m in mats[1:]:
        out = np.kron(out, m)
    return out


def transfer_matrix(kernel, t_i, t_next, L, quad_tol, d=1):
    """Tensor-product transfer matrix over the full lexicographic index set."""
    s, s_next = _interval(kernel, t_i, t_next)
    return _kron_all([transfer_matrix_1d(kernel, s, s_next, L, quad_tol)] * d)


def initial_vector(kernel, x0, t_i, t_next, L, quad_tol):
    s, s_next = _interval(kernel, t_i, t_next)
    return _kron_all([initial_vector_1d(kernel, float(x), s, s_next, L, quad_tol) for x in x0])


def transfer_coefficients(kernel, t_i, t_next, L, quad_tol=1e-8, d=1):
    """c[l, l'] = C(l) int int P_l'(x) p(y | x) P_l(y) over all l and l' != 0, with row sums of |c|.

    Error accumulation across steps stays bounded when every row sum is at most one.
    """
    T = transfer_matrix(kernel, t_i, t_next, L, quad_tol, d)
    full = MultiIndexSet(d, L)
    C = np.array([norm_const(l) for l in full.members])
    c = (C[:, None] * T)[:, 1:]
    return c, np.abs(c).sum(axis=1)


# ------------------------------------------------------- coefficient targets


def _targets_via_transfer(prev, kernel, t_i, t_next, L, quad_tol, d):
    if isinstance(prev, InitialPoint):
        v = initial_vector(kernel, prev.x0, t_i, t_next, L, quad_tol)
        return 0.5 * (v[0] + v)
    T = transfer_matrix(kernel, t_i, t_next, L, quad_tol, d)
    a = prev.flat
    return 0.5 * (T[0] @ a + T @ a)


def coefficient_target(prev, kernel, t_i, t_next, l, quad_tol=1e-8, method="transfer"):
    """Probability ``b_l`` that the amplitude-estimation oracle for coefficient ``l`` outputs one.

    ``prev`` is an :class:`InitialPoint` or the previous density estimate.
    ``method="transfer"`` uses the cached Gauss-Legendre transfer matrix;
    ``method="adaptive"`` integrates directly with the adaptive rules (d = 1 only).
    """
    l = tuple(l)
    d = len(prev.x0) if isinstance(prev, InitialPoint) else prev.d
    if len(l) != d or not any(l):
        raise DomainError(f"coefficient index must be a non-zero {d}-dim label, got {l}")
    L = max(max(l), 1) if isinstance(prev, InitialPoint) else prev.L
    if method == "transfer":
        full = MultiIndexSet(d, L)
        b = float(_targets_via_transfer(prev, kernel, t_i, t_next, L, quad_tol, d)[full.position(l)])
    elif method == "adaptive":
        if d != 1:
            raise DomainError("adaptive targets are one-dimensional only")
        b = _adaptive_target(prev, kernel, t_i, t_next, l[0], quad_tol)
    else:
        raise DomainError(f"unknown method {method!r}")
    return _clamp_unit(b)[0]


def _adaptive_target(prev, kernel, t_i, t_next, l, quad_tol):
    def weight(y):
        return 0.5 * (1.0 + eval_p(l, y))

    if isinstance(prev, InitialPoint):
        x0 = prev.x0[0]
        return integrate_1d(lambda y: kernel.density(x0, t_i, y, t_next) * weight(y), -1.0, 1.0, quad_tol).value

    def f(x, y):
        return eval_series(prev, x) * kernel.density(x, t_i, y, t_next) * weight(y)

    return integrate_2d(f, ((-1.0, 1.0), (-1.0, 1.0)), quad_tol).value


def _clamp_unit(b):
    b = np.asarray(b, dtype=float)
    out = np.clip(b, 0.0, 1.0)
    events = int(np.count_nonzero(out != b))
    if events:
        logger.info("clamped %d coefficient target(s) into [0, 1]", events)
    return (float(out) if out.ndim == 0 else out), events


# -------------------------------------------------------------------- steps


@dataclass
class StepLedger:
    total_queries: int = 0
    max_depth: int = 0
    clamp_events: int = 0
    outcomes: list = field(default_factory=list)

    def add(self, outcome: QaeOutcome):
        self.outcomes.append(outcome)
        self.total_queries += outcome.total_queries
        self.max_depth = max(self.max_depth, outcome.max_depth)


def _seed_sequence(seed):
    if isinstance(seed, np.random.SeedSequence):
        return seed
    return np.random.SeedSequence(seed)


def _child(seq: np.random.SeedSequence, *key) -> np.random.SeedSequence:
    return np.random.SeedSequence(seq.entropy, spawn_key=tuple(seq.spawn_key) + tuple(key))


def step(prev, kernel, t_i, t_next, cfg: PipelineConfig, seed=None, index=None):
    """One transport step; returns the next density estimate and its ledger.

    Coefficient ``l`` draws from its own stream keyed by its lexicographic
    position, so results do not depend on evaluation order.
    """
    backend = configured_backend(cfg)
    seq = _seed_sequence(seed)
    targets, clamps = _clamp_unit(_targets_via_transfer(prev, kernel, t_i, t_next, cfg.L, cfg.quad_tol, cfg.d))
    full = MultiIndexSet(cfg.d, cfg.L)
    coeffs = np.zeros(len(full))
    ledger = StepLedger(clamp_events=clamps)
    for pos, l in enumerate(full.members):
        if pos == 0:
            continue
        rng = np.random.default_rng(_child(seq, pos))
        outcome = backend(float(targets[pos]), rng)
        ledger.add(outcome)
        coeffs[pos] = (2.0 * outcome.estimate - 1.0) * norm_const(l)
    series = LegendreSeries.from_flat(cfg.d, cfg.L, coeffs, is_density=True, time_index=index)
    return series, ledger


@dataclass
class DensityTrajectory:
    config: PipelineConfig
    densities: list = field(default_factory=list)
    ledgers: list = field(default_factory=list)
    bona_fide: list = field(default_factory=list)

    @property
    def total_queries(self) -> int:
        return sum(s.total_queries for s in self.ledgers)

    @property
    def max_depth(self) -> int:
        return max((s.max_depth for s in self.ledgers), default=0)

    @property
    def final(self) -> LegendreSeries:
        return self.densities[-1]

    def exceed_estimate(self) -> float:
        """Estimated Pr(X(t_N) > x0), integrating the final estimate exactly."""
        from osde_qmci.density import interval_probability

        return interval_probability(self.final, self.config.x0, (1.0,) * self.config.d)

    def to_dict(self):
        return {
            "config": self.config.to_dict(),
            "steps": [
                {
                    "i": series.time_index,
                    "t": self.config.times[series.time_index],
                    "coeffs": [float(v) for v in series.flat],
                    "total_queries": ledger.total_queries,
                    "max_depth": ledger.max_depth,
                    "clamp_events": ledger.clamp_events,
                    "min_on_grid": flag[0],
                    "argmin": flag[1],
                    "bona_fide": flag[0] >= 0.0,
                }
                for series, ledger, flag in zip(self.densities, self.ledgers, self.bona_fide)
            ],
            "total_queries": self.total_queries,
            "max_depth": self.max_depth,
        }


class PipelineError(RuntimeError):
    def __init__(self, message, partial: DensityTrajectory):
        super().__init__(message)
        self.partial = partial


def run(cfg: PipelineConfig, seed=None) -> DensityTrajectory:
    """Chain ``step`` from the initial point through all N time intervals."""
    seq = _seed_sequence(seed)
    traj = DensityTrajectory(cfg)
    prev = InitialPoint(cfg.x0)
    for i in range(cfg.N):
        try:
            series, ledger = step(prev, cfg.kernel, cfg.times[i], cfg.times[i + 1], cfg, _child(seq, i), index=i + 1)
        except (DomainError, QuadratureError, ArithmeticError) as exc:
            raise PipelineError(f"step {i + 1} failed: {exc}", traj) from exc
        traj.densities.append(series)
        traj.ledgers.append(ledger)
        traj.bona_fide.append(min_on_grid(series, BONA_FIDE_GRID))
        prev = series
    return traj
