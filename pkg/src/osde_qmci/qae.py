"""Classical simulation of maximum-likelihood amplitude estimation schedules.

Two schedules are simulated: random-depth QAE, whose Grover depths are drawn
uniformly from doubling ranges, and low-depth QAE, whose depths grow as a
power of the round index. Both read out the likelihood-maximizing amplitude.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numba
import numpy as np
from scipy import optimize

from osde_qmci.errors import DomainError

GRID_MIN = 10_000
GRID_PER_MULT = 8
THETA_TOL = 1e-12
P_FLOOR = 1e-300
# Guards floor/ceil against representation error when a power lands on an integer.
_INT_GUARD = 1e-9


@dataclass(frozen=True)
class Round:
    """Shots taken at one angle multiplier; ``mult`` is also the circuit depth."""

    mult: int
    shots: int
    ones: int


@dataclass(frozen=True)
class QaeOutcome:
    estimate: float
    total_queries: int
    max_depth: int
    rounds: tuple[Round, ...] = ()

    def to_dict(self):
        return {
            "estimate": self.estimate,
            "total_queries": self.total_queries,
            "max_depth": self.max_depth,
            "rounds": [{"mult": r.mult, "shots": r.shots, "ones": r.ones} for r in self.rounds],
        }

    @classmethod
    def from_dict(cls, obj):
        return cls(
            estimate=float(obj["estimate"]),
            total_queries=int(obj["total_queries"]),
            max_depth=int(obj["max_depth"]),
            rounds=tuple(Round(int(r["mult"]), int(r["shots"]), int(r["ones"])) for r in obj["rounds"]),
        )


def ledger_from_rounds(rounds) -> tuple[int, int]:
    """(total queries, max depth) implied by a list of rounds."""
    if not rounds:
        return 0, 0
    return sum(r.mult * r.shots for r in rounds), max(r.mult for r in rounds)


def _validate(a, eps, R):
    if not 0.0 <= a <= 1.0:
        raise DomainError(f"amplitude must lie in [0, 1], got {a}")
    if not 0.0 < eps < 1.0:
        raise DomainError(f"eps must lie in (0, 1), got {eps}")
    if R < 1:
        raise DomainError(f"R must be >= 1, got {R}")


def _bernoulli_ones(p, rng, size):
    return int(np.count_nonzero(rng.random(size) < p))


def rqae_schedule(eps: float) -> tuple[int, int]:
    """(K_eps, number of rounds) for random-depth QAE at accuracy ``eps``."""
    k_eps = math.floor(math.log2(1.0 / eps))
    n_rounds = k_eps + 1 if 2**k_eps < math.ceil(1.0 / eps) else k_eps
    return k_eps, n_rounds


def rqae_depth_range(i: int, eps: float, n_rounds: int) -> tuple[int, int]:
    """Inclusive depth range of round ``i >= 1``; the final round tops out at ceil(1/eps)."""
    if i == n_rounds - 1:
        return 2**i, math.ceil(1.0 / eps)
    return 2**i, 2 ** (i + 1)


def rqae_simulate(a: float, eps: float, R: int, rng: np.random.Generator) -> QaeOutcome:
    """Random-depth QAE on a known amplitude ``a``."""
    _validate(a, eps, R)
    theta = math.asin(math.sqrt(a))
    _, n_rounds = rqae_schedule(eps)
    rounds = [Round(1, R, _bernoulli_ones(a, rng, R))]
    for i in range(1, n_rounds):
        lo, hi = rqae_depth_range(i, eps, n_rounds)
        depths = rng.integers(lo, hi, size=R, endpoint=True)
        probs = np.sin(depths * theta) ** 2
        hits = rng.random(R) < probs
        for m in np.unique(depths):
            sel = depths == m
            rounds.append(Round(int(m), int(sel.sum()), int(hits[sel].sum())))
    total, depth = ledger_from_rounds(rounds)
    return QaeOutcome(mle_readout(rounds), total, depth, tuple(rounds))


def lqae_schedule(eps: float, beta: float) -> list[int]:
    """Grover counts m_1..m_K of low-depth QAE; round k runs at depth 2 m_k + 1."""
    K = math.ceil(max(eps ** (-2.0 * beta), math.log(1.0 / eps)) - _INT_GUARD)
    power = (1.0 - beta) / (2.0 * beta)
    return [math.floor(k**power + _INT_GUARD) for k in range(1, K + 1)]


def lqae_simulate(a: float, eps: float, beta: float, R: int, rng: np.random.Generator) -> QaeOutcome:
    """Low-depth QAE on a known amplitude ``a``."""
    _validate(a, eps, R)
    if not 0.0 < beta <= 1.0:
        raise DomainError(f"beta must lie in (0, 1], got {beta}")
    theta = math.asin(math.sqrt(a))
    rounds = []
    for m in lqae_schedule(eps, beta):
        mult = 2 * m + 1
        rounds.append(Round(mult, R, _bernoulli_ones(math.sin(mult * theta) ** 2, rng, R)))
    total, depth = ledger_from_rounds(rounds)
    return QaeOutcome(mle_readout(rounds), total, depth, tuple(rounds))


def choose_beta(N: int, eps: float) -> float:
    """Depth/query trade-off exponent log(sqrt N) / log(1/eps) for the low-depth baseline."""
    if not 0.0 < eps < 1.0:
        raise DomainError(f"eps must lie in (0, 1), got {eps}")
    if N < 1:
        raise DomainError(f"N must be >= 1, got {N}")
    beta = math.log(math.sqrt(N)) / math.log(1.0 / eps)
    if beta > 1.0 + 1e-12:
        raise DomainError(f"eps={eps} > 1/sqrt(N)={1 / math.sqrt(N)}: beta would exceed 1")
    if beta <= 0.0:
        raise DomainError("N = 1 gives beta = 0")
    return min(beta, 1.0)


def exact_backend(a: float) -> QaeOutcome:
    if not 0.0 <= a <= 1.0:
        raise DomainError(f"amplitude must lie in [0, 1], got {a}")
    return QaeOutcome(float(a), 0, 0, ())


def _aggregate(rounds):
    table = {}
    for r in rounds:
        if r.shots < 0 or not 0 <= r.ones <= r.shots:
            raise DomainError(f"inconsistent round {r}")
        shots, ones = table.get(r.mult, (0, 0))
        table[r.mult] = (shots + r.shots, ones + r.ones)
    mults = np.array(sorted(table), dtype=float)
    shots = np.array([table[m][0] for m in sorted(table)], dtype=float)
    ones = np.array([table[m][1] for m in sorted(table)], dtype=float)
    return mults, ones, shots - ones


def _loglik(theta, mults, ones, zeros):
    # theta: (n,) -> (n,)
    ang = np.multiply.outer(theta, mults)
    s = np.sin(ang) ** 2
    c = np.cos(ang) ** 2
    ll = np.where(ones > 0, ones * np.log(np.maximum(s, P_FLOOR)), 0.0)
    ll += np.where(zeros > 0, zeros * np.log(np.maximum(c, P_FLOOR)), 0.0)
    return ll.sum(axis=-1)


@lru_cache(maxsize=8)
def _log_tables(n):
    period = 2 * (n - 1)
    ang = np.arange(period) * ((math.pi / 2.0) / (n - 1))
    log_s = np.log(np.maximum(np.sin(ang) ** 2, P_FLOOR))
    log_c = np.log(np.maximum(np.cos(ang) ** 2, P_FLOOR))
    return log_s, log_c


@numba.njit(cache=True)
def _accumulate(n, mults, ones, zeros, log_s, log_c):
    period = 2 * (n - 1)
    out = np.zeros(n)
    for r in range(mults.shape[0]):
        m = mults[r] % period
        k1 = ones[r]
        k0 = zeros[r]
        idx = 0
        for j in range(n):
            v = 0.0
            if k1 > 0:
                v += k1 * log_s[idx]
            if k0 > 0:
                v += k0 * log_c[idx]
            out[j] += v
            idx += m
            if idx >= period:
                idx -= period
    return out


def _grid_loglik(n, mults, ones, zeros):
    """Log-likelihood on the grid theta_j = j * pi / (2 (n - 1)), j = 0..n-1.

    mult * theta_j is an integer multiple of the grid step, so both log terms
    are table lookups indexed by (mult * j) mod the period of sin^2.
    """
    log_s, log_c = _log_tables(n)
    return _accumulate(n, mults.astype(np.int64), ones, zeros, log_s, log_c)


def _golden_max(fn, lo, hi, tol):
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = fn(c), fn(d)
    while b - a > tol:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = fn(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = fn(d)
    x = 0.5 * (a + b)
    return x, fn(x)


def _score(t, mults, ones, zeros):
    ang = t * mults
    s, c = np.sin(ang), np.cos(ang)
    return float(np.sum(2.0 * mults * (ones * c / s - zeros * s / c)))


def _polish(t, ll, mults, ones, zeros):
    # golden section stalls near sqrt(machine eps) on a flat peak; finish on the score
    lo, hi = t - 1e-6, t + 1e-6
    if lo <= 0.0 or hi >= math.pi / 2.0:
        return t
    try:
        if not _score(lo, mults, ones, zeros) > 0.0 > _score(hi, mults, ones, zeros):
            return t
        r = optimize.brentq(_score, lo, hi, args=(mults, ones, zeros), xtol=1e-15, rtol=1e-15)
    except (ValueError, ZeroDivisionError, FloatingPointError):
        return t
    if float(_loglik(np.array([r]), mults, ones, zeros)[0]) >= ll - 1e-9:
        return r
    return t


def mle_readout(rounds) -> float:
    """Amplitude maximizing the product Bernoulli likelihood of the rounds.

    The search runs in angle space: a uniform grid on [0, pi/2] with at least
    8 points per unit of the largest multiplier, then golden-section
    refinement around the best grid point.
    """
    rounds = list(rounds)
    if not rounds or sum(r.shots for r in rounds) < 1:
        raise DomainError("need at least one round with shots")
    mults, ones, zeros = _aggregate(rounds)
    n = max(GRID_MIN, GRID_PER_MULT * int(mults.max()))
    ll = _grid_loglik(n, mults, ones, zeros)
    k = int(np.argmax(ll))
    h = (math.pi / 2.0) / (n - 1)
    best_t = k * h
    best_ll = float(_loglik(np.array([best_t]), mults, ones, zeros)[0])

    def fn(t):
        return float(_loglik(np.array([t]), mults, ones, zeros)[0])

    t, val = _golden_max(fn, max(0.0, best_t - h), min(math.pi / 2.0, best_t + h), THETA_TOL)
    if val > best_ll:
        best_t, best_ll = t, val
    best_t = _polish(best_t, best_ll, mults, ones, zeros)
    return math.sin(best_t) ** 2


@dataclass(frozen=True)
class ExactBackend:
    variant = "exact"

    def __call__(self, a, rng=None) -> QaeOutcome:
        return exact_backend(a)


@dataclass(frozen=True)
class RqaeBackend:
    eps: float
    R: int = 12
    variant = "rqae"

    def __post_init__(self):
        _validate(0.0, self.eps, self.R)

    def __call__(self, a, rng) -> QaeOutcome:
        return rqae_simulate(a, self.eps, self.R, rng)

    def with_eps(self, eps):
        return RqaeBackend(eps, self.R)


@dataclass(frozen=True)
class LqaeBackend:
    eps: float
    beta: float
    R: int = 12
    variant = "lqae"

    def __post_init__(self):
        _validate(0.0, self.eps, self.R)
        if not 0.0 < self.beta <= 1.0:
            raise DomainError(f"beta must lie in (0, 1], got {self.beta}")

    def __call__(self, a, rng) -> QaeOutcome:
        return lqae_simulate(a, self.eps, self.beta, self.R, rng)

    def with_eps(self, eps):
        return LqaeBackend(eps, self.beta, self.R)
