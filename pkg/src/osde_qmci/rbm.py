"""Two-sided reflected Brownian motion with drift on a bounded interval."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

from osde_qmci.errors import DomainError
from osde_qmci.quad import integrate_1d

logger = logging.getLogger(__name__)

EM_SUBSTEPS = 32


@dataclass(frozen=True)
class RbmKernel:
    """dX = mu dt + sigma dW, reflected at ``lower`` and ``upper``.

    ``n_c`` truncates the image sums of the transition density.
    """

    mu: float = 0.5
    sigma: float = 1.0
    lower: float = -1.0
    upper: float = 1.0
    n_c: int = 5

    def __post_init__(self):
        if not self.sigma > 0:
            raise DomainError(f"sigma must be positive, got {self.sigma}")
        if not self.lower < self.upper:
            raise DomainError(f"need lower < upper, got {self.lower}, {self.upper}")
        if self.n_c < 0:
            raise DomainError(f"n_c must be non-negative, got {self.n_c}")

    def density(self, x, s, x_next, s_next):
        return transition_density(self, x, s, x_next, s_next)

    def stationary_density(self, x):
        k = 2.0 * self.mu / self.sigma**2
        x = np.asarray(x, dtype=float)
        if k == 0.0:
            return np.full_like(x, 1.0 / (self.upper - self.lower))
        return k * np.exp(k * x) / (np.exp(k * self.upper) - np.exp(k * self.lower))


def normal_cdf(z):
    """Standard normal CDF."""
    return ndtr(z)


def raw_transition_density(k: RbmKernel, x, s, x_next, s_next):
    """Truncated image-sum density before flooring; may dip a hair below zero.

    In the image-sum formula the barrier symbol ``c`` is the lower barrier
    and ``d`` the upper one; with the opposite assignment the one-sided sums
    diverge in ``n``.
    """
    tau = s_next - s
    if not np.all(tau > 0):
        raise DomainError(f"need s_next > s, got s={s}, s_next={s_next}")
    x = np.asarray(x, dtype=float)
    y = np.asarray(x_next, dtype=float)
    mu, sig = k.mu, k.sigma
    c, d = k.lower, k.upper
    s2 = sig * sig
    var = s2 * tau
    sd = sig * np.sqrt(tau)
    pref = 1.0 / (sig * np.sqrt(2.0 * np.pi * tau))
    drift = mu * tau
    total = np.zeros(np.broadcast_shapes(x.shape, y.shape))
    for n in range(-k.n_c, k.n_c + 1):
        total += pref * np.exp(
            2.0 * mu * n * (c - d) / s2 - (y + 2.0 * n * (d - c) - x - drift) ** 2 / (2.0 * var)
        )
        total += pref * np.exp(
            -2.0 * mu * (n * d - (n + 1) * c + x) / s2
            - (2.0 * n * d - 2.0 * (n + 1) * c + x + y - drift) ** 2 / (2.0 * var)
        )
    if mu != 0.0:
        g = 2.0 * mu / s2
        for n in range(0, k.n_c + 1):
            z3 = (drift + 2.0 * n * d - 2.0 * (n + 1) * c + x + y) / sd
            total -= g * np.exp(g * (n * d - (n + 1) * c + y)) * ndtr(-z3)
            z4 = (drift - 2.0 * (n + 1) * d + 2.0 * n * c + x + y) / sd
            total += g * np.exp(g * (n * c - (n + 1) * d + y)) * ndtr(z4)
    return total


def transition_density(k: RbmKernel, x, s, x_next, s_next):
    """p(x_next, s_next; x, s), floored at zero. Vectorized over x and x_next."""
    raw = raw_transition_density(k, x, s, x_next, s_next)
    neg = raw < 0
    if np.any(neg):
        logger.debug("floored %d negative density value(s)", int(np.count_nonzero(neg)))
        raw = np.where(neg, 0.0, raw)
    return raw if raw.ndim else float(raw)


def floor_events(k: RbmKernel, x, s, x_next, s_next) -> int:
    """How many of the given density evaluations would be floored."""
    return int(np.count_nonzero(raw_transition_density(k, x, s, x_next, s_next) < 0))


def exceed_probability(k: RbmKernel, x0: float, t0: float, tN: float, tol: float = 1e-10) -> float:
    """Pr(X(tN) > x0 | X(t0) = x0)."""
    if not tN > t0:
        raise DomainError("need tN > t0")
    return integrate_1d(lambda y: transition_density(k, x0, t0, y, tN), x0, k.upper, tol).value


def _reflect(x, lo, hi):
    # fold repeatedly; a single substep never crosses more than a few widths
    while True:
        below = x < lo
        above = x > hi
        if not (below.any() or above.any()):
            return x
        x = np.where(below, 2.0 * lo - x, x)
        x = np.where(above, 2.0 * hi - x, x)


def sample_step(k: RbmKernel, x, dt: float, rng: np.random.Generator):
    """Advance ``x`` (scalar or array) by ``dt`` with reflected Euler-Maruyama substeps."""
    if not dt > 0:
        raise DomainError("dt must be positive")
    scalar = np.ndim(x) == 0
    x = np.array(x, dtype=float, ndmin=1)
    h = dt / EM_SUBSTEPS
    sh = k.sigma * np.sqrt(h)
    for _ in range(EM_SUBSTEPS):
        x = x + k.mu * h + sh * rng.standard_normal(x.shape)
        x = _reflect(x, k.lower, k.upper)
    return float(x[0]) if scalar else x
