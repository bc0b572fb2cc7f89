"""Legendre polynomials, tensorized bases and projection onto truncated series."""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np

from osde_qmci.errors import DomainError, QuadratureError

logger = logging.getLogger(__name__)

MultiIndex = tuple[int, ...]


@dataclass(frozen=True)
class MultiIndexSet:
    """The lattice ``{0..L}^d`` of basis labels in lexicographic order.

    With ``exclude_zero`` the all-zeros label is dropped, which is the set the
    coefficient estimation loops over (the constant term is pinned).
    """

    d: int
    L: int
    exclude_zero: bool = False

    def __post_init__(self):
        if self.d < 1:
            raise DomainError(f"dimension must be >= 1, got {self.d}")
        if self.L < 0:
            raise DomainError(f"max degree must be >= 0, got {self.L}")

    @property
    def members(self) -> list[MultiIndex]:
        return _members(self.d, self.L, self.exclude_zero)

    def __len__(self):
        n = (self.L + 1) ** self.d
        return n - 1 if self.exclude_zero else n

    def __iter__(self):
        return iter(self.members)

    def __contains__(self, l):
        l = tuple(l)
        return (
            len(l) == self.d
            and all(0 <= li <= self.L for li in l)
            and not (self.exclude_zero and not any(l))
        )

    def position(self, l) -> int:
        """Flat position of ``l`` in the full (zero-including) lexicographic order."""
        return int(np.ravel_multi_index(tuple(l), (self.L + 1,) * self.d))


@lru_cache(maxsize=None)
def _members(d, L, exclude_zero):
    out = [tuple(m) for m in itertools.product(range(L + 1), repeat=d)]
    if exclude_zero:
        out = out[1:]
    return out


def _flag_outside(x):
    x = np.asarray(x, dtype=float)
    outside = np.abs(x) > 1.0
    if np.any(outside):
        logger.debug("%d evaluation point(s) outside [-1, 1]", int(np.count_nonzero(outside)))
    return x


def eval_p(l: int, x):
    """P_l(x) by the Bonnet recurrence. ``x`` may be a scalar or an array."""
    if l < 0:
        raise DomainError(f"Legendre degree must be non-negative, got {l}")
    return eval_p_all(l, x)[l]


def eval_p_all(L: int, x) -> np.ndarray:
    """All of P_0(x)..P_L(x); the leading axis runs over the degree."""
    if L < 0:
        raise DomainError(f"Legendre degree must be non-negative, got {L}")
    x = _flag_outside(x)
    out = np.empty((L + 1,) + x.shape)
    out[0] = 1.0
    if L >= 1:
        out[1] = x
    for n in range(1, L):
        out[n + 1] = ((2 * n + 1) * x * out[n] - n * out[n - 1]) / (n + 1)
    return out


def eval_tensor(l, x):
    """Product of per-axis Legendre polynomials.

    ``x`` has shape ``(..., d)``; the trailing axis must match ``len(l)``.
    """
    l = tuple(int(v) for v in l)
    x = np.asarray(x, dtype=float)
    if x.ndim == 0 or x.shape[-1] != len(l):
        raise DomainError(f"index of dimension {len(l)} applied to point of shape {x.shape}")
    if any(v < 0 for v in l):
        raise DomainError(f"negative Legendre degree in {l}")
    out = np.ones(x.shape[:-1])
    for axis, li in enumerate(l):
        out = out * eval_p(li, x[..., axis])
    return out


def norm_const(l) -> float:
    """C(l) = prod(l_i + 1/2), the reciprocal of the squared L2 norm of P_l."""
    return float(np.prod([li + 0.5 for li in l]))


def norm_consts(d: int, L: int) -> np.ndarray:
    """C(l) laid out on the ``(L+1,)*d`` coefficient grid."""
    c1 = np.arange(L + 1) + 0.5
    out = np.ones((L + 1,) * d)
    for axis in range(d):
        shape = [1] * d
        shape[axis] = L + 1
        out = out * c1.reshape(shape)
    return out


@lru_cache(maxsize=64)
def gauss_legendre(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes and weights on [-1, 1] (cached, read-only)."""
    x, w = np.polynomial.legendre.leggauss(n)
    x.flags.writeable = False
    w.flags.writeable = False
    return x, w


def _tensor_grid(n, d):
    x, w = gauss_legendre(n)
    pts = np.stack(np.meshgrid(*([x] * d), indexing="ij"), axis=-1).reshape(-1, d)
    wts = np.prod(np.stack(np.meshgrid(*([w] * d), indexing="ij"), axis=-1).reshape(-1, d), axis=-1)
    return pts, wts


def basis_matrix(L: int, pts: np.ndarray) -> np.ndarray:
    """Rows: tensor basis functions in lexicographic order. Columns: points of shape (n, d)."""
    d = pts.shape[1]
    per_axis = [eval_p_all(L, pts[:, a]) for a in range(d)]
    rows = []
    for l in _members(d, L, False):
        v = np.ones(pts.shape[0])
        for a, la in enumerate(l):
            v = v * per_axis[a][la]
        rows.append(v)
    return np.array(rows)


def _call_on_points(f, pts):
    arg = pts[:, 0] if pts.shape[1] == 1 else pts
    return np.broadcast_to(np.asarray(f(arg), dtype=float), (pts.shape[0],))


def project(
    f: Callable,
    L: int,
    d: int = 1,
    quad_tol: float = 1e-10,
    max_nodes: int = 2048,
):
    """Project ``f`` onto the Legendre basis of max degree ``L`` on ``[-1, 1]^d``.

    ``f`` is called on all quadrature nodes at once: with a 1-d array for
    ``d == 1`` and an ``(n, d)`` array otherwise. The per-axis Gauss-Legendre
    node count starts at ``L + 16`` and doubles until every coefficient's
    integral moves by less than ``quad_tol``.
    """
    from osde_qmci.density import LegendreSeries

    if quad_tol <= 0:
        raise DomainError("quad_tol must be positive")
    n = L + 16
    prev = None
    while True:
        pts, wts = _tensor_grid(n, d)
        fv = _call_on_points(f, pts)
        integrals = basis_matrix(L, pts) @ (wts * fv)
        if prev is not None:
            diff = np.abs(integrals - prev)
            if np.all(diff < quad_tol):
                break
            if 2 * n > max_nodes:
                worst = _members(d, L, False)[int(np.argmax(diff))]
                raise QuadratureError(
                    f"projection did not converge with {n} nodes per axis", where=worst
                )
        prev = integrals
        n *= 2
    coeffs = integrals.reshape((L + 1,) * d) * norm_consts(d, L)
    return LegendreSeries(d=d, L=L, coeffs=coeffs)
