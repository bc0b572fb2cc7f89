"""Truncated Legendre series as density estimates, with their functionals."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from osde_qmci.errors import DomainError, QuadratureError
from osde_qmci.legendre import _tensor_grid, eval_p_all, norm_consts
from osde_qmci.quad import integrate_1d


@dataclass(frozen=True, eq=False)
class LegendreSeries:
    """``sum_l a_l P_l`` over ``{0..L}^d``.

    ``coeffs`` has shape ``(L+1,)*d``; its C-order ravel is the lexicographic
    coefficient vector. A series flagged ``is_density`` has its constant
    coefficient pinned to ``2**-d`` so that it integrates to one.
    """

    d: int
    L: int
    coeffs: np.ndarray
    is_density: bool = False
    time_index: int | None = None
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=float)
        shape = (self.L + 1,) * self.d
        if c.shape != shape:
            if c.size != np.prod(shape):
                raise DomainError(f"expected {np.prod(shape)} coefficients, got {c.size}")
            c = c.reshape(shape)
        if self.is_density:
            c[(0,) * self.d] = 2.0**-self.d
        c.flags.writeable = False
        object.__setattr__(self, "coeffs", c)

    @classmethod
    def from_flat(cls, d, L, flat, **kw):
        return cls(d=d, L=L, coeffs=np.asarray(flat, dtype=float).reshape((L + 1,) * d), **kw)

    @classmethod
    def uniform(cls, d=1, L=1):
        return cls(d=d, L=L, coeffs=np.zeros((L + 1,) * d), is_density=True)

    @property
    def flat(self) -> np.ndarray:
        return self.coeffs.ravel()

    def __getitem__(self, l):
        return float(self.coeffs[tuple(l)])

    def __call__(self, x):
        return eval_series(self, x)

    def __eq__(self, other):
        if not isinstance(other, LegendreSeries):
            return NotImplemented
        return (
            self.d == other.d
            and self.L == other.L
            and self.is_density == other.is_density
            and self.time_index == other.time_index
            and np.array_equal(self.coeffs, other.coeffs)
        )

    def to_dict(self) -> dict:
        out = {"d": self.d, "L": self.L, "coeffs": [float(v) for v in self.flat]}
        if self.is_density:
            out["is_density"] = True
            out["time_index"] = self.time_index
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, obj):
        return cls.from_flat(
            obj["d"],
            obj["L"],
            obj["coeffs"],
            is_density=bool(obj.get("is_density", False)),
            time_index=obj.get("time_index"),
        )

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))


def _as_points(series, x):
    x = np.asarray(x, dtype=float)
    if series.d == 1 and (x.ndim == 0 or x.shape[-1] != 1):
        x = x[..., None]
    if x.shape[-1] != series.d:
        raise DomainError(f"series of dimension {series.d} evaluated at shape {x.shape}")
    return x


def eval_series(series: LegendreSeries, x):
    """Evaluate the series. For ``d == 1`` scalars and 1-d arrays are accepted as is."""
    pts = _as_points(series, x)
    out_shape = pts.shape[:-1]
    flat = pts.reshape(-1, series.d)
    per_axis = [eval_p_all(series.L, flat[:, a]) for a in range(series.d)]
    # contract one axis at a time: coeffs[l1,..,ld] * P_l1(x1) ... P_ld(xd)
    acc = series.coeffs.reshape(series.coeffs.shape + (1,))
    acc = np.broadcast_to(acc, series.coeffs.shape + (flat.shape[0],))
    for a in range(series.d):
        acc = np.einsum("i...n,in->...n", acc, per_axis[a])
    out = np.asarray(acc).reshape(out_shape)
    return float(out) if out.ndim == 0 else out


def total_mass(series: LegendreSeries) -> float:
    """Integral over the cube; only the constant term contributes."""
    return float(2.0**series.d * series.coeffs[(0,) * series.d])


def min_on_grid(series: LegendreSeries, points_per_axis: int = 201):
    """Minimum of the series over a uniform tensor grid including endpoints."""
    if points_per_axis < 2:
        raise DomainError("need at least two points per axis")
    axis = np.linspace(-1.0, 1.0, points_per_axis)
    grid = np.stack(np.meshgrid(*([axis] * series.d), indexing="ij"), axis=-1).reshape(-1, series.d)
    values = np.atleast_1d(eval_series(series, grid))
    k = int(np.argmin(values))
    point = grid[k]
    return float(values[k]), (float(point[0]) if series.d == 1 else tuple(map(float, point)))


def antiderivative_weights(L: int, lo: float, hi: float) -> np.ndarray:
    """``int_lo^hi P_l`` for l = 0..L, exact, from (P_{l+1} - P_{l-1}) / (2l + 1)."""
    p = eval_p_all(L + 1, np.array([lo, hi]))
    out = np.empty(L + 1)
    out[0] = hi - lo
    for l in range(1, L + 1):
        out[l] = ((p[l + 1, 1] - p[l - 1, 1]) - (p[l + 1, 0] - p[l - 1, 0])) / (2 * l + 1)
    return out


def interval_probability(series: LegendreSeries, lo, hi) -> float:
    """Integral of the series over the box ``[lo, hi]``, without quadrature."""
    lo = np.atleast_1d(np.asarray(lo, dtype=float))
    hi = np.atleast_1d(np.asarray(hi, dtype=float))
    if lo.shape != (series.d,) or hi.shape != (series.d,):
        raise DomainError(f"box corners must have {series.d} coordinates")
    if np.any(lo > hi) or np.any(lo < -1.0) or np.any(hi > 1.0):
        raise DomainError(f"box [{lo}, {hi}] is not inside the unit cube")
    acc = series.coeffs
    for a in range(series.d):
        w = antiderivative_weights(series.L, lo[a], hi[a])
        acc = np.tensordot(w, acc, axes=([0], [0]))
    return float(acc)


def expectation(
    series: LegendreSeries,
    g: Callable,
    quad_tol: float = 1e-10,
    clamp_to_zero: bool = False,
    max_nodes: int = 4096,
) -> float:
    """``int f g`` over the cube.

    One-dimensional series use the adaptive rule (clamping introduces kinks);
    higher dimensions use a tensor Gauss-Legendre rule doubled until stable.
    ``clamp_to_zero`` replaces negative parts of the series by zero before
    integrating. It is off by default: negative estimates are reported, not hidden.
    """

    def integrand(x):
        fv = np.atleast_1d(eval_series(series, x))
        if clamp_to_zero:
            fv = np.maximum(fv, 0.0)
        return fv * np.broadcast_to(np.asarray(g(x), dtype=float), fv.shape)

    if series.d == 1:
        return integrate_1d(integrand, -1.0, 1.0, quad_tol).value
    n = series.L + 16
    prev = None
    while True:
        pts, wts = _tensor_grid(n, series.d)
        val = float(np.sum(wts * integrand(pts)))
        if prev is not None and abs(val - prev) < quad_tol:
            return val
        if 2 * n > max_nodes:
            raise QuadratureError(f"expectation did not converge with {n} nodes per axis")
        prev = val
        n *= 2


def l2_distance(a: LegendreSeries, b: LegendreSeries) -> float:
    """Exact L2 distance between two series of equal shape (orthogonality, no quadrature)."""
    if a.d != b.d or a.L != b.L:
        raise DomainError("series shapes differ")
    diff = a.coeffs - b.coeffs
    return float(np.sqrt(np.sum(diff**2 / norm_consts(a.d, a.L))))

