"""scikit-learn style front end to the density transport."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils import check_random_state
from sklearn.utils.validation import check_array, check_is_fitted

from osde_qmci.density import eval_series, interval_probability
from osde_qmci.pipeline import DemoSchedule, ManualSchedule, PipelineConfig, demo_times, run
from osde_qmci.qae import ExactBackend, RqaeBackend
from osde_qmci.rbm import RbmKernel


class SeriesDensityEvolution(TransformerMixin, BaseEstimator):
    """Evolve a reflected Brownian motion's density as Legendre series.

    ``fit`` runs the transport from ``x0`` over ``n_steps`` intervals; the
    process parameters play the role of training data, so ``X`` is ignored.
    ``transform`` evaluates every fitted density at the rows of ``X``, giving
    one column per time step.

    Parameters
    ----------
    n_steps : int
        Number of time steps N.
    max_degree : int
        Largest Legendre degree L.
    backend : {"rqae", "exact"}
        Simulated random-depth amplitude estimation, or exact coefficient targets.
    eps : float or None
        Per-coefficient accuracy. ``None`` uses ``eps_base / sqrt(n_steps)``.
    """

    def __init__(
        self,
        n_steps=8,
        max_degree=5,
        mu=0.5,
        sigma=1.0,
        n_c=5,
        x0=0.0,
        t_first=0.2,
        t_last=0.6,
        backend="rqae",
        shots=12,
        eps=None,
        eps_base=2.0**-10,
        quad_tol=1e-8,
        random_state=None,
    ):
        self.n_steps = n_steps
        self.max_degree = max_degree
        self.mu = mu
        self.sigma = sigma
        self.n_c = n_c
        self.x0 = x0
        self.t_first = t_first
        self.t_last = t_last
        self.backend = backend
        self.shots = shots
        self.eps = eps
        self.eps_base = eps_base
        self.quad_tol = quad_tol
        self.random_state = random_state

    def _config(self):
        if self.backend == "exact":
            backend = ExactBackend()
        elif self.backend == "rqae":
            backend = RqaeBackend(self.eps_base, self.shots)
        else:
            raise ValueError(f"backend must be 'rqae' or 'exact', got {self.backend!r}")
        schedule = DemoSchedule(self.eps_base) if self.eps is None else ManualSchedule(self.eps)
        return PipelineConfig(
            N=self.n_steps,
            times=demo_times(self.n_steps, 0.0, self.t_first, self.t_last),
            L=self.max_degree,
            x0=(float(self.x0),),
            kernel=RbmKernel(self.mu, self.sigma, n_c=self.n_c),
            backend=backend,
            quad_tol=self.quad_tol,
            schedule=schedule,
        )

    def fit(self, X=None, y=None):
        cfg = self._config()
        rs = self.random_state
        seed = rs if isinstance(rs, (int, np.integer)) else int(check_random_state(rs).randint(2**31 - 1))
        self.trajectory_ = run(cfg, int(seed))
        self.densities_ = list(self.trajectory_.densities)
        self.times_ = np.asarray(cfg.times[1:])
        self.total_queries_ = self.trajectory_.total_queries
        self.max_depth_ = self.trajectory_.max_depth
        self.n_features_in_ = 1
        return self

    def transform(self, X):
        check_is_fitted(self, "densities_")
        X = check_array(X)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"X has {X.shape[1]} features, expected {self.n_features_in_}")
        return np.column_stack([np.atleast_1d(eval_series(s, X[:, 0])) for s in self.densities_])

    def score_samples(self, X):
        """Final-time density estimate at the rows of ``X`` (may be slightly negative)."""
        return self.transform(X)[:, -1]

    def exceed_probability(self, step=-1):
        """Estimated Pr(X(t) > x0) at a fitted time step."""
        check_is_fitted(self, "densities_")
        return interval_probability(self.densities_[step], [self.x0], [1.0])
