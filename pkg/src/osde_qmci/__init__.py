"""Orthogonal-series density transport driven by simulated amplitude estimation."""

from osde_qmci.density import LegendreSeries
from osde_qmci.estimator import SeriesDensityEvolution
from osde_qmci.legendre import MultiIndexSet, eval_p, eval_tensor, norm_const, project
from osde_qmci.qae import QaeOutcome, lqae_simulate, mle_readout, rqae_simulate
from osde_qmci.rbm import RbmKernel, exceed_probability, transition_density

__all__ = [
    "LegendreSeries",
    "MultiIndexSet",
    "QaeOutcome",
    "RbmKernel",
    "SeriesDensityEvolution",
    "eval_p",
    "eval_tensor",
    "exceed_probability",
    "lqae_simulate",
    "mle_readout",
    "norm_const",
    "project",
    "rqae_simulate",
    "transition_density",
]

__version__ = "0.1.0"
