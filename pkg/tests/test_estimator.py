import numpy as np
import pytest
from sklearn.base import clone

from osde_qmci import SeriesDensityEvolution


def test_params_and_clone():
    est = SeriesDensityEvolution(n_steps=3, backend="exact")
    params = est.get_params()
    assert params["n_steps"] == 3 and params["max_degree"] == 5
    c = clone(est)
    assert c.get_params() == params
    c.set_params(max_degree=4)
    assert c.max_degree == 4


def test_fit_transform_exact():
    est = SeriesDensityEvolution(n_steps=2, backend="exact").fit()
    assert len(est.densities_) == 2 and est.total_queries_ == 0
    x = np.linspace(-1, 1, 7).reshape(-1, 1)
    out = est.transform(x)
    assert out.shape == (7, 2)
    assert np.all(out > 0)
    np.testing.assert_array_equal(est.score_samples(x), out[:, -1])
    assert est.exceed_probability() == pytest.approx(0.6496, abs=5e-4)


def test_seeded_fit_reproducible():
    a = SeriesDensityEvolution(n_steps=2, random_state=3).fit()
    b = SeriesDensityEvolution(n_steps=2, random_state=3).fit()
    assert np.array_equal(a.densities_[-1].flat, b.densities_[-1].flat)
    assert a.total_queries_ > 0


def test_transform_before_fit():
    from sklearn.exceptions import NotFittedError

    with pytest.raises(NotFittedError):
        SeriesDensityEvolution().transform(np.zeros((1, 1)))
