import numpy as np
import pytest

from osde_qmci.rbm import RbmKernel

# Pr(X(0.6) > 0) for the demo kernel, from an independent scipy.quad
# integration of the image-sum density at 1e-13.
Q_REF_DEMO = 0.6496047674199277


@pytest.fixture
def demo_kernel():
    return RbmKernel(mu=0.5, sigma=1.0, n_c=5)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


class UniformKernel:
    """Memoryless kernel: the next state is uniform on [-1, 1]."""

    lower, upper = -1.0, 1.0
    time_homogeneous = True

    def density(self, x, s, x_next, s_next):
        return 0.5 * np.ones(np.broadcast_shapes(np.shape(x), np.shape(x_next)))

    def __hash__(self):
        return hash("uniform")

    def __eq__(self, other):
        return isinstance(other, UniformKernel)


@pytest.fixture
def uniform_kernel():
    return UniformKernel()


def transported_projection(prev, kernel, t, t_next, L, x0=0.0):
    """Projection of the exactly transported density, by nested adaptive quadrature.

    ``prev`` is None for the point mass at ``x0``.
    """
    from osde_qmci.density import eval_series
    from osde_qmci.legendre import project
    from osde_qmci.quad import integrate_1d

    if prev is None:
        return project(lambda x: kernel.density(x0, t, x, t_next), L, quad_tol=1e-12)

    def g(xs):
        return np.array([
            integrate_1d(lambda y: eval_series(prev, y) * kernel.density(y, t, x, t_next), -1.0, 1.0, 1e-12).value
            for x in np.atleast_1d(xs)
        ])

    return project(g, L, quad_tol=1e-11)
