import numpy as np
import pytest
from scipy import integrate

from toeplab import QuantizationContext


@pytest.fixture
def ctx():
    return QuantizationContext(n=1, t=0.5)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def cartesian_mu_integral(func, t, L=9.0):
    """Reference ``int_C func(z) dmu_t(z)`` by adaptive Cartesian quadrature (real and imaginary parts)."""
    def part(fn):
        def g(xi, x):
            z = x + 1j * xi
            return fn(z) * np.exp(-abs(z) ** 2 / (2 * t)) / (2 * np.pi * t)
        return integrate.dblquad(g, -L, L, -L, L, epsabs=1e-13, epsrel=1e-12)[0]

    return part(lambda z: complex(func(z)).real) + 1j * part(lambda z: complex(func(z)).imag)


def gauss_hermite_mu_integral(func, t, nodes=40):
    """Reference ``int_C func(z) dmu_t(z)`` by a Cartesian Gauss-Hermite product rule (exact for polynomials)."""
    x, w = np.polynomial.hermite_e.hermegauss(nodes)
    x, w = np.sqrt(t) * x, w / w.sum()
    X, Y = np.meshgrid(x, x, indexing="ij")
    W = np.outer(w, w)
    return np.sum(W * func(X + 1j * Y))
