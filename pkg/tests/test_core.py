import numpy as np
import pytest

from toeplab import ParameterError, QuantizationContext
from toeplab.core import (as_points, gaussian_density, integrate_mu, normalized_kernel, reproducing_kernel,
                          symplectic_form)
from toeplab.fockbasis import monomial_eval

from conftest import cartesian_mu_integral


def test_context_rejects_bad_parameters():
    for kw in ({"n": 0, "t": 0.5}, {"n": 1, "t": 0.0}, {"n": 1, "t": -1.0}, {"n": 1, "t": 0.5, "d": 0},
               {"n": 1, "t": float("nan")}):
        with pytest.raises(ParameterError):
            QuantizationContext(**kw)


def test_points_must_be_finite(ctx):
    with pytest.raises(ParameterError):
        as_points([np.inf], 1)
    with pytest.raises(ParameterError):
        as_points(np.zeros((3, 2)), 1 + 2)


def test_kernel_at_zero_is_one(ctx, rng):
    z = rng.normal(size=5) + 1j * rng.normal(size=5)
    np.testing.assert_allclose(reproducing_kernel(ctx, z, 0.0), 1.0)


def test_kernel_value_e(ctx):
    assert reproducing_kernel(ctx, 1.0, 1.0) == pytest.approx(2.718281828459045, rel=1e-15)


def test_kernel_hermitian_symmetry(rng):
    c = QuantizationContext(3, 0.7)
    z = rng.normal(size=(10, 3)) + 1j * rng.normal(size=(10, 3))
    w = rng.normal(size=(10, 3)) + 1j * rng.normal(size=(10, 3))
    np.testing.assert_allclose(reproducing_kernel(c, z, w), np.conj(reproducing_kernel(c, w, z)), rtol=1e-14)
    np.testing.assert_allclose(np.abs(reproducing_kernel(c, z, w)) ** 2,
                               np.exp(np.real(np.sum(np.conj(w) * z, axis=-1)) / c.t), rtol=1e-13)


def test_normalized_kernel_values(ctx, rng):
    z = rng.normal(size=4) + 1j * rng.normal(size=4)
    np.testing.assert_allclose(normalized_kernel(ctx, z, 0.0), 1.0)
    w = rng.normal(size=4) + 1j * rng.normal(size=4)
    np.testing.assert_allclose(normalized_kernel(ctx, 0.0, w), np.exp(-np.abs(w) ** 2 / 2), rtol=1e-14)
    np.testing.assert_allclose(np.abs(normalized_kernel(ctx, w, w)), np.exp(np.abs(w) ** 2 / (4 * ctx.t)), rtol=1e-14)


def test_coherent_state_is_normalized(ctx):
    w = 1 + 1j
    val, _ = integrate_mu(ctx, lambda u: np.abs(normalized_kernel(ctx, u, w)) ** 2)
    assert val == pytest.approx(1.0, abs=1e-10)
    ref = cartesian_mu_integral(lambda u: abs(np.exp(np.conj(w) * u - abs(w) ** 2 / 2)) ** 2, ctx.t)
    assert ref.real == pytest.approx(1.0, abs=1e-9)


def test_symplectic_form():
    assert symplectic_form(1j, 1.0) == pytest.approx(-1.0)
    assert symplectic_form(2 + 1j, 2 + 1j) == 0.0
    rng = np.random.default_rng(1)
    z = rng.normal(size=(6, 2)) + 1j * rng.normal(size=(6, 2))
    w = rng.normal(size=(6, 2)) + 1j * rng.normal(size=(6, 2))
    np.testing.assert_allclose(symplectic_form(z, w) + symplectic_form(w, z), 0.0, atol=1e-15)


def test_gaussian_density(ctx):
    assert gaussian_density(ctx, 0.0) == pytest.approx(1 / np.pi, rel=1e-15)
    for c in (ctx, QuantizationContext(2, 0.3)):
        val, _ = integrate_mu(c, lambda u: np.ones(u.shape[0]))
        assert val == pytest.approx(1.0, abs=1e-10)
    assert np.all(gaussian_density(ctx, np.linspace(-40, 40, 101)) >= 0)


def test_reproducing_property_on_polynomials(rng):
    c = QuantizationContext(1, 0.8)
    coeffs = rng.normal(size=6) + 1j * rng.normal(size=6)

    def p(u):
        return sum(a * monomial_eval(c, k, u) for k, a in enumerate(coeffs))

    z = 0.7 - 0.4j
    val, _ = integrate_mu(c, lambda u: p(u) * np.conj(reproducing_kernel(c, u, z)))
    assert val == pytest.approx(p(z), abs=1e-10)
