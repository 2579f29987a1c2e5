import numpy as np
import pytest
from math import comb, factorial, pi

from toeplab import DegenerateInputError, ParameterError, QuantizationContext, TruncationSpec
from toeplab.core import integrate_mu, normalized_kernel
from toeplab.fockbasis import (CoefficientVector, bargmann_hermite_check, basis_values, basis_vector,
                               coherent_coefficients, coherent_reconstruction_error, decay_diagnostic,
                               enumerate_basis, monomial_eval)


def test_enumeration_small_cases(ctx):
    assert enumerate_basis(TruncationSpec(ctx, 3)) == [(0,), (1,), (2,), (3,)]
    c2 = QuantizationContext(2, 0.5)
    assert enumerate_basis(TruncationSpec(c2, 1)) == [(0, 0), (1, 0), (0, 1)]
    assert len(enumerate_basis(TruncationSpec(c2, 10))) == 66


@pytest.mark.parametrize("n,M", [(1, 7), (2, 5), (3, 4), (4, 3)])
def test_enumeration_size_and_order(n, M):
    spec = TruncationSpec(QuantizationContext(n, 0.5), M)
    basis = enumerate_basis(spec)
    assert len(basis) == comb(M + n, n)
    assert len(set(basis)) == len(basis)
    keys = [(sum(nu), tuple(-k for k in nu)) for nu in basis]
    assert keys == sorted(keys)
    assert enumerate_basis(TruncationSpec(QuantizationContext(n, 0.5), M)) == basis


def test_negative_cutoff_rejected(ctx):
    with pytest.raises(ParameterError):
        TruncationSpec(ctx, -1)


def test_monomial_values(ctx):
    assert monomial_eval(ctx, 0, 3 + 4j) == 1
    assert monomial_eval(ctx, 2, 1.0) == pytest.approx(1 / np.sqrt(2))
    c = QuantizationContext(2, 0.3)
    z = np.array([0.4 - 1j, 1.3 + 0.2j])
    expect = z[0] ** 2 * z[1] ** 3 / np.sqrt(factorial(2) * factorial(3) * 0.6 ** 5)
    assert monomial_eval(c, (2, 3), z) == pytest.approx(expect, rel=1e-14)


def test_monomial_log_space_branch(ctx):
    # degree 160 goes through the log-space path; compare against multiprecision arithmetic
    import mpmath
    mpmath.mp.dps = 40
    z = 1.5 - 2.0j
    ref = mpmath.mpc(z) ** 160 / mpmath.sqrt(mpmath.factorial(160))
    val = monomial_eval(ctx, 160, z)
    assert abs(val - complex(ref)) <= 1e-12 * abs(complex(ref))


def test_orthonormality_by_quadrature():
    c = QuantizationContext(1, 0.5)
    spec = TruncationSpec(c, 6)
    gram, _ = integrate_mu(c, lambda u: np.einsum("pi,pj->pij", basis_values(spec, u),
                                                 np.conj(basis_values(spec, u))))
    np.testing.assert_allclose(gram, np.eye(spec.size), atol=1e-10)


def test_orthonormality_gauss_hermite_n2():
    # independent oracle: mu_t is the product of four real N(0, t) laws
    c = QuantizationContext(2, 0.7)
    spec = TruncationSpec(c, 5)
    x, w = np.polynomial.hermite_e.hermegauss(12)
    x, w = np.sqrt(c.t) * x, w / w.sum()
    g = np.stack(np.meshgrid(x, x, x, x, indexing="ij"), -1).reshape(-1, 4)
    wt = np.prod(np.stack(np.meshgrid(w, w, w, w, indexing="ij"), -1).reshape(-1, 4), axis=1)
    u = g[:, 0::2] + 1j * g[:, 1::2]
    B = basis_values(spec, u)
    gram = (B * wt[:, None]).T @ np.conj(B)
    np.testing.assert_allclose(gram, np.eye(spec.size), atol=1e-10)


def test_coherent_coefficients(ctx):
    spec = TruncationSpec(ctx, 40)
    v0 = coherent_coefficients(spec, 0.0)
    np.testing.assert_array_equal(v0.coeffs, np.eye(spec.dim)[0])
    v = coherent_coefficients(spec, 1.0)
    assert v.norm2 + v.tail_mass == pytest.approx(1.0, abs=1e-14)
    assert v.norm2 == pytest.approx(1.0, abs=1e-12)
    # entry nu equals conj(e_nu(w)) exp(-|w|^2/4t); at w = 1, t = 1/2 this is e^{-1/2}/sqrt(nu!)
    np.testing.assert_allclose(v.coeffs[:6], [np.exp(-0.5) / np.sqrt(factorial(k)) for k in range(6)], rtol=1e-14)


def test_coherent_reconstruction(ctx, rng):
    spec = TruncationSpec(ctx, 60)
    for _ in range(5):
        w = complex(*rng.uniform(-1.5, 1.5, 2))
        z = complex(*rng.uniform(-1.5, 1.5, 2))
        assert coherent_reconstruction_error(spec, w, z) < 1e-10


def test_parseval_monotone(ctx):
    norms = [coherent_coefficients(TruncationSpec(ctx, M), 1.5 + 0.5j).norm2 for M in range(0, 40, 3)]
    assert all(b >= a for a, b in zip(norms, norms[1:]))
    assert all(b > a for a, b in zip(norms[:6], norms[1:6]))
    assert norms[-1] == pytest.approx(1.0, abs=1e-9)


def test_coherent_vector_valued():
    c = QuantizationContext(1, 0.5, d=2)
    v = coherent_coefficients(TruncationSpec(c, 5), 0.5, internal=[0, 1])
    assert v.coeffs.shape == (12,)
    assert np.all(v.coeffs[0::2] == 0)


def test_bargmann_hermite():
    a, b = bargmann_hermite_check(QuantizationContext(1, 1.0), 0, 0.0)
    assert a == pytest.approx(pi ** -0.25) and b == pytest.approx(pi ** -0.25)
    a, b = bargmann_hermite_check(QuantizationContext(1, 0.5), 1, 0.0)
    assert a == 0 and b == 0
    a, b = bargmann_hermite_check(QuantizationContext(1, 0.5), 0, 0.0)
    assert a == pytest.approx(0.5 ** -0.25 * pi ** -0.25, rel=1e-15)
    x = np.linspace(-3, 3, 13)
    a, b = bargmann_hermite_check(QuantizationContext(1, 0.5), 9, x)
    np.testing.assert_allclose(a, b, atol=1e-13)
    with pytest.raises(ParameterError):
        bargmann_hermite_check(QuantizationContext(2, 0.5), (0, 0), 0.0)


def test_decay_diagnostic(ctx):
    spec = TruncationSpec(ctx, 40)
    assert decay_diagnostic(coherent_coefficients(spec, 1.0)).rapid_decay
    flat = decay_diagnostic(CoefficientVector(spec, np.ones(spec.dim)))
    assert not flat.rapid_decay
    r = decay_diagnostic(basis_vector(spec, 3))
    assert r.finite_support and r.last_nonzero_degree == 3
    with pytest.raises(DegenerateInputError):
        decay_diagnostic(CoefficientVector(spec, np.zeros(spec.dim)))
    with pytest.raises(ParameterError):
        decay_diagnostic(CoefficientVector(TruncationSpec(ctx, 3), np.ones(4)))


def test_polynomial_decay_is_not_rapid(ctx):
    spec = TruncationSpec(ctx, 60)
    v = CoefficientVector(spec, (1.0 + np.arange(spec.dim)) ** -3.0)
    assert not decay_diagnostic(v).rapid_decay
