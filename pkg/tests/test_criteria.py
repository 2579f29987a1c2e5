import json

import numpy as np
import pytest

from toeplab import (AccuracyError, ParameterError, QuantizationContext, TruncationSpec, UnsupportedVariantError,
                     abs_squared, bc_constant, bc_verify, commutator_diagnostics, constant, heat_transform,
                     linear_real, magnetic, main_theorem_hypothesis_check, monomial, oscillation_estimate,
                     perturbation_bound_check, re_z_cubed, sine_re, taylor_remainder_check, theta_derivative_bound)
from toeplab.criteria import PROXY_NOTE, grid_sup, partial_symbols, theta_derivative
from toeplab.symbol import CallableSymbol, HeatParams, sample_points

from test_symbol import random_polynomial


# ---------------------------------------------------------------- oscillation
def test_oscillation_examples():
    r = oscillation_estimate(constant([[3.0]]))
    assert r.sup_statistic == 0 and r.bounded
    r = oscillation_estimate(monomial(0, 1))
    assert r.sup_statistic == pytest.approx(1.0, abs=1e-12) and r.bounded
    r = oscillation_estimate(monomial(2, 0, coefficient=1.5))
    assert not r.bounded
    assert r.sup_statistic_refined > 1.8 * r.sup_statistic
    with pytest.raises(ParameterError):
        oscillation_estimate(monomial(0, 1), R=1.0)


def test_heat_transform_does_not_increase_oscillation():
    for f in (sine_re(), linear_real()):
        for p in partial_symbols(f):
            base = oscillation_estimate(p).sup_statistic
            smooth = oscillation_estimate(heat_transform(p, HeatParams(0.25))).sup_statistic
            assert smooth <= 1.05 * base + 1e-12


# ---------------------------------------------------------------- main theorem hypothesis
def test_hypothesis_check_examples(ctx):
    r = main_theorem_hypothesis_check(abs_squared(), 0.0, ctx)
    assert r.verdict and not r.failing
    r = main_theorem_hypothesis_check(re_z_cubed(), 0.1, ctx)
    assert not r.verdict and set(r.failing) == {"d/dx_1", "d/dxi_1"}
    r = main_theorem_hypothesis_check(sine_re(), 0.0, ctx)
    assert r.verdict


def test_hypothesis_check_preconditions(ctx):
    with pytest.raises(ParameterError, match=r"\[0, t/2\)"):
        main_theorem_hypothesis_check(abs_squared(), 0.25, ctx)
    with pytest.raises(ParameterError):
        main_theorem_hypothesis_check(monomial(1, 0), 0.0, ctx)


def test_report_serializes(ctx):
    r = main_theorem_hypothesis_check(abs_squared(), 0.1, ctx)
    doc = json.loads(json.dumps(r.to_dict()))
    assert doc["note"] == PROXY_NOTE
    assert doc["derivatives"]["d/dx_1"]["bounded"] is True


def test_finite_difference_partials_match_closed_form(rng):
    f = random_polynomial(rng, n=2, degree=3)
    z = sample_points(2, 1.5, 5)
    exact = [p(z) for p in partial_symbols(f)]
    fd = [p(z) for p in partial_symbols(CallableSymbol(lambda u: f(u), 2, hermitian=True), finite_differences=True)]
    for a, b in zip(exact, fd):
        np.testing.assert_allclose(b, a, atol=1e-6 * max(1, np.abs(a).max()))


# ---------------------------------------------------------------- Berger-Coburn
def test_bc_constant():
    assert bc_constant(0.125, 0.5, 1) == 6.0
    assert bc_constant(0.2, 0.5, 1) == pytest.approx(12.0, rel=1e-14)
    assert bc_constant(1e-12, 0.5, 2) == pytest.approx(16.0, rel=1e-9)
    s = np.linspace(0.01, 0.249, 40)
    c = [bc_constant(v, 0.5, 1) for v in s]
    assert all(b > a for a, b in zip(c, c[1:]))
    assert bc_constant(0.2499999, 0.5, 1) > 1e6
    for bad in (0.0, 0.25, -0.1):
        with pytest.raises(ParameterError):
            bc_constant(bad, 0.5, 1)


def test_bc_verify_examples(ctx):
    spec = TruncationSpec(ctx, 40)
    r = bc_verify(constant([[1.0]]), 0.1, spec)
    assert r.lhs == pytest.approx(1.0) and r.holds
    r = bc_verify(sine_re(), 0.125, spec)
    assert r.holds and r.slack > 0 and r.lhs <= 1.0
    assert r.rhs == pytest.approx(6 * max(r.sup_norm, r.sup_norm_refined), rel=1e-12)
    assert max(r.sup_norm, r.sup_norm_refined) <= np.exp(-0.0625) + 1e-9
    assert 5.0 < r.rhs < 5.7
    c2 = QuantizationContext(1, 0.5, d=2)
    r = bc_verify(constant(np.diag([1.0, -1.0])), 0.125, TruncationSpec(c2, 10))
    assert r.lhs == pytest.approx(1.0) and r.holds


def test_bc_verify_rejects_unbounded(ctx):
    with pytest.raises(AccuracyError):
        bc_verify(abs_squared(), 0.125, TruncationSpec(ctx, 10))
    with pytest.raises(AccuracyError):
        grid_sup(re_z_cubed())


def test_perturbation_bound(ctx):
    spec = TruncationSpec(ctx, 30)
    r = perturbation_bound_check(constant([[2.0]]), 0.1, spec)
    assert r.lhs == pytest.approx(0.0, abs=1e-12) and r.holds
    r = perturbation_bound_check(abs_squared(), 0.125, spec)
    assert r.rhs == pytest.approx(1.5, rel=1e-12)
    assert r.lhs == pytest.approx(0.25, rel=1e-12)
    assert r.holds
    r = perturbation_bound_check(sine_re(), 0.125, TruncationSpec(ctx, 20))
    assert r.holds and r.slack > 0


# ---------------------------------------------------------------- Taylor remainder
def test_taylor_remainder():
    x = np.array([0.3, -0.4])
    r = taylor_remainder_check(abs_squared(), x)
    assert r.max_remainder == pytest.approx(0.25, rel=1e-12)
    assert r.holds
    r = taylor_remainder_check(linear_real(), x)
    assert r.max_remainder <= 1e-13 and r.holds
    r = taylor_remainder_check(sine_re(), x)
    step = np.linalg.norm(x)
    assert r.holds and r.constant <= 1.0
    assert r.max_remainder <= step + step ** 2
    with pytest.raises(UnsupportedVariantError):
        taylor_remainder_check(CallableSymbol(lambda z: z[..., 0].real, 1, hermitian=True), x)


def test_taylor_remainder_is_constant_for_quadratic():
    # R_x(y) = |x|^2 for every y
    f = abs_squared()
    x = np.array([0.7, 0.1])
    y = sample_points(1, 2.0, 9)
    xc = 0.7 + 0.1j
    rem = f(y + xc) - f(y) - np.einsum("k,pkij->pij", x, f.gradient(y))
    np.testing.assert_allclose(rem[:, 0, 0], 0.5, atol=1e-12)


# ---------------------------------------------------------------- commutator diagnostics
CUTOFFS = [10, 20, 40, 60, 80, 100, 140, 200]


def test_commutator_examples(ctx):
    d = commutator_diagnostics(abs_squared(), ctx, CUTOFFS)
    assert d.exponent_c1 <= 0.05
    assert max(d.c2) <= 1e-10
    d = commutator_diagnostics(re_z_cubed(), ctx, CUTOFFS)
    assert 0.4 <= d.exponent_c1 <= 0.6
    d = commutator_diagnostics(sine_re(), ctx, CUTOFFS)
    assert d.exponent_c1 <= 0.05


def test_commutator_reproducible(ctx):
    a = commutator_diagnostics(sine_re(), ctx, [5, 10, 20], seed=3)
    b = commutator_diagnostics(sine_re(), ctx, [5, 10, 20], seed=3)
    assert a.c1 == b.c1 and a.c2 == b.c2
    with pytest.raises(ParameterError):
        commutator_diagnostics(sine_re(), ctx, [10, 5])


def test_commutator_small_for_passing_quadratics(ctx, rng):
    for _ in range(3):
        f = random_polynomial(rng, degree=2)
        if not main_theorem_hypothesis_check(f, 0.0, ctx).verdict:
            continue
        d = commutator_diagnostics(f, ctx, [10, 20, 40, 80])
        assert d.exponent_c1 <= 0.1 and d.exponent_c2 <= 0.1


# ---------------------------------------------------------------- angular derivative
def test_theta_derivative_is_rotation_derivative(rng):
    f = random_polynomial(rng, n=2, degree=3)
    z = sample_points(2, 1.5, 5)
    h = 1e-6
    fd = (f(np.exp(1j * h) * z) - f(np.exp(-1j * h) * z)) / (2 * h)
    np.testing.assert_allclose(theta_derivative(f)(z), fd, atol=1e-6 * max(1, np.abs(fd).max()))


def test_theta_bound_examples():
    assert theta_derivative_bound(abs_squared()).verdict
    np.testing.assert_allclose(theta_derivative(abs_squared())(sample_points(1, 3.0, 7)), 0.0, atol=1e-13)
    assert theta_derivative_bound(magnetic(1.0)).verdict
    r = theta_derivative_bound(re_z_cubed())
    assert not r.verdict and r.theta_degree == 3
