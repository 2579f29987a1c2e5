"""Acceptance criteria 1-14 at their fixed tolerances.

Each test prints one line ``[ACCEPT nn] PASS|FAIL <summary>`` to the terminal
(also under output capture) before asserting.
"""
import json
import time

import numpy as np
import pytest

from toeplab import (EvolutionConfig, QuantizationContext, TruncationSpec, abs_squared, assemble_toeplitz,
                     bc_constant, bc_verify, berezin_transform, classical_flow, commutator_diagnostics, constant,
                     covariance_check, form_derivative, harmonic_oscillator, linear_real,
                     main_theorem_hypothesis_check, monomial, off_diagonal_heat, quantum_evolve, re_z_cubed,
                     relativistic_kinetic, rotation_covariance_check, semigroup_identity_check, sine_re,
                     weyl_matrix, weyl_relation_check)
from toeplab.cli import main as cli_main
from toeplab.criteria import grid_sup
from toeplab.dynamics import completeness_experiment, expectation_trajectory
from toeplab.fockbasis import coherent_coefficients
from toeplab.symbol import spectral_norm

from test_symbol import random_polynomial

T = 0.5
CTX = QuantizationContext(1, T)


@pytest.fixture
def verdict(capsys):
    def emit(number, ok, summary):
        with capsys.disabled():
            print(f"\n[ACCEPT {number:02d}] {'PASS' if ok else 'FAIL'} {summary}")
        assert ok, summary
    return emit


def disc(rng, k, radius):
    r = radius * np.sqrt(rng.uniform(size=k))
    return r * np.exp(2j * np.pi * rng.uniform(size=k))


def test_01_harmonic_oscillator_spectrum(verdict):
    start = time.perf_counter()
    A = assemble_toeplitz(abs_squared(), TruncationSpec(CTX, 40), method="closed-form").scale(0.5)
    ev = np.sort(A.eigenvalues().real)
    elapsed = time.perf_counter() - start
    m = np.arange(41)
    err = float(np.max(np.abs(ev - T * (m + 1)) / (T * (m + 1))))
    verdict(1, err <= 1e-10 and elapsed < 1.0, f"max rel error {err:.2e} (<= 1e-10), runtime {elapsed:.3f}s (< 1s)")


def test_02_berezin_equals_heat(verdict):
    rng = np.random.default_rng(2)
    z = disc(rng, 10, 1.0)
    A = assemble_toeplitz(abs_squared(), TruncationSpec(CTX, 40))
    err = float(np.max(np.abs(berezin_transform(A, z)[:, 0, 0] - (np.abs(z) ** 2 + 2 * T))))
    verdict(2, err <= 1e-8, f"max |B(T_|z|^2)(z) - (|z|^2 + 2t)| = {err:.2e} at 10 points (<= 1e-8)")


def test_03_semigroup_lemma(verdict):
    rng = np.random.default_rng(3)
    z, w = disc(rng, 20, 2.0), disc(rng, 20, 2.0)
    res = {name: semigroup_identity_check(f, T / 4, z, w, CTX)
           for name, f in (("1", constant([[1.0]])), ("AbsSquared", abs_squared()), ("SineRe", sine_re()))}
    worst = max(res.values())
    verdict(3, worst <= 1e-6, "residuals " + ", ".join(f"{k} {v:.1e}" for k, v in res.items()) + " (<= 1e-6)")


def test_04_off_diagonal_decay(verdict):
    rng = np.random.default_rng(4)
    z, w = disc(rng, 100, 3.0), disc(rng, 100, 3.0)
    f = sine_re()
    sup = max(grid_sup(f))
    lhs = spectral_norm(off_diagonal_heat(f, z, w, CTX))
    bound = sup * np.exp(-np.abs(z - w) ** 2 / (8 * T))
    violations = int(np.sum(lhs > bound))
    verdict(4, violations == 0, f"{violations} violations at 100 pairs (min margin {np.min(bound - lhs):.2e})")


def test_05_berger_coburn(verdict):
    slacks = []
    holds = True
    for f in (sine_re(), constant(np.diag([1.0, -1.0]))):
        ctx = QuantizationContext(1, T, f.d)
        for s in (T / 8, T / 4):
            for M in (20, 40):
                r = bc_verify(f, s, TruncationSpec(ctx, M))
                holds &= r.holds and r.slack > 0
                slacks.append(r.slack)
    c = bc_constant(0.125, 0.5, 1)
    verdict(5, holds and c == 6, f"8 cases hold, min slack {min(slacks):.3f} > 0; bc_constant(0.125, 0.5, 1) = {c!r}")


def test_06_weyl_relations(verdict):
    rng = np.random.default_rng(6)
    spec = TruncationSpec(CTX, 60)
    w, z = disc(rng, 10, 0.5), disc(rng, 10, 0.5)
    rel = max(weyl_relation_check(spec, a, b) for a, b in zip(w, z))
    uni = 0.0
    for a in w:
        W = weyl_matrix(spec, a).matrix
        uni = max(uni, float(np.max(np.abs(W @ W.conj().T - np.eye(spec.dim)))))
    verdict(6, rel <= 1e-6 and uni <= 1e-10, f"relation residual {rel:.2e} (<= 1e-6), unitarity {uni:.2e} (<= 1e-10)")


def test_07_covariance_and_rotation(verdict):
    spec = TruncationSpec(CTX, 60)
    cov = max(covariance_check(f, spec, z) for f in (abs_squared(), linear_real()) for z in (1.0, 0.5 + 0.5j))
    rot = rotation_covariance_check(re_z_cubed(), TruncationSpec(CTX, 20), np.pi / 3)
    verdict(7, cov <= 1e-6 and rot <= 1e-10, f"covariance {cov:.2e} (<= 1e-6), rotation {rot:.2e} (<= 1e-10)")


def test_08_form_derivative(verdict):
    spec = TruncationSpec(CTX, 40)
    top = 40 - 2 - 1
    D = form_derivative(assemble_toeplitz(abs_squared(), spec)).interior(top)
    ref = assemble_toeplitz(monomial(0, 1), spec).interior(top)
    err = float(np.max(np.abs(D - ref)))
    verdict(8, err <= 1e-10, f"interior (degrees <= {top}) deviation from T_zbar {err:.2e} (<= 1e-10)")


def test_09_commutator_signature(verdict):
    cutoffs = [10, 20, 40, 60, 80, 100, 120, 140, 160, 180, 200]
    start = time.perf_counter()
    cubic = commutator_diagnostics(re_z_cubed(), CTX, cutoffs).exponent_c1
    quad = commutator_diagnostics(abs_squared(), CTX, cutoffs).exponent_c1
    sine = commutator_diagnostics(sine_re(), CTX, cutoffs).exponent_c1
    elapsed = time.perf_counter() - start
    ok = 0.4 <= cubic <= 0.6 and quad <= 0.1 and sine <= 0.1 and elapsed < 60
    verdict(9, ok, f"c1 exponents ReZCubed {cubic:.3f} in [0.4, 0.6], AbsSquared {quad:.3f}, SineRe {sine:.3f} "
                   f"(<= 0.1), runtime {elapsed:.1f}s")


def test_10_hypothesis_discrimination(verdict):
    relkin = relativistic_kinetic(1.0) + sine_re()
    cases = {"AbsSquared": (abs_squared(), True), "SineRe": (sine_re(), True),
             "RelKin+sin": (relkin, True), "ReZCubed": (re_z_cubed(), False)}
    got = {}
    for s in (0.0, T / 4):
        for name, (f, expect) in cases.items():
            got[(name, s)] = main_theorem_hypothesis_check(f, s, CTX).verdict == expect
    wrong = [f"{k[0]}@s={k[1]:g}" for k, v in got.items() if not v]
    verdict(10, not wrong, "all 8 verdicts as expected" if not wrong else f"unexpected verdicts: {wrong}")


def test_11_quadratic_dynamics(verdict):
    spec = TruncationSpec(CTX, 40)
    worst = 0.0
    for z0 in (1.0, 0.6 - 0.8j, 0.3j):
        cl = classical_flow(abs_squared() * 0.5, z0, EvolutionConfig(tau=2 * np.pi, h=2e-4))
        tr = quantum_evolve(harmonic_oscillator(spec), coherent_coefficients(spec, z0), cl.times)
        worst = max(worst, float(np.max(np.abs(expectation_trajectory(None, tr)[:, 0] - cl.z[:, 0]))))
    verdict(11, worst <= 1e-6, f"max |<T_z>(tau) - z(tau)| over one period {worst:.2e} (<= 1e-6)")


def test_12_completeness_smoke(verdict):
    cfg = EvolutionConfig(tau=1.0, h=1e-3, cutoffs=(20, 40, 80), n_times=201)
    rep = completeness_experiment(re_z_cubed(), 1.0, CTX, cfg)
    half = classical_flow(re_z_cubed(), 1.0, EvolutionConfig(tau=1.0, h=5e-4))
    full_mid = 0.5 * sum(rep.escape_range) if rep.escape_range else float("nan")
    half_mid = 0.5 * sum(half.escape_range) if half.escape_range else float("nan")
    stable = bool(rep.classical_escaped and half.escaped and abs(half_mid - full_mid) <= 0.05 * full_mid)
    onsets = [rep.onset_times[M] for M in (20, 40, 80)]
    monotone = rep.onset_trend in ("increasing", "decreasing")
    verdict(12, stable and monotone,
            f"escape range [{rep.escape_range[0]:.6f}, {rep.escape_range[1]:.6f}], halved-step midpoint "
            f"{half_mid:.6f}; leakage onsets {onsets} ({rep.onset_trend})")


def test_13_closed_form_vs_quadrature(verdict):
    rng = np.random.default_rng(13)
    worst = 0.0
    for _ in range(20):
        d = int(rng.integers(1, 4))
        f = random_polynomial(rng, d=d, degree=int(rng.integers(1, 5)), terms=4)
        spec = TruncationSpec(QuantizationContext(1, T, d), 12)
        a = assemble_toeplitz(f, spec, method="closed-form").matrix
        b = assemble_toeplitz(f, spec, method="quadrature").matrix
        worst = max(worst, float(np.max(np.abs(a - b))))
    verdict(13, worst <= 1e-9, f"max element deviation over 20 symbols {worst:.2e} (<= 1e-9)")


def test_14_determinism(verdict, tmp_path):
    cfg = tmp_path / "identities.json"
    cfg.write_text(json.dumps({"command": "identities", "symbol": {"builtin": "SineRe"}, "M": 30, "seed": 11}))
    codes = [cli_main(["identities", "--config", str(cfg), "--out", str(tmp_path / run)]) for run in ("a", "b")]
    a = (tmp_path / "a" / "identities.csv").read_bytes()
    b = (tmp_path / "b" / "identities.csv").read_bytes()
    verdict(14, codes == [0, 0] and a == b, f"exit codes {codes}; identities.csv byte-identical: {a == b}")
