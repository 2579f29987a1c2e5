"""Truncation-scale evidence for self-adjointness criteria of Toeplitz operators.

Everything here is a proxy computed on finite grids and finite cutoffs.
Verdicts are one-sided evidence, and every report records the grid or
cutoff data it was computed from.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from .core import QuantizationContext, as_points, sqnorm
from .errors import AccuracyError, GrowthError, ParameterError, UnsupportedVariantError
from .fockbasis import TruncationSpec
from .quadrature import DEFAULT_QUADRATURE, QuadratureSpec
from .symbol import (CallableSymbol, HeatParams, Symbol, heat_transform, poly_bound_fit,
                     sample_points, spectral_norm)
from .toeplitz import assemble_toeplitz, harmonic_oscillator, operator_norm

REPORT_SCHEMA_VERSION = "1.0"
PROXY_NOTE = ("truncation-scale diagnostic: grid and cutoff based evidence, "
              "not a certificate for the unbounded operator")
FD_STEP = 1e-4


def _report_dict(obj) -> dict:
    d = asdict(obj)
    d["schema_version"] = REPORT_SCHEMA_VERSION
    d["report"] = type(obj).__name__
    return _clean(d)


def _clean(x):
    if isinstance(x, dict):
        return {k: _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, np.bool_):
        return bool(x)
    if isinstance(x, float) and not np.isfinite(x):
        return str(x)
    return x


# --------------------------------------------------------------------------
# derivatives
# --------------------------------------------------------------------------
def partial_labels(n: int) -> list:
    return [f"d/dx_{j + 1}" for j in range(n)] + [f"d/dxi_{j + 1}" for j in range(n)]


def _fd_partial(f: Symbol, k: int) -> Symbol:
    """Central difference in real coordinate ``k`` with step 1e-4 relative."""
    n = f.n

    def g(z):
        coord = z[..., k].real if k < n else z[..., k - n].imag
        h = FD_STEP * np.maximum(1.0, np.abs(coord))
        e = np.zeros(n, dtype=complex)
        e[k % n] = 1.0 if k < n else 1j
        shift = h[..., None] * e
        return (f(z + shift) - f(z - shift)) / (2 * h[..., None, None])

    return CallableSymbol(g, n, f.d, hermitian=None, name=None)


def partial_symbols(f: Symbol, finite_differences: bool | None = None) -> list:
    """The ``2n`` real first-order partials of ``f`` as symbols.

    Polynomials use closed forms.  Other symbols use their closed-form
    gradient when available, or central finite differences otherwise
    (``finite_differences=True`` forces them).
    """
    if f.is_polynomial and not finite_differences:
        return f.as_polynomial().real_partials()
    if finite_differences is None:
        finite_differences = not f.has_gradient
    if finite_differences:
        return [_fd_partial(f, k) for k in range(2 * f.n)]
    return [CallableSymbol((lambda z, k=k: f.gradient(z)[..., k, :, :]), f.n, f.d) for k in range(2 * f.n)]


def theta_derivative(f: Symbol) -> Symbol:
    """``d/dtheta f(e^{i theta} z)`` at ``theta = 0``, i.e. ``x . d_xi f - xi . d_x f``."""
    parts = partial_symbols(f)
    n = f.n

    def g(z):
        out = 0
        for j in range(n):
            out = out + z[..., j].real[..., None, None] * parts[n + j](z) - z[..., j].imag[..., None, None] * parts[j](z)
        return out

    return CallableSymbol(g, n, f.d)


# --------------------------------------------------------------------------
# oscillation
# --------------------------------------------------------------------------
@dataclass
class OscillationReport:
    """Unit-probe oscillation statistic of a symbol on two nested grids."""

    sup_statistic: float
    sup_statistic_refined: float
    linear_constant: float
    relative_change: float
    bounded: bool
    grid: dict = field(default_factory=dict)
    label: str = ""
    note: str = PROXY_NOTE

    def to_dict(self):
        return _report_dict(self)


def _probes(n: int, seed: int = 0) -> np.ndarray:
    ang = np.exp(2j * np.pi * np.arange(16) / 16)
    if n == 1:
        unit = ang[:, None]
    else:
        eye = np.eye(n, dtype=complex)
        rng = np.random.default_rng(seed)
        g = rng.normal(size=(16, n)) + 1j * rng.normal(size=(16, n))
        g /= np.sqrt(sqnorm(g))[:, None]
        unit = np.concatenate([eye, -eye, 1j * eye, -1j * eye, g])
    return np.concatenate([unit, 0.5 * unit])


def _probe_statistic(g: Symbol, centers: np.ndarray, probes: np.ndarray) -> float:
    base = g(centers)
    best = 0.0
    for w in probes:
        best = max(best, float(np.max(spectral_norm(g(centers + w) - base))))
    return best


def _linear_constant(g: Symbol, pts: np.ndarray, max_points: int = 300) -> float:
    if pts.shape[0] > max_points:
        pts = pts[np.linspace(0, pts.shape[0] - 1, max_points).astype(int)]
    vals = g(pts)
    diff = vals[:, None] - vals[None, :]
    dist = np.sqrt(sqnorm(pts[:, None, :] - pts[None, :, :]))
    return float(np.max(spectral_norm(diff) / (1 + dist)))


def oscillation_estimate(g: Symbol, R: float = 4.0, resolution: int = 17, label: str = "",
                         seed: int = 0) -> OscillationReport:
    """Estimate ``sup { ||g(z + w) - g(z)|| : |z| <= R, |w| <= 1 }`` and its refinement stability.

    The statistic is computed on a grid of radius ``R`` and again with radius
    and resolution doubled.  The verdict requires a finite statistic whose
    relative change under this refinement is below 10%.
    """
    if R < 2:
        raise ParameterError("oscillation_estimate needs a grid radius R >= 2")
    probes = _probes(g.n, seed)
    coarse = sample_points(g.n, R, resolution, seed)
    fine = sample_points(g.n, 2 * R, 2 * resolution - 1, seed)
    s1 = _probe_statistic(g, coarse, probes)
    s2 = _probe_statistic(g, fine, probes)
    lin = _linear_constant(g, fine)
    scale = max(s1, s2)
    rel = 0.0 if scale <= 1e-12 else abs(s2 - s1) / max(s1, 1e-300)
    bounded = bool(np.isfinite(s2) and rel < 0.10)
    grid = {"R": R, "resolution": resolution, "R_refined": 2 * R, "resolution_refined": 2 * resolution - 1,
            "n_probes": int(probes.shape[0]), "seed": seed}
    return OscillationReport(s1, s2, lin, rel, bounded, grid, label)


# --------------------------------------------------------------------------
# main theorem hypothesis
# --------------------------------------------------------------------------
@dataclass
class HypothesisReport:
    verdict: bool
    s: float
    t: float
    growth_degree: int
    derivatives: dict
    failing: list
    note: str = PROXY_NOTE

    def to_dict(self):
        return _report_dict(self)


def main_theorem_hypothesis_check(f: Symbol, s: float, ctx: QuantizationContext, R: float = 4.0,
                                  resolution: int = 17) -> HypothesisReport:
    """Do the first-order derivatives of the heat transform at time ``s`` have bounded oscillation?

    Requires ``0 <= s < t/2``.  Derivatives are closed-form for polynomials
    and central finite differences (step 1e-4 relative) otherwise.
    """
    if not 0 <= s < ctx.t / 2:
        raise ParameterError(f"the hypothesis needs a heat time s in [0, t/2); got s={s}, t={ctx.t}")
    if f.n != ctx.n or f.d != ctx.d:
        raise ParameterError("symbol does not match the context")
    if not f.hermitian:
        raise ParameterError("the hypothesis check needs a hermitian symbol")
    N, _ = poly_bound_fit(f)
    fs = heat_transform(f, HeatParams(s))
    parts = partial_symbols(fs, finite_differences=None if fs.is_polynomial else True)
    reports = {}
    for label, p in zip(partial_labels(f.n), parts):
        reports[label] = oscillation_estimate(p, R, resolution, label=label)
    failing = [k for k, r in reports.items() if not r.bounded]
    return HypothesisReport(not failing, s, ctx.t, N, reports, failing)


# --------------------------------------------------------------------------
# Berger-Coburn estimate
# --------------------------------------------------------------------------
def bc_constant(s: float, t: float, n: int) -> float:
    """``(2 t eps)^{-n}`` with ``eps = 1/4t - 1/8(t-s)``, i.e. ``(4(t-s)/(t-2s))^n``.

    >>> bc_constant(0.125, 0.5, 1)
    6.0
    """
    if not 0 < s < t / 2:
        raise ParameterError(f"bc_constant needs 0 < s < t/2; got s={s}, t={t}")
    return (4 * (t - s) / (t - 2 * s)) ** n


@dataclass
class InequalityReport:
    lhs: float
    rhs: float
    constant: float
    sup_norm: float
    sup_norm_refined: float
    slack: float
    holds: bool
    s: float
    t: float
    M: int
    grid: dict = field(default_factory=dict)
    note: str = PROXY_NOTE

    def to_dict(self):
        return _report_dict(self)


def grid_sup(g: Symbol, R: float = 4.0, resolution: int = 17, stability: float = 0.10):
    """Grid supremum of ``||g||`` at radius ``R`` and ``2R``; AccuracyError if they differ by > 10%."""
    a = float(np.max(spectral_norm(g(sample_points(g.n, R, resolution)))))
    b = float(np.max(spectral_norm(g(sample_points(g.n, 2 * R, 2 * resolution - 1)))))
    if not np.isfinite(b) or abs(b - a) > stability * max(a, 1e-300) and max(a, b) > 1e-12:
        raise AccuracyError(f"sup-norm estimate not stable under refinement ({a:.6g} -> {b:.6g})")
    return a, b


def bc_verify(f: Symbol, s: float, spec: TruncationSpec, R: float = 4.0, resolution: int = 17,
              q: QuadratureSpec = DEFAULT_QUADRATURE) -> InequalityReport:
    """Check ``||P_M T_f P_M|| <= C(s, t) sup ||heat(f, s)||`` at one truncation."""
    t = spec.ctx.t
    C = bc_constant(s, t, spec.ctx.n)
    fs = heat_transform(f, HeatParams(s))
    a, b = grid_sup(fs, R, resolution)
    L = operator_norm(assemble_toeplitz(f, spec, q))
    rhs = C * max(a, b)
    return InequalityReport(L, rhs, C, a, b, rhs - L, bool(L <= rhs), s, t, spec.M,
                            {"R": R, "resolution": resolution})


def perturbation_bound_check(f: Symbol, s: float, spec: TruncationSpec, R: float = 4.0, resolution: int = 17,
                             q: QuadratureSpec = DEFAULT_QUADRATURE) -> InequalityReport:
    """Check ``||T_f - T_{heat(f,s)}|| <= C(s, t) sup ||heat(f,s) - heat(f,2s)||`` at one truncation."""
    t = spec.ctx.t
    C = bc_constant(s, t, spec.ctx.n)
    fs = heat_transform(f, HeatParams(s))
    f2s = heat_transform(f, HeatParams(2 * s))
    a, b = grid_sup(fs - f2s, R, resolution)
    diff = assemble_toeplitz(f, spec, q).matrix - assemble_toeplitz(fs, spec, q).matrix
    L = float(np.linalg.norm(diff, 2))
    rhs = C * max(a, b)
    tol = 1e-12 * max(1.0, rhs)
    return InequalityReport(L, rhs, C, a, b, rhs - L, bool(L <= rhs + tol), s, t, spec.M,
                            {"R": R, "resolution": resolution})


# --------------------------------------------------------------------------
# Taylor remainder
# --------------------------------------------------------------------------
@dataclass
class TaylorReport:
    max_remainder: float
    bound: float
    constant: float
    step_norm: float
    holds: bool
    grid: dict = field(default_factory=dict)
    note: str = PROXY_NOTE

    def to_dict(self):
        return _report_dict(self)


def taylor_remainder_check(F: Symbol, x, R: float = 4.0, resolution: int = 17) -> TaylorReport:
    """Bound ``R_x(y) = F(y + x) - F(y) - x . grad F(y)`` by ``c (|x| + |x|^2)``.

    ``x`` is a real vector of length ``2n`` ordered ``(x_1..x_n, xi_1..xi_n)``.
    ``c`` is the root-sum-square of the linear-fit oscillation constants of
    the partials on the radius-``R`` grid, and ``y`` ranges over the grid of
    radius ``R - |x|`` so every segment ``y + tau x`` stays inside it.
    """
    if not F.has_gradient:
        raise UnsupportedVariantError("taylor_remainder_check needs a closed-form gradient")
    n = F.n
    x = np.asarray(x, dtype=float).reshape(2 * n)
    xc = x[:n] + 1j * x[n:]
    step = float(np.linalg.norm(x))
    if step >= R:
        raise ParameterError("displacement must be shorter than the grid radius")
    y = sample_points(n, R - step, resolution)
    grad = F.gradient(y)                                              # (P, 2n, d, d)
    rem = F(y + xc) - F(y) - np.einsum("k,pkij->pij", x, grad)
    consts = [oscillation_estimate(p, max(R, 2.0), resolution).linear_constant for p in partial_symbols(F)]
    c = float(np.sqrt(np.sum(np.square(consts))))
    worst = float(np.max(spectral_norm(rem)))
    bound = c * (step + step**2)
    return TaylorReport(worst, bound, c, step, bool(worst <= bound * (1 + 1e-9) + 1e-12),
                        {"R": R, "resolution": resolution})


# --------------------------------------------------------------------------
# commutator theorem diagnostics
# --------------------------------------------------------------------------
@dataclass
class CommutatorDiagnostics:
    cutoffs: list
    c1: list
    c2: list
    exponent_c1: float
    exponent_c2: float
    assembly_cutoff: int
    n_random: int
    seed: int
    note: str = PROXY_NOTE

    def to_dict(self):
        return _report_dict(self)


def _growth_exponent(ms, cs, floor=1e-10):
    ms = np.asarray(ms, dtype=float)
    cs = np.maximum(np.asarray(cs, dtype=float), floor)
    half = len(ms) // 2
    sel = slice(half, None) if len(ms) - half >= 2 else slice(None)
    return float(np.polyfit(np.log(ms[sel]), np.log(cs[sel]), 1)[0])


def commutator_diagnostics(f: Symbol, ctx: QuantizationContext, cutoffs, n_random: int = 32, seed: int = 0,
                           margin: int | None = None, q: QuadratureSpec = DEFAULT_QUADRATURE) -> CommutatorDiagnostics:
    """Constants of the commutator conditions against ``N`` for vectors in degrees ``<= m``.

    ``c1(m) = max ||T_f g|| / ||N g||`` and
    ``c2(m) = max |<N g, T_f g> - <T_f g, N g>| / <N g, g>`` over the basis
    vectors of degree ``<= m`` and ``n_random`` seeded random unit vectors.
    ``T_f`` is assembled once at ``max(cutoffs) + margin`` (margin defaults
    to the degree of a polynomial symbol, 16 otherwise) so that ``T_f g`` is
    resolved.  Growth exponents fit ``log c`` against ``log m`` on the upper
    half of the cutoffs.
    """
    cutoffs = [int(m) for m in cutoffs]
    if len(cutoffs) < 2 or any(b <= a for a, b in zip(cutoffs, cutoffs[1:])) or cutoffs[0] < 1:
        raise ParameterError("cutoffs must be a strictly increasing list of positive integers")
    if margin is None:
        margin = f.as_polynomial().degree if f.is_polynomial else 16
    spec = TruncationSpec(ctx, cutoffs[-1] + margin)
    A = assemble_toeplitz(f, spec, q).matrix
    Nd = np.real(np.diag(harmonic_oscillator(spec).matrix))
    rng = np.random.default_rng(seed)
    c1s, c2s = [], []
    for m in cutoffs:
        cols = spec.block(m)
        Ac = A[:, cols]
        basis_c1 = np.linalg.norm(Ac, axis=0) / Nd[cols]
        diag = Ac[cols, np.arange(cols.size)]
        basis_c2 = 2 * np.abs(np.imag(Nd[cols] * diag)) / Nd[cols]
        G = rng.normal(size=(cols.size, n_random)) + 1j * rng.normal(size=(cols.size, n_random))
        G /= np.linalg.norm(G, axis=0)
        TG = Ac @ G
        NG = Nd[cols, None] * G
        rand_c1 = np.linalg.norm(TG, axis=0) / np.linalg.norm(NG, axis=0)
        inner = np.einsum("ik,ik->k", np.conj(NG), TG[cols])
        rand_c2 = 2 * np.abs(inner.imag) / np.einsum("ik,ik->k", np.conj(NG), G).real
        c1s.append(float(max(basis_c1.max(), rand_c1.max())))
        c2s.append(float(max(basis_c2.max(), rand_c2.max())))
    return CommutatorDiagnostics(cutoffs, c1s, c2s, _growth_exponent(cutoffs, c1s), _growth_exponent(cutoffs, c2s),
                                 spec.M, n_random, seed)


# --------------------------------------------------------------------------
# angular derivative bound
# --------------------------------------------------------------------------
@dataclass
class ThetaReport:
    verdict: bool
    symbol_degree: int
    symbol_constant: float
    theta_degree: int
    theta_constant: float
    grid: dict = field(default_factory=dict)
    note: str = PROXY_NOTE

    def to_dict(self):
        return _report_dict(self)


def theta_derivative_bound(f: Symbol, R: float = 4.0, resolution: int = 17) -> ThetaReport:
    """Are ``||f||`` and ``||d_theta f||`` quadratically bounded on the grid?"""
    N, c = poly_bound_fit(f, R, resolution)
    try:
        Nt, ct = poly_bound_fit(theta_derivative(f), R, resolution)
    except GrowthError:
        Nt, ct = 13, float("inf")
    return ThetaReport(bool(N <= 2 and Nt <= 2), N, c, Nt, ct, {"R": R, "resolution": resolution})
