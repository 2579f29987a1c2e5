"""Truncated monomial basis of the Segal-Bargmann space.

The orthonormal basis is ``e_nu(z) = z^nu / sqrt(nu! (2t)^{|nu|})``.  A
:class:`TruncationSpec` keeps every multi-index with total degree
``|nu| <= M``, ordered by degree and, within a degree, lexicographically
from the largest first entry down.  Vector-valued coefficient arrays use
block order: basis index major, internal index minor.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from math import comb

import numpy as np
from scipy.special import eval_hermite, gammaln
from scipy.stats import poisson

from .core import QuantizationContext, as_points, normalized_kernel, sqnorm
from .errors import DegenerateInputError, ParameterError

LOG_SPACE_DEGREE = 150


def _compositions(total, parts):
    if parts == 1:
        yield (total,)
        return
    for first in range(total, -1, -1):
        for rest in _compositions(total - first, parts - 1):
            yield (first,) + rest


@dataclass(frozen=True)
class TruncationSpec:
    """Total-degree truncation ``{nu : |nu| <= M}`` of the basis for a context."""

    ctx: QuantizationContext
    M: int

    def __post_init__(self):
        if int(self.M) != self.M or self.M < 0:
            raise ParameterError(f"cutoff M must be a non-negative integer, got {self.M!r}")

    @cached_property
    def basis(self) -> tuple:
        return tuple(nu for k in range(self.M + 1) for nu in _compositions(k, self.ctx.n))

    @cached_property
    def exponents(self) -> np.ndarray:
        e = np.array(self.basis, dtype=np.int64).reshape(-1, self.ctx.n)
        e.setflags(write=False)
        return e

    @cached_property
    def degrees(self) -> np.ndarray:
        d = self.exponents.sum(axis=1)
        d.setflags(write=False)
        return d

    @cached_property
    def index(self) -> dict:
        return {nu: i for i, nu in enumerate(self.basis)}

    @property
    def size(self) -> int:
        return comb(self.M + self.ctx.n, self.ctx.n)

    @property
    def dim(self) -> int:
        return self.size * self.ctx.d

    @cached_property
    def log_norms(self) -> np.ndarray:
        """``log sqrt(nu! (2t)^{|nu|})`` per basis element."""
        e = self.exponents
        v = 0.5 * (gammaln(e + 1).sum(axis=1) + self.degrees * np.log(2 * self.ctx.t))
        v.setflags(write=False)
        return v

    def block(self, max_degree) -> np.ndarray:
        """Row/column indices (including internal index) of all ``|nu| <= max_degree``."""
        basis_idx = np.flatnonzero(self.degrees <= max_degree)
        d = self.ctx.d
        return (basis_idx[:, None] * d + np.arange(d)[None, :]).ravel()

    def expand_internal(self, per_basis) -> np.ndarray:
        """Repeat a per-basis array over the internal index (block order)."""
        return np.repeat(np.asarray(per_basis), self.ctx.d)

    def to_dict(self):
        return {"ctx": self.ctx.to_dict(), "M": self.M}


def enumerate_basis(spec: TruncationSpec) -> list:
    """All multi-indices with ``|nu| <= M`` in graded-lex order."""
    return list(spec.basis)


def monomial_eval(ctx: QuantizationContext, nu, z):
    """``e_nu(z)``; the normalization is taken in log space above degree 150."""
    nu = np.asarray(nu, dtype=np.int64).reshape(ctx.n)
    z = as_points(z, ctx.n)
    deg = int(nu.sum())
    if deg <= LOG_SPACE_DEGREE:
        lognorm = 0.5 * (gammaln(nu + 1).sum() + deg * np.log(2 * ctx.t))
        return np.prod(z**nu, axis=-1) * np.exp(-lognorm)
    return _log_monomials(ctx, nu[None, :], z)[..., 0]


def _log_monomials(ctx, exps, z):
    """``e_nu(z)`` for rows of ``exps``, fully in log space; returns shape ``z.shape[:-1] + (len(exps),)``."""
    absz = np.abs(z)
    with np.errstate(divide="ignore"):
        logabs = np.log(absz)
    ang = np.angle(z)
    # 0 * log 0 := 0 ; a positive power of 0 gives exactly zero
    zero = absz[..., None, :] == 0
    la = np.where(zero & (exps > 0), -np.inf, np.where(exps > 0, exps * logabs[..., None, :], 0.0))
    phase = (exps * ang[..., None, :]).sum(axis=-1)
    lognorm = 0.5 * (gammaln(exps + 1).sum(axis=-1) + exps.sum(axis=-1) * np.log(2 * ctx.t))
    return np.exp(la.sum(axis=-1) - lognorm) * np.exp(1j * phase)


def basis_values(spec: TruncationSpec, z) -> np.ndarray:
    """Matrix of ``e_nu(z_p)``, shape ``z.shape[:-1] + (spec.size,)``."""
    ctx = spec.ctx
    z = as_points(z, ctx.n)
    if spec.M <= LOG_SPACE_DEGREE:
        powers = z[..., None, :] ** spec.exponents
        return np.prod(powers, axis=-1) * np.exp(-spec.log_norms)
    return _log_monomials(ctx, spec.exponents, z)


@dataclass
class CoefficientVector:
    """Coefficients ``<f, e_nu>`` (block order) on a truncation, plus the mass cut off."""

    spec: TruncationSpec
    coeffs: np.ndarray
    tail_mass: float = 0.0
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.coeffs = np.asarray(self.coeffs, dtype=complex)
        if self.coeffs.shape != (self.spec.dim,):
            raise ParameterError(f"coefficient vector must have length {self.spec.dim}, got {self.coeffs.shape}")

    @property
    def norm2(self) -> float:
        return float(np.vdot(self.coeffs, self.coeffs).real)

    def degree_profile(self) -> np.ndarray:
        """Largest |coefficient| in each degree 0..M."""
        mags = np.abs(self.coeffs).reshape(self.spec.size, self.spec.ctx.d).max(axis=1)
        prof = np.zeros(self.spec.M + 1)
        np.maximum.at(prof, self.spec.degrees, mags)
        return prof

    def evaluate(self, z) -> np.ndarray:
        """Function value ``sum_nu c_nu e_nu(z)`` in C^d (last axis)."""
        vals = basis_values(self.spec, z)
        c = self.coeffs.reshape(self.spec.size, self.spec.ctx.d)
        return vals @ c


def basis_vector(spec: TruncationSpec, nu, internal: int = 0) -> CoefficientVector:
    c = np.zeros(spec.dim, dtype=complex)
    c[spec.index[tuple(int(k) for k in np.atleast_1d(nu))] * spec.ctx.d + internal] = 1.0
    return CoefficientVector(spec, c)


def coherent_tail_mass(spec: TruncationSpec, w) -> float:
    """Squared norm of ``k_w`` above degree M: ``P(Poisson(|w|^2/2t) > M)``."""
    w = as_points(w, spec.ctx.n)
    return float(poisson.sf(spec.M, float(sqnorm(w)) / (2 * spec.ctx.t)))


def coherent_coefficients(spec: TruncationSpec, w, internal=None) -> CoefficientVector:
    """Coefficients of ``k_w`` (times the internal vector when ``d > 1``).

    Entry ``nu`` is ``conj(e_nu(w)) exp(-|w|^2/4t)``; the untruncated vector
    has unit norm and the discarded mass is returned in ``tail_mass``.
    """
    ctx = spec.ctx
    w = as_points(w, ctx.n)
    if w.ndim != 1:
        raise ParameterError("coherent_coefficients takes a single point")
    c = np.conj(basis_values(spec, w)) * np.exp(-sqnorm(w) / (4 * ctx.t))
    if ctx.d > 1:
        x = np.zeros(ctx.d, dtype=complex)
        if internal is None:
            x[0] = 1.0
        else:
            x[:] = internal
        c = np.kron(c, x)
    elif internal is not None:
        c = c * complex(np.ravel(internal)[0])
    return CoefficientVector(spec, c, tail_mass=coherent_tail_mass(spec, w))


def coherent_reconstruction_error(spec: TruncationSpec, w, z) -> float:
    """``|sum_nu c_nu e_nu(z) - k_w(z)|`` for the scalar coherent state."""
    ctx = QuantizationContext(spec.ctx.n, spec.ctx.t, 1)
    s1 = TruncationSpec(ctx, spec.M)
    v = coherent_coefficients(s1, w)
    approx = v.evaluate(z)[..., 0]
    return float(np.max(np.abs(approx - normalized_kernel(ctx, z, w))))


def hermite_function(k: int, x):
    """``psi_k(x) = (2^k k! sqrt(pi))^{-1/2} H_k(x) exp(-x^2/2)`` via the physicists' polynomial."""
    x = np.asarray(x, dtype=float)
    lognorm = 0.5 * (k * np.log(2.0) + gammaln(k + 1) + 0.5 * np.log(np.pi))
    return eval_hermite(k, x) * np.exp(-x**2 / 2 - lognorm)


def hermite_function_recurrence(k: int, x):
    """Same values from the stable three-term recurrence."""
    x = np.asarray(x, dtype=float)
    prev = np.zeros_like(x)
    cur = np.pi**-0.25 * np.exp(-x**2 / 2)
    for j in range(k):
        prev, cur = cur, np.sqrt(2.0 / (j + 1)) * x * cur - np.sqrt(j / (j + 1)) * prev
    return cur


def bargmann_hermite_check(ctx: QuantizationContext, nu, x):
    """Image of ``e_nu`` under the Bargmann isometry at ``x``, computed two ways.

    Returns ``(t^{-1/4} psi_nu(x / sqrt t)`` from the closed Hermite polynomial,
    the same from the recurrence)``.  Only ``n = 1``.
    """
    if ctx.n != 1:
        raise ParameterError("bargmann_hermite_check is implemented for n = 1 only")
    k = int(np.ravel(nu)[0])
    y = np.asarray(x, dtype=float) / np.sqrt(ctx.t)
    scale = ctx.t ** (-0.25)
    return scale * hermite_function(k, y), scale * hermite_function_recurrence(k, y)


@dataclass
class DecayReport:
    finite_support: bool
    last_nonzero_degree: int
    loglog_slope: float
    loglog_slope_lower: float
    exponential_rate: float
    tested_rates: tuple
    rapid_decay: bool

    def to_dict(self):
        return dict(self.__dict__)


def decay_diagnostic(v: CoefficientVector, tested_rates=(1, 2, 4, 8)) -> DecayReport:
    """Proxy test for rapid decrease of the coefficient sequence.

    Works on the per-degree maximum ``a_k``.  Exact zeros above some degree
    count as finite support.  Otherwise the log-log slope of ``a_k`` against
    ``1 + k`` is fitted on the upper and lower half of the degrees; the tail
    decays faster than every tested power when the upper slope is below
    ``-max(tested_rates)`` and steeper than the lower slope.
    """
    if v.coeffs.size < 8:
        raise ParameterError("decay_diagnostic needs at least 8 coefficients")
    prof = v.degree_profile()
    nz = np.flatnonzero(prof > 0)
    if nz.size == 0:
        raise DegenerateInputError("all-zero coefficient vector")
    last = int(nz[-1])
    M = prof.size - 1
    if last < M:
        return DecayReport(True, last, -np.inf, -np.inf, np.inf, tuple(tested_rates), True)
    k = np.arange(M + 1)
    tiny = np.finfo(float).tiny
    la = np.log(np.maximum(prof, tiny))
    half = (M + 1) // 2
    upper = slice(half, M + 1)
    lower = slice(0, max(half, 2))
    slope_u = np.polyfit(np.log1p(k[upper]), la[upper], 1)[0]
    slope_l = np.polyfit(np.log1p(k[lower]), la[lower], 1)[0]
    rate = -np.polyfit(k[upper], la[upper], 1)[0]
    rapid = bool(slope_u < -max(tested_rates) and slope_u < slope_l)
    return DecayReport(False, last, float(slope_u), float(slope_l), float(rate), tuple(tested_rates), rapid)
