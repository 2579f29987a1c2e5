"""Phase-space primitives on C^n: Gaussian measure, reproducing kernels, symplectic form.

Points are complex arrays whose last axis has length ``n``; ``z = x + i xi``
componentwise.  ``|z|^2`` is always ``sum_j |z_j|^2``.  For ``n = 1`` a bare
complex scalar is accepted wherever a point is expected.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ParameterError
from .quadrature import DEFAULT_QUADRATURE, QuadratureSpec, converge, measure_rule


@dataclass(frozen=True)
class QuantizationContext:
    """Complex dimension ``n``, quantization parameter ``t`` and internal dimension ``d``."""

    n: int
    t: float
    d: int = 1

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise ParameterError(f"n must be a positive integer, got {self.n!r}")
        if int(self.d) != self.d or self.d < 1:
            raise ParameterError(f"d must be a positive integer, got {self.d!r}")
        if not (np.isfinite(self.t) and self.t > 0):
            raise ParameterError(f"t must be positive, got {self.t!r}")

    def with_t(self, t):
        return QuantizationContext(self.n, t, self.d)

    def to_dict(self):
        return {"n": self.n, "t": self.t, "d": self.d}


def as_points(z, n: int) -> np.ndarray:
    """Coerce ``z`` to a complex array with trailing axis ``n``."""
    z = np.asarray(z, dtype=complex)
    if n == 1 and (z.ndim == 0 or z.shape[-1] != 1):
        z = z[..., None]
    if z.shape[-1] != n:
        raise ParameterError(f"expected points with trailing dimension {n}, got shape {z.shape}")
    if not np.all(np.isfinite(z)):
        raise ParameterError("phase-space points must be finite")
    return z


def sqnorm(z) -> np.ndarray:
    z = np.asarray(z)
    return np.sum(z.real**2 + z.imag**2, axis=-1)


def dot(z, w) -> np.ndarray:
    """Bilinear ``z . w = sum_j z_j w_j`` (no conjugation)."""
    return np.sum(np.asarray(z) * np.asarray(w), axis=-1)


def reproducing_kernel(ctx: QuantizationContext, z, w):
    """``K(z, w) = exp(conj(w) . z / 2t)``."""
    z = as_points(z, ctx.n)
    w = as_points(w, ctx.n)
    return np.exp(dot(np.conj(w), z) / (2 * ctx.t))


def normalized_kernel(ctx: QuantizationContext, z, w):
    """Coherent state ``k_w(z) = exp(-|w|^2/4t) K(z, w)``, evaluated at ``z``."""
    z = as_points(z, ctx.n)
    w = as_points(w, ctx.n)
    return np.exp(dot(np.conj(w), z) / (2 * ctx.t) - sqnorm(w) / (4 * ctx.t))


def symplectic_form(z, w):
    """``omega(z, w) = Im(conj(z) . w)``; points of any common dimension."""
    z = np.asarray(z, dtype=complex)
    w = np.asarray(w, dtype=complex)
    if z.ndim == 0:
        z = z[None]
    if w.ndim == 0:
        w = w[None]
    return np.imag(np.sum(np.conj(z) * w, axis=-1))


def gaussian_density(ctx: QuantizationContext, z):
    """Density of ``mu_t`` with respect to Lebesgue measure on C^n = R^{2n}."""
    z = as_points(z, ctx.n)
    return (2 * np.pi * ctx.t) ** (-ctx.n) * np.exp(-sqnorm(z) / (2 * ctx.t))


def integrate_mu(ctx: QuantizationContext, func, quad: QuadratureSpec = DEFAULT_QUADRATURE,
                 what: str = "mu-integral"):
    """Adaptive ``int func(u) d mu_t(u)``.

    ``func`` maps an array of points of shape ``(P, n)`` to values of shape
    ``(P, ...)``.  Returns ``(value, nodes)``.
    """
    def evaluate(na, nr):
        pts, wts = measure_rule(ctx.n, ctx.t, na, nr)
        vals = np.asarray(func(pts))
        return np.tensordot(wts, vals, axes=(0, 0))

    return converge(evaluate, quad, what=what)
