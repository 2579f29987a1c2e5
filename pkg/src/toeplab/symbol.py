"""Phase-space symbols f: C^n -> (d x d complex matrices) and their heat transforms.

Three variants share one interface:

* :class:`PolynomialSymbol` -- ``f(z) = sum c_{a,b} z^a conj(z)^b`` with matrix
  coefficients; closed forms for derivatives, shifts, rotations, products and
  heat transforms.
* :class:`CallableSymbol` -- a deterministic vectorized evaluator.
* built-ins (``AbsSquared``, ``ReZCubed``, ``SineRe``, ``RelativisticKinetic``,
  ``ShiftInteraction``, ``Magnetic``, ``Constant``), which are one of the two
  above carrying a name and parameters for serialization.

Evaluation is vectorized: points of shape ``(..., n)`` give values of shape
``(..., d, d)``.  Symbols hold ``n`` and ``d`` only; the quantization
parameter enters through the context passed to quantizing operations.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from math import comb, factorial

import numpy as np

from .core import QuantizationContext, as_points, dot, sqnorm
from .errors import (GrowthError, ParameterError, QuadratureError,
                     SymbolEvaluationError, UnsupportedVariantError)
from .quadrature import (DEFAULT_QUADRATURE, QuadratureSpec, converge, gaussian_rule,
                         measure_rule, _agree)

HERMITIAN_TOL = 1e-10
_CHUNK = 2_000_000


def spectral_norm(values) -> np.ndarray:
    """Largest singular value over the last two axes."""
    values = np.asarray(values)
    if values.shape[-1] == 1 and values.shape[-2] == 1:
        return np.abs(values[..., 0, 0])
    return np.linalg.norm(values, ord=2, axis=(-2, -1))


def sample_points(n: int, R: float, resolution: int = 17, seed: int = 0) -> np.ndarray:
    """Deterministic probe points in the closed ball of radius ``R``.

    ``n = 1``: a square lattice clipped to the disc plus the boundary circle.
    ``n > 1``: the same lattice in each coordinate plane plus seeded random
    points in the ball.
    """
    xs = np.linspace(-R, R, resolution)
    X, Y = np.meshgrid(xs, xs, indexing="ij")
    plane = (X + 1j * Y).ravel()
    plane = plane[np.abs(plane) <= R * (1 + 1e-12)]
    circle = R * np.exp(2j * np.pi * np.arange(4 * resolution) / (4 * resolution))
    plane = np.concatenate([plane, circle])
    if n == 1:
        return plane[:, None]
    pts = []
    for j in range(n):
        p = np.zeros((plane.size, n), dtype=complex)
        p[:, j] = plane
        pts.append(p)
    rng = np.random.default_rng(seed)
    m = resolution**2
    g = rng.normal(size=(m, n)) + 1j * rng.normal(size=(m, n))
    g /= np.sqrt(sqnorm(g))[:, None]
    g *= (R * rng.uniform(size=m) ** (1 / (2 * n)))[:, None]
    pts.append(g)
    return np.concatenate(pts)


class Symbol:
    """Common interface; subclasses implement :meth:`_evaluate`."""

    n: int
    d: int
    name: str | None = None
    params: dict | None = None

    def __call__(self, z):
        return self.eval(z)

    def eval(self, z):
        """``f(z)`` as an array of shape ``z.shape[:-1] + (d, d)``."""
        z = as_points(z, self.n)
        return self._evaluate(z)

    def _evaluate(self, z):
        raise NotImplementedError

    @property
    def is_polynomial(self) -> bool:
        return False

    @property
    def hermitian(self) -> bool:
        raise NotImplementedError

    def gradient(self, z):
        """Real partials ``(d/dx_1..d/dx_n, d/dxi_1..d/dxi_n)``: shape ``(..., 2n, d, d)``."""
        raise UnsupportedVariantError(f"{self!r} has no closed-form gradient")

    @property
    def has_gradient(self) -> bool:
        try:
            self.gradient(np.zeros(self.n, dtype=complex))
        except UnsupportedVariantError:
            return False
        return True

    # algebra ---------------------------------------------------------------
    def __add__(self, other):
        other = _as_symbol(other, self)
        if self.is_polynomial and other.is_polynomial:
            return self.as_polynomial().add(other.as_polynomial())
        return SumSymbol([self, other])

    __radd__ = __add__

    def __neg__(self):
        return self * -1.0

    def __sub__(self, other):
        return self + (-_as_symbol(other, self))

    def __rsub__(self, other):
        return _as_symbol(other, self) - self

    def __mul__(self, other):
        if np.isscalar(other):
            return ScaledSymbol(self, complex(other))
        other = _as_symbol(other, self)
        if self.is_polynomial and other.is_polynomial:
            return self.as_polynomial().multiply(other.as_polynomial())
        return ProductSymbol(self, other)

    def __rmul__(self, other):
        if np.isscalar(other):
            return self * other
        return _as_symbol(other, self) * self

    def as_polynomial(self) -> "PolynomialSymbol":
        raise UnsupportedVariantError(f"{self!r} is not a polynomial symbol")

    def to_dict(self) -> dict:
        if self.name is not None:
            return {"builtin": self.name, "params": _jsonable(self.params or {})}
        raise UnsupportedVariantError(f"{self!r} cannot be serialized")

    def __repr__(self):
        if self.name:
            return f"{self.name}({', '.join(f'{k}={v!r}' for k, v in (self.params or {}).items())})"
        return f"{type(self).__name__}(n={self.n}, d={self.d})"


def _jsonable(params):
    out = {}
    for k, v in params.items():
        if isinstance(v, Symbol):
            out[k] = v.to_dict()
        elif isinstance(v, complex):
            out[k] = [v.real, v.imag]
        elif isinstance(v, np.ndarray):
            out[k] = v.tolist()
        else:
            out[k] = v
    return out


def _as_symbol(obj, like: Symbol) -> Symbol:
    if isinstance(obj, Symbol):
        if obj.n != like.n or obj.d != like.d:
            raise ParameterError(f"symbol shapes differ: (n={obj.n}, d={obj.d}) vs (n={like.n}, d={like.d})")
        return obj
    if np.isscalar(obj):
        return constant(np.eye(like.d) * obj, n=like.n)
    raise TypeError(f"cannot combine a symbol with {type(obj).__name__}")


def _check_hermitian_on_grid(sym: Symbol) -> bool:
    pts = sample_points(sym.n, 3.0, 7)
    v = sym(pts)
    return bool(np.max(np.abs(v - np.conj(np.swapaxes(v, -1, -2))), initial=0.0) <= HERMITIAN_TOL)


# --------------------------------------------------------------------------
# polynomial symbols
# --------------------------------------------------------------------------
class PolynomialSymbol(Symbol):
    """``f(z) = sum_{a,b} c_{a,b} z^a conj(z)^b`` with ``d x d`` complex coefficients."""

    def __init__(self, n: int, d: int, terms: dict, name=None, params=None):
        self.n = int(n)
        self.d = int(d)
        clean = {}
        for (a, b), c in terms.items():
            a = tuple(int(k) for k in np.atleast_1d(a))
            b = tuple(int(k) for k in np.atleast_1d(b))
            if len(a) != self.n or len(b) != self.n or min(a + b) < 0:
                raise ParameterError(f"bad exponent pair {(a, b)} for n={self.n}")
            c = np.asarray(c, dtype=complex)
            if c.ndim == 0:
                c = c * np.eye(self.d)
            if c.shape != (self.d, self.d):
                raise ParameterError(f"coefficient of {(a, b)} must be {self.d}x{self.d}")
            clean[(a, b)] = clean.get((a, b), 0) + c
        self.terms = {k: v for k, v in clean.items() if np.any(v != 0)}
        self.name = name
        self.params = params

    @property
    def is_polynomial(self):
        return True

    def as_polynomial(self):
        return self

    @property
    def degree(self) -> int:
        return max((sum(a) + sum(b) for a, b in self.terms), default=0)

    @property
    def hermitian(self) -> bool:
        for (a, b), c in self.terms.items():
            partner = self.terms.get((b, a))
            if partner is None:
                if np.max(np.abs(c)) > HERMITIAN_TOL:
                    return False
            elif np.max(np.abs(partner - c.conj().T)) > HERMITIAN_TOL:
                return False
        return True

    def _arrays(self):
        if not self.terms:
            z = np.zeros((1, self.n), dtype=np.int64)
            return z, z, np.zeros((1, self.d, self.d), dtype=complex)
        keys = list(self.terms)
        A = np.array([k[0] for k in keys], dtype=np.int64)
        B = np.array([k[1] for k in keys], dtype=np.int64)
        C = np.stack([self.terms[k] for k in keys])
        return A, B, C

    def _evaluate(self, z):
        A, B, C = self._arrays()
        zz = z[..., None, :]
        mon = np.prod(zz**A * np.conj(zz) ** B, axis=-1)
        out = mon @ C.reshape(C.shape[0], -1)
        return out.reshape(z.shape[:-1] + (self.d, self.d))

    def add(self, other: "PolynomialSymbol"):
        terms = dict(self.terms)
        for k, c in other.terms.items():
            terms[k] = terms.get(k, 0) + c
        return PolynomialSymbol(self.n, self.d, terms)

    def scale(self, s):
        return PolynomialSymbol(self.n, self.d, {k: s * c for k, c in self.terms.items()})

    def multiply(self, other: "PolynomialSymbol"):
        """Pointwise product ``f(z) g(z)`` (matrix order preserved)."""
        terms = {}
        for (a, b), c in self.terms.items():
            for (a2, b2), c2 in other.terms.items():
                k = (tuple(x + y for x, y in zip(a, a2)), tuple(x + y for x, y in zip(b, b2)))
                terms[k] = terms.get(k, 0) + c @ c2
        return PolynomialSymbol(self.n, self.d, terms)

    def derivative(self, j: int, conjugate: bool = False):
        """Wirtinger derivative ``d/dz_j`` or ``d/dconj(z_j)``."""
        if not 0 <= j < self.n:
            raise ParameterError(f"coordinate {j} out of range for n={self.n}")
        terms = {}
        for (a, b), c in self.terms.items():
            e = list(b if conjugate else a)
            if e[j] == 0:
                continue
            factor = e[j]
            e[j] -= 1
            k = (a, tuple(e)) if conjugate else (tuple(e), b)
            terms[k] = terms.get(k, 0) + factor * c
        return PolynomialSymbol(self.n, self.d, terms)

    def real_partials(self) -> list:
        """``[d/dx_1, ..., d/dx_n, d/dxi_1, ..., d/dxi_n]`` as polynomials."""
        out_x, out_xi = [], []
        for j in range(self.n):
            dz = self.derivative(j)
            dzb = self.derivative(j, conjugate=True)
            out_x.append(dz.add(dzb))
            out_xi.append(dz.add(dzb.scale(-1)).scale(1j))
        return out_x + out_xi

    def gradient(self, z):
        z = as_points(z, self.n)
        return np.stack([p(z) for p in self.real_partials()], axis=-3)

    def shift(self, c):
        """``z -> f(z + c)``."""
        c = as_points(c, self.n)
        terms = {}
        for (a, b), coef in self.terms.items():
            ranges = [range(k + 1) for k in a] + [range(k + 1) for k in b]
            for pq in itertools.product(*ranges):
                p, q = pq[: self.n], pq[self.n:]
                w = 1.0 + 0j
                for j in range(self.n):
                    w *= comb(a[j], p[j]) * c[j] ** (a[j] - p[j])
                    w *= comb(b[j], q[j]) * np.conj(c[j]) ** (b[j] - q[j])
                k = (tuple(p), tuple(q))
                terms[k] = terms.get(k, 0) + w * coef
        return PolynomialSymbol(self.n, self.d, terms)

    def rotate(self, theta: float):
        """``z -> f(e^{i theta} z)``."""
        return PolynomialSymbol(self.n, self.d, {
            (a, b): np.exp(1j * theta * (sum(a) - sum(b))) * c for (a, b), c in self.terms.items()})

    def heat(self, s: float):
        """Closed-form heat transform via Gaussian moments ``E[w^p conj(w)^q] = delta_pq p! (2s)^|p|``."""
        if s == 0:
            return self
        terms = {}
        for (a, b), c in self.terms.items():
            ranges = [range(min(x, y) + 1) for x, y in zip(a, b)]
            for p in itertools.product(*ranges):
                w = 1.0
                for j in range(self.n):
                    w *= comb(a[j], p[j]) * comb(b[j], p[j]) * factorial(p[j]) * (2 * s) ** p[j]
                k = (tuple(x - y for x, y in zip(a, p)), tuple(x - y for x, y in zip(b, p)))
                terms[k] = terms.get(k, 0) + w * c
        return PolynomialSymbol(self.n, self.d, terms)

    def to_dict(self):
        if self.name is not None:
            return super().to_dict()
        return {"n": self.n, "d": self.d, "terms": [
            {"a": list(a), "b": list(b), "re": c.real.tolist(), "im": c.imag.tolist()}
            for (a, b), c in sorted(self.terms.items())]}


# --------------------------------------------------------------------------
# callable symbols
# --------------------------------------------------------------------------
class CallableSymbol(Symbol):
    """Wraps a vectorized evaluator ``func(z) -> (..., d, d)`` (or ``(...)`` when ``d = 1``).

    ``grad`` optionally returns the real partials with shape ``(..., 2n, d, d)``.
    Evaluators must be deterministic; failures are re-raised with the
    offending point attached.
    """

    def __init__(self, func, n: int, d: int = 1, grad=None, hermitian=None, name=None, params=None):
        self.func = func
        self.n = int(n)
        self.d = int(d)
        self._grad = grad
        self.name = name
        self.params = params
        self._hermitian = hermitian

    def _call_raw(self, fn, z, tail):
        try:
            out = np.asarray(fn(z), dtype=complex)
        except Exception as exc:  # locate the first failing point
            flat = z.reshape(-1, self.n)
            for p in flat:
                try:
                    fn(p[None, :])
                except Exception:
                    raise SymbolEvaluationError(f"{self!r} failed at z={p.tolist()}: {exc}", z=p) from exc
            raise SymbolEvaluationError(f"{self!r} failed: {exc}") from exc
        if self.d == 1 and out.shape == z.shape[:-1] + tail[:-2]:
            out = out[..., None, None]
        out = np.broadcast_to(out, z.shape[:-1] + tail)
        if not np.all(np.isfinite(out)):
            bad = np.argwhere(~np.isfinite(out.reshape(z.shape[:-1] + (-1,))).any(axis=-1))
            p = z[tuple(bad[0])] if bad.size else None
            raise SymbolEvaluationError(f"{self!r} returned a non-finite value at z={p}", z=p)
        return out

    def _evaluate(self, z):
        return self._call_raw(self.func, z, (self.d, self.d))

    def gradient(self, z):
        if self._grad is None:
            raise UnsupportedVariantError(f"{self!r} has no closed-form gradient")
        z = as_points(z, self.n)
        return self._call_raw(self._grad, z, (2 * self.n, self.d, self.d))

    @property
    def hermitian(self):
        if self._hermitian is None:
            self._hermitian = _check_hermitian_on_grid(self)
        return self._hermitian


class ScaledSymbol(Symbol):
    def __init__(self, base: Symbol, factor: complex):
        self.base, self.factor = base, factor
        self.n, self.d = base.n, base.d

    def _evaluate(self, z):
        return self.factor * self.base._evaluate(z)

    @property
    def is_polynomial(self):
        return self.base.is_polynomial

    def as_polynomial(self):
        return self.base.as_polynomial().scale(self.factor)

    @property
    def hermitian(self):
        return self.base.hermitian and abs(self.factor.imag) <= HERMITIAN_TOL * max(1.0, abs(self.factor))

    def gradient(self, z):
        return self.factor * self.base.gradient(z)

    def to_dict(self):
        f = self.factor
        return {"scale": [f.real, f.imag], "symbol": self.base.to_dict()}


class SumSymbol(Symbol):
    def __init__(self, parts):
        flat = []
        for p in parts:
            flat.extend(p.parts if isinstance(p, SumSymbol) else [p])
        self.parts = flat
        self.n, self.d = flat[0].n, flat[0].d

    def _evaluate(self, z):
        return sum(p._evaluate(z) for p in self.parts)

    @property
    def hermitian(self):
        return all(p.hermitian for p in self.parts)

    def gradient(self, z):
        return sum(p.gradient(z) for p in self.parts)

    def to_dict(self):
        return {"sum": [p.to_dict() for p in self.parts]}


class ProductSymbol(Symbol):
    def __init__(self, left: Symbol, right: Symbol):
        self.left, self.right = left, right
        self.n, self.d = left.n, left.d

    def _evaluate(self, z):
        return self.left._evaluate(z) @ self.right._evaluate(z)

    @property
    def hermitian(self):
        return _check_hermitian_on_grid(self)

    def gradient(self, z):
        z = as_points(z, self.n)
        L, R = self.left(z), self.right(z)
        return self.left.gradient(z) @ R[..., None, :, :] + L[..., None, :, :] @ self.right.gradient(z)

    def to_dict(self):
        return {"product": [self.left.to_dict(), self.right.to_dict()]}


# --------------------------------------------------------------------------
# built-ins
# --------------------------------------------------------------------------
def _unit(n, j):
    e = [0] * n
    e[j] = 1
    return tuple(e)


def constant(matrix, n: int = 1):
    """Constant symbol ``f(z) = matrix`` (a scalar gives a 1x1 symbol)."""
    m = np.atleast_2d(np.asarray(matrix, dtype=complex))
    zero = (0,) * n
    return PolynomialSymbol(n, m.shape[0], {(zero, zero): m}, name="Constant",
                            params={"matrix": [m.real.tolist(), m.imag.tolist()], "n": n})


def monomial(a, b, n: int = 1, coefficient=1.0, d: int = 1):
    """``coefficient * z^a conj(z)^b``."""
    a = tuple(np.atleast_1d(a).tolist())
    b = tuple(np.atleast_1d(b).tolist())
    return PolynomialSymbol(n, d, {(a, b): coefficient})


def abs_squared(n: int = 1):
    """``|z|^2``."""
    terms = {(_unit(n, j), _unit(n, j)): 1.0 for j in range(n)}
    return PolynomialSymbol(n, 1, terms, name="AbsSquared", params={"n": n})


def re_z_cubed(n: int = 1):
    """``Re(z_1^3) = (z_1^3 + conj(z_1)^3) / 2``."""
    e3 = tuple(3 if j == 0 else 0 for j in range(n))
    zero = (0,) * n
    return PolynomialSymbol(n, 1, {(e3, zero): 0.5, (zero, e3): 0.5}, name="ReZCubed", params={"n": n})


def linear_real(n: int = 1):
    """``z_1 + conj(z_1) = 2 Re z_1``."""
    e1 = _unit(n, 0)
    zero = (0,) * n
    return PolynomialSymbol(n, 1, {(e1, zero): 1.0, (zero, e1): 1.0}, name="LinearRe", params={"n": n})


def sine_re(n: int = 1):
    """``sin(Re z_1)``."""
    def f(z):
        return np.sin(z[..., 0].real)

    def g(z):
        out = np.zeros(z.shape[:-1] + (2 * n,), dtype=complex)
        out[..., 0] = np.cos(z[..., 0].real)
        return out[..., None, None]

    return CallableSymbol(f, n, 1, grad=g, hermitian=True, name="SineRe", params={"n": n})


def relativistic_kinetic(m: float = 1.0, n: int = 1):
    """``sqrt(|xi|^2 + m^2)`` with ``xi = Im z``."""
    if m <= 0:
        raise ParameterError("mass must be positive")

    def f(z):
        return np.sqrt(np.sum(z.imag**2, axis=-1) + m**2)

    def g(z):
        root = f(z)
        out = np.zeros(z.shape[:-1] + (2 * n,), dtype=complex)
        out[..., n:] = z.imag / root[..., None]
        return out[..., None, None]

    return CallableSymbol(f, n, 1, grad=g, hermitian=True, name="RelativisticKinetic", params={"m": m, "n": n})


def magnetic(amplitude: float = 1.0):
    """``|xi - a(x)|^2`` with the bounded Lipschitz potential ``a(x) = amplitude * sin(x)`` (n = 1)."""
    def f(z):
        return (z.imag - amplitude * np.sin(z.real))[..., 0] ** 2

    def g(z):
        x, xi = z.real[..., 0], z.imag[..., 0]
        r = xi - amplitude * np.sin(x)
        out = np.stack([-2 * r * amplitude * np.cos(x), 2 * r], axis=-1).astype(complex)
        return out[..., None, None]

    return CallableSymbol(f, 1, 1, grad=g, hermitian=True, name="Magnetic", params={"amplitude": amplitude})


def shift_interaction(alpha: float, g=None, d: int = 3, binding: float = 0.0):
    """``g(z) 1 + alpha (z S + conj(z) S^*) + binding * diag(-1/k^2)`` on C^d (n = 1).

    ``S`` is the right shift ``(Sx)_k = x_{k-1}``.  ``g`` is a scalar symbol, a
    number, or ``None`` (zero).  The result is polynomial when ``g`` is.
    """
    S = np.diag(np.ones(d - 1), -1).astype(complex)
    bind = binding * np.diag(-1.0 / np.arange(1, d + 1) ** 2)
    terms = {((1,), (0,)): alpha * S, ((0,), (1,)): alpha * S.conj().T, ((0,), (0,)): bind.astype(complex)}
    core = PolynomialSymbol(1, d, terms)
    params = {"alpha": alpha, "g": g if g is not None else 0.0, "d": d, "binding": binding}
    if g is None or np.isscalar(g):
        g0 = 0.0 if g is None else g
        out = core.add(PolynomialSymbol(1, d, {((0,), (0,)): g0 * np.eye(d)}))
    elif isinstance(g, Symbol) and g.is_polynomial:
        gp = g.as_polynomial()
        out = core.add(PolynomialSymbol(1, d, {k: c[0, 0] * np.eye(d) for k, c in gp.terms.items()}))
    elif isinstance(g, Symbol):
        lifted = CallableSymbol(lambda z: g(z)[..., 0:1, 0:1] * np.eye(d), 1, d,
                                grad=(lambda z: g.gradient(z)[..., 0:1, 0:1] * np.eye(d)) if g.has_gradient else None,
                                hermitian=g.hermitian)
        out = SumSymbol([core, lifted])
        out.name, out.params = "ShiftInteraction", params
        return out
    else:
        raise ParameterError("g must be a scalar symbol, a number or None")
    out.name, out.params = "ShiftInteraction", params
    return out


def tensor(scalar: Symbol, matrix):
    """``lambda (x) A``: scalar symbol times a constant matrix."""
    A = np.asarray(matrix, dtype=complex)
    if scalar.d != 1:
        raise ParameterError("tensor expects a scalar symbol")
    if scalar.is_polynomial:
        p = scalar.as_polynomial()
        return PolynomialSymbol(p.n, A.shape[0], {k: c[0, 0] * A for k, c in p.terms.items()})
    return ProductSymbol(
        CallableSymbol(lambda z: scalar(z)[..., 0, 0][..., None, None] * np.eye(A.shape[0]), scalar.n, A.shape[0],
                       hermitian=True),
        constant(A, n=scalar.n))


BUILTINS = {
    "AbsSquared": abs_squared,
    "ReZCubed": re_z_cubed,
    "LinearRe": linear_real,
    "SineRe": sine_re,
    "RelativisticKinetic": relativistic_kinetic,
    "Magnetic": magnetic,
    "ShiftInteraction": shift_interaction,
}


def symbol_from_dict(doc) -> Symbol:
    """Inverse of ``Symbol.to_dict``; also accepts bare numbers."""
    if isinstance(doc, (int, float)):
        return constant([[doc]])
    if "terms" in doc:
        n, d = int(doc["n"]), int(doc["d"])
        terms = {}
        for t in doc["terms"]:
            c = np.asarray(t["re"], dtype=float) + 1j * np.asarray(t.get("im", np.zeros_like(t["re"])), dtype=float)
            terms[(tuple(t["a"]), tuple(t["b"]))] = np.reshape(c, (d, d))
        return PolynomialSymbol(n, d, terms)
    if "builtin" in doc:
        name = doc["builtin"]
        params = dict(doc.get("params", {}))
        if name == "Constant":
            re, im = params["matrix"]
            return constant(np.asarray(re) + 1j * np.asarray(im), n=params.get("n", 1))
        if name not in BUILTINS:
            raise ParameterError(f"unknown built-in symbol {name!r}")
        if name == "ShiftInteraction" and isinstance(params.get("g"), dict):
            params["g"] = symbol_from_dict(params["g"])
        return BUILTINS[name](**params)
    if "sum" in doc:
        parts = [symbol_from_dict(p) for p in doc["sum"]]
        out = parts[0]
        for p in parts[1:]:
            out = out + p
        return out
    if "scale" in doc:
        re, im = doc["scale"]
        return symbol_from_dict(doc["symbol"]) * complex(re, im)
    if "product" in doc:
        left, right = (symbol_from_dict(p) for p in doc["product"])
        return left * right
    if "heat" in doc:
        return heat_transform(symbol_from_dict(doc["heat"]), HeatParams(doc["s"]))
    raise ParameterError(f"unrecognized symbol document: {sorted(doc)}")


# --------------------------------------------------------------------------
# growth and heat transforms
# --------------------------------------------------------------------------
def poly_bound_fit(f: Symbol, R: float = 4.0, resolution: int = 17, max_degree: int = 12,
                   stability: float = 1.25):
    """Smallest ``N <= max_degree`` with ``||f(z)|| <= c (1 + |z|^N)`` stable under doubling the radius.

    For each ``N`` the constant ``c_N(R) = max ||f|| / (1 + |z|^N)`` is computed
    on the probe grids of radius ``R`` and ``2R``; ``N`` is accepted once
    ``c_N(2R) <= stability * c_N(R)``.  Returns ``(N, c_N(2R))``.
    """
    if not R > 0:
        raise ParameterError("grid radius must be positive")
    small = sample_points(f.n, R, resolution)
    big = sample_points(f.n, 2 * R, 2 * resolution - 1)
    ns = spectral_norm(f(small))
    nb = spectral_norm(f(big))
    rs = np.sqrt(sqnorm(small))
    rb = np.sqrt(sqnorm(big))
    last = None
    for N in range(max_degree + 1):
        cs = float(np.max(ns / (1 + rs**N)))
        cb = float(np.max(nb / (1 + rb**N)))
        last = cb
        if cb <= stability * cs or cb == 0.0:
            return N, cb
    if last is not None and last > 1e6:
        raise GrowthError(f"{f!r} grows faster than |z|^{max_degree} (constant {last:.3g})")
    raise GrowthError(f"{f!r}: no polynomial degree <= {max_degree} gives a stable bound")


@dataclass(frozen=True)
class HeatParams:
    """Heat time ``s`` and Gauss-Hermite settings per real dimension."""

    s: float
    nodes: int = 16
    tol: float = 1e-10
    cap: int = 256

    def __post_init__(self):
        if not self.s >= 0:
            raise ParameterError(f"heat time must be non-negative, got {self.s!r}")
        if self.nodes < 1:
            raise ParameterError("nodes per real dimension must be positive")


class HeatTransformedSymbol(Symbol):
    """``z -> E f(z + w)`` for complex Gaussian ``w`` with variance ``s`` per real coordinate."""

    def __init__(self, base: Symbol, hp: HeatParams):
        self.base = base
        self.hp = hp
        self.n, self.d = base.n, base.d
        self.nodes_used = None

    @property
    def hermitian(self):
        return self.base.hermitian

    def _at_level(self, z, nodes):
        n = self.n
        pts, wts = gaussian_rule(2 * n, self.hp.s, nodes)
        shifts = pts[:, :n] + 1j * pts[:, n:]
        flat = z.reshape(-1, n)
        out = np.empty((flat.shape[0], self.d, self.d), dtype=complex)
        step = max(1, _CHUNK // max(1, shifts.shape[0] * self.d * self.d))
        for lo in range(0, flat.shape[0], step):
            zz = flat[lo:lo + step, None, :] + shifts[None, :, :]
            vals = self.base._evaluate(zz)
            out[lo:lo + step] = np.einsum("p,qpij->qij", wts, vals)
        return out.reshape(z.shape[:-1] + (self.d, self.d))

    def _evaluate(self, z):
        n = self.hp.nodes
        prev = self._at_level(z, n)
        while True:
            n2 = 2 * n
            if n2 > self.hp.cap:
                raise QuadratureError(f"heat transform of {self.base!r}: no convergence below {self.hp.cap} nodes")
            cur = self._at_level(z, n2)
            if _agree(cur, prev, self.hp.tol):
                self.nodes_used = n2
                return cur
            prev, n = cur, n2

    def to_dict(self):
        return {"heat": self.base.to_dict(), "s": self.hp.s}

    def __repr__(self):
        return f"Heat[{self.base!r}, s={self.hp.s}]"


def heat_transform(f: Symbol, hp) -> Symbol:
    """Gaussian smoothing at time ``s`` with unit-mass kernel ``(2 pi s)^{-n} e^{-|w|^2/2s}`` on C^n.

    ``s = 0`` returns ``f`` itself.  Polynomials are transformed in closed
    form; every other symbol becomes a :class:`HeatTransformedSymbol`
    evaluated by tensor Gauss-Hermite quadrature with node doubling.
    """
    if not isinstance(hp, HeatParams):
        hp = HeatParams(float(hp))
    if hp.s == 0:
        return f
    if f.is_polynomial:
        return f.as_polynomial().heat(hp.s)
    poly_bound_fit(f)
    return HeatTransformedSymbol(f, hp)


def symbol_derivative(f: Symbol, j: int, conjugate: bool = False) -> PolynomialSymbol:
    """Wirtinger derivative of a polynomial symbol."""
    if not f.is_polynomial:
        raise UnsupportedVariantError("symbol_derivative needs a polynomial symbol; use finite differences")
    return f.as_polynomial().derivative(j, conjugate)


# --------------------------------------------------------------------------
# off-diagonal heat transform
# --------------------------------------------------------------------------
def _pair_points(n, z, w):
    z = as_points(z, n)
    w = as_points(w, n)
    z, w = np.broadcast_arrays(z, w)
    return z, w


def off_diagonal_heat(f: Symbol, z, w, ctx: QuantizationContext, quad: QuadratureSpec = DEFAULT_QUADRATURE):
    """``int f(u) k_z(u) conj(k_w(u)) d mu_t(u)`` by adaptive polar quadrature.

    ``z`` and ``w`` broadcast against each other; the result has shape
    ``broadcast_shape + (d, d)``.  The diagonal ``z = w`` is the heat transform
    at time ``t``.
    """
    z, w = _pair_points(f.n, z, w)
    shape = z.shape[:-1]
    zf = z.reshape(-1, f.n)
    wf = w.reshape(-1, f.n)
    t = ctx.t
    cz = -sqnorm(zf) / (4 * t)
    cw = -sqnorm(wf) / (4 * t)

    def evaluate(na, nr):
        pts, wts = measure_rule(f.n, t, na, nr)
        F = f(pts).reshape(pts.shape[0], -1)
        out = np.empty((zf.shape[0], F.shape[1]), dtype=complex)
        step = max(1, _CHUNK // pts.shape[0])
        for lo in range(0, zf.shape[0], step):
            hi = lo + step
            # k_z(u) conj(k_w(u)) = exp(conj(z).u/2t + w.conj(u)/2t - (|z|^2 + |w|^2)/4t)
            expo = ((np.conj(zf[lo:hi]) @ pts.T + wf[lo:hi] @ np.conj(pts).T) / (2 * t)
                    + (cz[lo:hi] + cw[lo:hi])[:, None])
            out[lo:hi] = (np.exp(expo) * wts[None, :]) @ F
        return out

    val, _ = converge(evaluate, quad, what=f"off-diagonal heat transform of {f!r}")
    return val.reshape(shape + (f.d, f.d))


def semigroup_prefactor(ctx: QuantizationContext, s: float, z, w):
    """``exp(s|w - z|^2 / 4t(t-s) - i s Im(z . conj w) / 2t(t-s))``."""
    t = ctx.t
    z, w = _pair_points(ctx.n, z, w)
    diff = sqnorm(w - z)
    im = np.imag(dot(z, np.conj(w)))
    return np.exp(s * diff / (4 * t * (t - s)) - 1j * s * im / (2 * t * (t - s)))


def semigroup_identity_check(f: Symbol, s: float, z, w, ctx: QuantizationContext,
                             quad: QuadratureSpec = DEFAULT_QUADRATURE, hp: HeatParams | None = None):
    """Spectral-norm residual of the two-point semigroup identity.

    Left: the off-diagonal transform ``f~(w, z)`` at parameter ``t``.  Right:
    the Gaussian prefactor times the off-diagonal transform at ``t - s`` of
    the heat transform of ``f`` at time ``s``.  Returns the largest residual
    over the broadcast pairs.
    """
    if not 0 < s < ctx.t:
        raise ParameterError(f"semigroup identity needs 0 < s < t, got s={s}, t={ctx.t}")
    left = off_diagonal_heat(f, w, z, ctx, quad)
    fs = heat_transform(f, hp or HeatParams(s))
    inner = off_diagonal_heat(fs, w, z, ctx.with_t(ctx.t - s), quad)
    right = semigroup_prefactor(ctx, s, z, w)[..., None, None] * inner
    return float(np.max(spectral_norm(left - right)))


def overlap(ctx: QuantizationContext, z, w):
    """Closed form ``<k_z, k_w> = exp(-(|z|^2 + |w|^2)/4t + conj(z) . w / 2t)``."""
    z, w = _pair_points(ctx.n, z, w)
    return np.exp(-(sqnorm(z) + sqnorm(w)) / (4 * ctx.t) + dot(np.conj(z), w) / (2 * ctx.t))
