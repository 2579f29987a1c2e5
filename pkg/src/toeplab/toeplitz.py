"""Truncated Toeplitz operators ``P_M T_f P_M`` and the identities they satisfy.

Matrices use the convention ``A[nu, kappa] = <T_f e_kappa, e_nu>`` so that
operator products are matrix products.  With an internal space C^d the
row/column index is ``basis_index * d + internal_index``.
"""
from __future__ import annotations

import csv
import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.special import gammaln

from .core import QuantizationContext, as_points, sqnorm, symplectic_form
from .errors import (AssemblyError, DimensionCapError, ParameterError, QuadratureError,
                     SpecMismatchError, TailMassWarning, UnsupportedVariantError)
from .fockbasis import (CoefficientVector, TruncationSpec, basis_values, coherent_coefficients,
                        coherent_tail_mass)
from .quadrature import (DEFAULT_QUADRATURE, QuadratureSpec, _agree, converge, gaussian_rule,
                         laguerre_log_rule, measure_rule)
from .symbol import PolynomialSymbol, Symbol, monomial, off_diagonal_heat

DIMENSION_CAP = 4096
HERMITIAN_ASSEMBLY_TOL = 1e-9
TAIL_MASS_TOL = 1e-8
FORMAT_VERSION = 1


@dataclass
class TruncatedOperator:
    """Dense matrix on the truncated space tensored with C^d.

    When ``hermitian`` is set the matrix is checked (``max |A - A^*| <= 1e-9``)
    and replaced by its hermitian part; the deviation found is stored in
    ``provenance["hermitian_deviation"]``.
    """

    spec: TruncationSpec
    matrix: np.ndarray
    hermitian: bool = False
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        A = np.array(self.matrix, dtype=complex)
        dim = self.spec.dim
        if A.shape != (dim, dim):
            raise AssemblyError(f"matrix shape {A.shape} does not match truncation dimension {dim}")
        if self.hermitian:
            dev = float(np.max(np.abs(A - A.conj().T), initial=0.0))
            if dev > HERMITIAN_ASSEMBLY_TOL:
                raise AssemblyError(f"hermitian flag set but max |A - A^*| = {dev:.3g} > {HERMITIAN_ASSEMBLY_TOL:g}")
            A = 0.5 * (A + A.conj().T)
            self.provenance = {**self.provenance, "hermitian_deviation": dev}
        A.setflags(write=False)
        self.matrix = A

    @property
    def dim(self):
        return self.spec.dim

    def eigenvalues(self):
        if self.hermitian:
            return np.linalg.eigvalsh(self.matrix)
        return np.linalg.eigvals(self.matrix)

    def apply(self, v: CoefficientVector) -> CoefficientVector:
        _same_spec(self.spec, v.spec)
        return CoefficientVector(self.spec, self.matrix @ v.coeffs)

    def interior(self, max_degree) -> np.ndarray:
        """Sub-matrix between basis vectors of degree ``<= max_degree``."""
        idx = self.spec.block(max_degree)
        return self.matrix[np.ix_(idx, idx)]

    def __matmul__(self, other):
        if isinstance(other, TruncatedOperator):
            _same_spec(self.spec, other.spec)
            return TruncatedOperator(self.spec, self.matrix @ other.matrix, provenance={"op": "product"})
        return self.matrix @ other

    def __add__(self, other):
        _same_spec(self.spec, other.spec)
        return TruncatedOperator(self.spec, self.matrix + other.matrix, self.hermitian and other.hermitian,
                                 {"op": "sum"})

    def __sub__(self, other):
        _same_spec(self.spec, other.spec)
        return TruncatedOperator(self.spec, self.matrix - other.matrix, self.hermitian and other.hermitian,
                                 {"op": "difference"})

    def scale(self, c):
        return TruncatedOperator(self.spec, c * self.matrix, self.hermitian and np.isreal(c), {"op": "scale"})


def _same_spec(a: TruncationSpec, b: TruncationSpec):
    if a != b:
        raise SpecMismatchError(f"truncations differ: {a.to_dict()} vs {b.to_dict()}")


def _check_cap(spec: TruncationSpec, cap: int):
    if spec.dim > cap:
        raise DimensionCapError(f"matrix dimension {spec.dim} exceeds the cap {cap}")


def _index_lookup(spec: TruncationSpec):
    """Function mapping an integer array of multi-indices (rows) to basis positions (-1 if absent)."""
    n, M = spec.ctx.n, spec.M
    if n == 1:
        def lookup(nu):
            k = nu[:, 0]
            return np.where((k >= 0) & (k <= M), k, -1)
        return lookup
    radix = (M + 1) ** np.arange(n)
    table = np.full((M + 1) ** n, -1, dtype=np.int64)
    table[spec.exponents @ radix] = np.arange(spec.size)

    def lookup(nu):
        ok = np.all((nu >= 0) & (nu <= M), axis=1)
        out = np.full(nu.shape[0], -1, dtype=np.int64)
        out[ok] = table[nu[ok] @ radix]
        return out
    return lookup


def _closed_form_matrix(f: PolynomialSymbol, spec: TruncationSpec) -> np.ndarray:
    """Gaussian-moment assembly of a polynomial symbol."""
    t, d = spec.ctx.t, spec.ctx.d
    E = spec.exponents
    lookup = _index_lookup(spec)
    half_lg = 0.5 * gammaln(E + 1).sum(axis=1)
    A = np.zeros((spec.size, d, spec.size, d), dtype=complex)
    for (a, b), c in f.terms.items():
        a = np.array(a)
        b = np.array(b)
        nu = E + a - b
        rows = lookup(nu)
        cols = np.flatnonzero(rows >= 0)
        rows = rows[cols]
        if cols.size == 0:
            continue
        logv = (0.5 * (a.sum() + b.sum()) * np.log(2 * t)
                + gammaln(E[cols] + a + 1).sum(axis=1) - half_lg[cols] - half_lg[rows])
        A[rows, :, cols, :] += np.exp(logv)[:, None, None] * c
    return A.reshape(spec.dim, spec.dim)


def _doubled_until(n: int, need: int) -> int:
    while n < need:
        n *= 2
    return n


def _fft_polar_matrix(f: Symbol, spec: TruncationSpec, na: int, nr: int) -> np.ndarray:
    """n = 1 quadrature: FFT over the angle at each Gauss-Laguerre radius."""
    t, d, M = spec.ctx.t, spec.ctx.d, spec.M
    u, logw = laguerre_log_rule(nr)
    r = np.sqrt(2 * t * u)
    theta = 2 * np.pi * np.arange(na) / na
    pts = (r[:, None] * np.exp(1j * theta)[None, :])[..., None]
    F = f(pts)                                               # (nr, na, d, d)
    G = np.fft.ifft(F, axis=1)                               # angular Fourier coefficients
    k = np.arange(M + 1)
    scaled = np.exp(0.5 * logw[:, None] + k[None, :] * np.log(r)[:, None] - spec.log_norms[None, :])
    D = (k[None, :] - k[:, None]) % na                       # kappa - nu
    A = np.zeros((spec.size, d, spec.size, d), dtype=complex)
    for i in range(nr):
        outer = scaled[i][:, None] * scaled[i][None, :]
        if not np.any(outer):
            continue
        gathered = G[i][D]                                   # (size, size, d, d)
        A += (outer[:, :, None, None] * gathered).transpose(0, 2, 1, 3)
    return A.reshape(spec.dim, spec.dim)


def _gh_matrix(f: Symbol, spec: TruncationSpec, nodes: int) -> np.ndarray:
    """n > 1 quadrature: tensor Gauss-Hermite on R^{2n} (mu_t has variance t per real coordinate)."""
    n, t, d = spec.ctx.n, spec.ctx.t, spec.ctx.d
    pts, wts = gaussian_rule(2 * n, t, nodes)
    keep = wts > 0
    pts, wts = pts[keep], wts[keep]
    A = np.zeros((spec.size, d, spec.size, d), dtype=complex)
    step = max(1, 2_000_000 // max(spec.size, 1))
    for lo in range(0, pts.shape[0], step):
        z = pts[lo:lo + step, :n] + 1j * pts[lo:lo + step, n:]
        B = basis_values(spec, z) * np.sqrt(wts[lo:lo + step])[:, None]
        F = f(z)
        for i in range(d):
            for j in range(d):
                A[:, i, :, j] += (np.conj(B) * F[:, i, j][:, None]).T @ B
    return A.reshape(spec.dim, spec.dim)


def _quadrature_matrix(f: Symbol, spec: TruncationSpec, q: QuadratureSpec):
    M = spec.M
    if spec.ctx.n == 1:
        na0 = _doubled_until(q.n_angle, 2 * M + 2)
        nr0 = _doubled_until(q.n_radial, M + 2)
        A, nodes = converge(lambda na, nr: _fft_polar_matrix(f, spec, na, nr), q,
                            what=f"Toeplitz assembly of {f!r}", n_angle=na0, n_radial=nr0)
        return A, {"method": "quadrature-polar-fft", "nodes": list(nodes)}
    n0 = _doubled_until(8, M + 2)
    cap = min(q.cap, 256)
    prev = _gh_matrix(f, spec, n0)
    while True:
        n1 = 2 * n0
        if n1 > cap:
            raise QuadratureError(f"Toeplitz assembly of {f!r}: no convergence below {cap} nodes per axis")
        cur = _gh_matrix(f, spec, n1)
        if _agree(cur, prev, q.tol):
            return cur, {"method": "quadrature-gauss-hermite", "nodes": n1}
        prev, n0 = cur, n1


def _symbol_record(f: Symbol):
    try:
        return f.to_dict()
    except UnsupportedVariantError:
        return repr(f)


def assemble_toeplitz(f: Symbol, spec: TruncationSpec, q: QuadratureSpec = DEFAULT_QUADRATURE,
                      method: str = "auto", cap: int = DIMENSION_CAP) -> TruncatedOperator:
    """Compression of ``T_f`` to degrees ``<= M``.

    ``method="auto"`` uses the closed form for polynomial symbols and
    quadrature otherwise; ``"closed-form"`` and ``"quadrature"`` force a path.

    Examples
    --------
    >>> from toeplab.core import QuantizationContext
    >>> from toeplab.symbol import abs_squared
    >>> spec = TruncationSpec(QuantizationContext(1, 0.5), 3)
    >>> assemble_toeplitz(abs_squared(), spec).matrix.diagonal().real
    array([1., 2., 3., 4.])
    """
    if f.n != spec.ctx.n or f.d != spec.ctx.d:
        raise SpecMismatchError(f"symbol (n={f.n}, d={f.d}) does not match context {spec.ctx.to_dict()}")
    _check_cap(spec, cap)
    if method not in ("auto", "closed-form", "quadrature"):
        raise ParameterError(f"unknown assembly method {method!r}")
    prov = {"symbol": _symbol_record(f), "t": spec.ctx.t, "M": spec.M}
    if method == "closed-form" or (method == "auto" and f.is_polynomial):
        A = _closed_form_matrix(f.as_polynomial(), spec)
        prov["method"] = "closed-form"
    else:
        A, info = _quadrature_matrix(f, spec, q)
        prov.update(info)
        prov["quadrature"] = q.to_dict()
    return TruncatedOperator(spec, A, hermitian=f.hermitian, provenance=prov)


def position_operator(spec: TruncationSpec, j: int = 0, conjugate: bool = False) -> TruncatedOperator:
    """``T_{z_j}`` (raising) or ``T_{conj z_j}`` (lowering), tensored with the internal identity."""
    n = spec.ctx.n
    e = tuple(1 if k == j else 0 for k in range(n))
    zero = (0,) * n
    f = monomial(zero, e, n=n) if conjugate else monomial(e, zero, n=n)
    scalar = TruncationSpec(QuantizationContext(n, spec.ctx.t), spec.M)
    A = _closed_form_matrix(f, scalar)
    return TruncatedOperator(spec, np.kron(A, np.eye(spec.ctx.d)),
                             provenance={"symbol": "conj(z_%d)" % j if conjugate else "z_%d" % j})


def identity_operator(spec: TruncationSpec) -> TruncatedOperator:
    return TruncatedOperator(spec, np.eye(spec.dim), hermitian=True, provenance={"symbol": "1"})


def harmonic_oscillator(spec: TruncationSpec) -> TruncatedOperator:
    """``N = diag t(|nu| + n)`` tensored with the internal identity."""
    diag = spec.ctx.t * (spec.degrees + spec.ctx.n)
    return TruncatedOperator(spec, np.diag(spec.expand_internal(diag)).astype(complex), hermitian=True,
                             provenance={"symbol": "harmonic oscillator", "t": spec.ctx.t, "M": spec.M})


def berezin_transform(A: TruncatedOperator, z):
    """``<A (k_z x e_j), k_z x e_i>`` as a d x d matrix per point.

    Emits :class:`TailMassWarning` when the coherent state at ``z`` carries
    more than 1e-8 of its mass above the cutoff.
    """
    spec = A.spec
    ctx = spec.ctx
    z = as_points(z, ctx.n)
    flat = z.reshape(-1, ctx.n)
    scalar = TruncationSpec(QuantizationContext(ctx.n, ctx.t), spec.M)
    out = np.empty((flat.shape[0], ctx.d, ctx.d), dtype=complex)
    eye = np.eye(ctx.d)
    for p, w in enumerate(flat):
        tail = coherent_tail_mass(scalar, w)
        if tail > TAIL_MASS_TOL:
            warnings.warn(f"coherent state at z={w.tolist()} has tail mass {tail:.2e} above M={spec.M}",
                          TailMassWarning, stacklevel=2)
        V = np.kron(coherent_coefficients(scalar, w).coeffs[:, None], eye)
        out[p] = V.conj().T @ A.matrix @ V
    return out.reshape(z.shape[:-1] + (ctx.d, ctx.d))


def _unitary_exp(G: np.ndarray) -> np.ndarray:
    """``exp(G)`` for skew-hermitian ``G`` via the eigendecomposition of ``iG``."""
    H = 1j * G
    H = 0.5 * (H + H.conj().T)
    lam, V = np.linalg.eigh(H)
    return (V * np.exp(-1j * lam)) @ V.conj().T


def weyl_matrix(spec: TruncationSpec, w) -> TruncatedOperator:
    """Truncated phase-space translation ``W_w``.

    The generator is ``(1/2t)(conj(w) . T_z - w . T_{conj z})``, which moves
    the vacuum to the coherent state ``k_w``.  Accuracy of the top degrees
    degrades as ``|w| sqrt(M)`` grows; identities are compared on the
    interior block.
    """
    ctx = spec.ctx
    w = as_points(w, ctx.n)
    G = np.zeros((spec.dim, spec.dim), dtype=complex)
    for j in range(ctx.n):
        G += np.conj(w[j]) * position_operator(spec, j).matrix
        G -= w[j] * position_operator(spec, j, conjugate=True).matrix
    G /= 2 * ctx.t
    return TruncatedOperator(spec, _unitary_exp(G), provenance={"operator": "weyl", "w": [[c.real, c.imag] for c in w]})


def weyl_relation_check(spec: TruncationSpec, w, z) -> float:
    """Max-entry residual of ``W_w W_z - exp(i omega(w, z) / 2t) W_{w+z}`` on degrees ``<= M/2``."""
    ctx = spec.ctx
    w = as_points(w, ctx.n)
    z = as_points(z, ctx.n)
    phase = np.exp(1j * symplectic_form(w, z) / (2 * ctx.t))
    lhs = weyl_matrix(spec, w).matrix @ weyl_matrix(spec, z).matrix
    rhs = phase * weyl_matrix(spec, w + z).matrix
    idx = spec.block(spec.M // 2)
    return float(np.max(np.abs((lhs - rhs)[np.ix_(idx, idx)])))


def covariance_check(f: Symbol, spec: TruncationSpec, z, interior=None) -> float:
    """Residual of ``W_{-z} T_f W_z = T_{f(. + z)}`` on degrees ``<= interior`` (default ``M/2``)."""
    if not f.is_polynomial:
        raise UnsupportedVariantError("covariance_check needs a polynomial symbol")
    z = as_points(z, spec.ctx.n)
    if not np.any(z):
        return 0.0
    T = assemble_toeplitz(f, spec).matrix
    W = weyl_matrix(spec, z).matrix
    lhs = W.conj().T @ T @ W
    rhs = assemble_toeplitz(f.as_polynomial().shift(z), spec).matrix
    idx = spec.block(spec.M // 2 if interior is None else interior)
    return float(np.max(np.abs((lhs - rhs)[np.ix_(idx, idx)])))


def rotation_operator(spec: TruncationSpec, theta: float) -> np.ndarray:
    """Diagonal of ``exp(i theta N / t)``: phases ``exp(i theta (|nu| + n))``."""
    return spec.expand_internal(np.exp(1j * theta * (spec.degrees + spec.ctx.n)))


def rotation_covariance_check(f: Symbol, spec: TruncationSpec, theta: float) -> float:
    """Max residual of ``e^{i theta N/t} T_f e^{-i theta N/t} - T_{f(e^{i theta} .)}`` (whole matrix)."""
    if not f.is_polynomial:
        raise UnsupportedVariantError("rotation_covariance_check needs a polynomial symbol")
    D = rotation_operator(spec, theta)
    T = assemble_toeplitz(f, spec).matrix
    lhs = D[:, None] * T * np.conj(D)[None, :]
    rhs = assemble_toeplitz(f.as_polynomial().rotate(theta), spec).matrix
    return float(np.max(np.abs(lhs - rhs)))


def form_derivative(A: TruncatedOperator, j: int = 0, conjugate: bool = False) -> TruncatedOperator:
    """``d_j A = -(1/2t)[A, T_{conj z_j}]`` or ``dbar_j A = (1/2t)[A, T_{z_j}]``."""
    spec = A.spec
    if not 0 <= j < spec.ctx.n:
        raise ParameterError(f"coordinate {j} out of range")
    t = spec.ctx.t
    if conjugate:
        Z = position_operator(spec, j).matrix
        C = (A.matrix @ Z - Z @ A.matrix) / (2 * t)
    else:
        Zb = position_operator(spec, j, conjugate=True).matrix
        C = -(A.matrix @ Zb - Zb @ A.matrix) / (2 * t)
    return TruncatedOperator(spec, C, provenance={"op": "form derivative", "j": j, "conjugate": conjugate})


OUTER_QUADRATURE = QuadratureSpec(n_angle=8, n_radial=8)


def integral_representation_check(f: Symbol, g: CoefficientVector, z, q: QuadratureSpec = DEFAULT_QUADRATURE,
                                  outer: QuadratureSpec = OUTER_QUADRATURE,
                                  assembly_q: QuadratureSpec = DEFAULT_QUADRATURE) -> float:
    """Compare ``(T_f g)(z)`` with its kernel representation through the off-diagonal heat transform.

    The right side is ``int exp((|z|^2 + |w|^2)/4t) f~(w, z) g(w) d mu(w)``,
    computed by nested adaptive quadrature: ``q`` drives the inner
    off-diagonal transform and ``outer`` the integral over ``w``.  ``g``
    must live in degrees ``<= M/2``.  Returns the Euclidean norm of the difference in C^d.
    """
    spec = g.spec
    ctx = spec.ctx
    prof = g.degree_profile()
    if np.any(prof[spec.M // 2 + 1:] != 0):
        raise ParameterError("g must be supported in degrees <= M/2")
    z = as_points(z, ctx.n)
    lhs = assemble_toeplitz(f, spec, assembly_q).apply(g).evaluate(z)

    def evaluate(na, nr):
        pts, wts = measure_rule(ctx.n, ctx.t, na, nr)
        ft = off_diagonal_heat(f, pts, z, ctx, q)                       # (P, d, d)
        pref = np.exp((sqnorm(pts) + sqnorm(z)) / (4 * ctx.t))
        gv = g.evaluate(pts)                                            # (P, d)
        return np.einsum("p,pij,pj->i", wts * pref, ft, gv)

    rhs, _ = converge(evaluate, outer, what="integral representation")
    return float(np.linalg.norm(lhs - rhs))


def operator_norm(A: TruncatedOperator) -> float:
    """Largest singular value (largest |eigenvalue| for hermitian operators)."""
    if A.hermitian:
        return float(np.max(np.abs(np.linalg.eigvalsh(A.matrix))))
    return float(np.linalg.norm(A.matrix, 2))


# --------------------------------------------------------------------------
# portable export
# --------------------------------------------------------------------------
def export_operator(A: TruncatedOperator, path) -> tuple[Path, Path]:
    """Write ``<path>.json`` (header) and ``<path>.csv`` (row, col, re, im; nonzero entries)."""
    path = Path(path)
    header = {
        "format": "toeplab-operator",
        "version": FORMAT_VERSION,
        "spec": A.spec.to_dict(),
        "dim": A.dim,
        "hermitian": A.hermitian,
        "provenance": A.provenance,
        "entries": path.with_suffix(".csv").name,
    }
    jpath = path.with_suffix(".json")
    cpath = path.with_suffix(".csv")
    jpath.write_text(json.dumps(header, indent=2, sort_keys=True, default=str) + "\n")
    rows, cols = np.nonzero(A.matrix)
    with cpath.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["row", "col", "re", "im"])
        for r, c in zip(rows, cols):
            v = A.matrix[r, c]
            w.writerow([int(r), int(c), repr(float(v.real)), repr(float(v.imag))])
    return jpath, cpath


def import_operator(path) -> TruncatedOperator:
    """Read an operator written by :func:`export_operator`; invariants are re-validated."""
    jpath = Path(path).with_suffix(".json")
    header = json.loads(jpath.read_text())
    if header.get("format") != "toeplab-operator" or header.get("version") != FORMAT_VERSION:
        raise ParameterError(f"{jpath} is not a version-{FORMAT_VERSION} operator header")
    s = header["spec"]
    spec = TruncationSpec(QuantizationContext(**s["ctx"]), s["M"])
    if header["dim"] != spec.dim:
        raise AssemblyError(f"header dimension {header['dim']} inconsistent with truncation ({spec.dim})")
    A = np.zeros((spec.dim, spec.dim), dtype=complex)
    with (jpath.parent / header["entries"]).open() as fh:
        for rec in csv.DictReader(fh):
            A[int(rec["row"]), int(rec["col"])] = complex(float(rec["re"]), float(rec["im"]))
    prov = {k: v for k, v in header.get("provenance", {}).items() if k != "hermitian_deviation"}
    return TruncatedOperator(spec, A, hermitian=bool(header["hermitian"]), provenance=prov)
