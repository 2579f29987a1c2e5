"""Classical Hamiltonian flows versus quantum evolution under truncated Toeplitz Hamiltonians.

The classical side integrates ``(x', xi') = -J grad f`` with
``J(x, xi) = (xi, -x)``, i.e. ``x' = -d_xi f`` and ``xi' = d_x f``.  This is
the time reverse of the textbook convention; ``direction="textbook"``
flips it.  With this convention ``f = |z|^2/2`` gives ``z' = i z``, which
matches the quantum evolution ``exp(-i tau A / t)`` of coherent centres for
``A = N``.

The quantum side evolves coefficient vectors exactly through one
eigendecomposition and reports the mass in the top 10% of degrees as a
truncation-leakage indicator.  Nothing here decides completeness; reports
put the two sides next to each other for the probed orbits only.
"""
from __future__ import annotations

import csv
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.integrate import solve_ivp

from .core import QuantizationContext, as_points
from .errors import ParameterError, SpecMismatchError, StepSizeError, UnsupportedVariantError
from .fockbasis import CoefficientVector, TruncationSpec, coherent_coefficients
from .symbol import Symbol
from .toeplitz import TruncatedOperator, assemble_toeplitz, position_operator

ESCAPE_THRESHOLDS = (1e6, 1e7, 1e8)


@dataclass
class ClassicalState:
    x: np.ndarray
    xi: np.ndarray

    def __post_init__(self):
        self.x = np.atleast_1d(np.asarray(self.x, dtype=float))
        self.xi = np.atleast_1d(np.asarray(self.xi, dtype=float))
        if self.x.shape != self.xi.shape or not (np.all(np.isfinite(self.x)) and np.all(np.isfinite(self.xi))):
            raise ParameterError("classical state needs finite x and xi of equal length")

    @classmethod
    def from_complex(cls, z):
        z = np.atleast_1d(np.asarray(z, dtype=complex))
        return cls(z.real, z.imag)

    @property
    def z(self) -> np.ndarray:
        return self.x + 1j * self.xi

    @property
    def vector(self) -> np.ndarray:
        return np.concatenate([self.x, self.xi])


@dataclass(frozen=True)
class EvolutionConfig:
    """Integration and quantum-run settings.

    ``thresholds`` are the escape radii used for extrapolation; the largest
    is the blow-up threshold.  ``leakage_threshold`` defines the leakage
    onset time.
    """

    tau: float = 2.0
    h: float = 1e-3
    integrator: str = "implicit-midpoint"
    thresholds: tuple = ESCAPE_THRESHOLDS
    cutoffs: tuple = (20, 40, 80)
    direction: str = "quantum"
    n_times: int = 201
    leakage_threshold: float = 1e-3

    def __post_init__(self):
        if not (self.tau > 0 and self.h > 0):
            raise ParameterError("tau and h must be positive")
        if min(self.thresholds) <= 1 or list(self.thresholds) != sorted(self.thresholds):
            raise ParameterError("escape thresholds must be increasing and > 1")
        if self.integrator not in ("implicit-midpoint", "adaptive-rk"):
            raise ParameterError(f"unknown integrator {self.integrator!r}")
        if self.direction not in ("quantum", "textbook"):
            raise ParameterError(f"unknown direction {self.direction!r}")
        if self.n_times < 2:
            raise ParameterError("need at least two sample times")

    @property
    def blowup(self) -> float:
        return self.thresholds[-1]

    def to_dict(self):
        return {k: list(v) if isinstance(v, tuple) else v for k, v in asdict(self).items()}


def hamiltonian_vector_field(f: Symbol, direction: str = "quantum"):
    """``y -> (-d_xi f, d_x f)`` on ``y = (x, xi)`` (sign flipped for ``"textbook"``)."""
    if f.d != 1:
        raise ParameterError("classical flow needs a scalar symbol")
    if not (f.is_polynomial or f.has_gradient):
        raise UnsupportedVariantError("classical flow needs a closed-form gradient")
    n = f.n
    sign = 1.0 if direction == "quantum" else -1.0
    if f.is_polynomial:
        # scalar term lists: the integrators call this millions of times on one point
        parts = [[(complex(c[0, 0]), a, b) for (a, b), c in p.terms.items()]
                 for p in f.as_polynomial().real_partials()]

        def gradient(y):
            z = [complex(y[j], y[n + j]) for j in range(n)]
            zb = [v.conjugate() for v in z]
            out = np.empty(2 * n)
            for k, terms in enumerate(parts):
                acc = 0j
                for c, a, b in terms:
                    m = c
                    for j in range(n):
                        m *= z[j] ** a[j] * zb[j] ** b[j]
                    acc += m
                out[k] = acc.real
            return out
    else:
        def gradient(y):
            z = (y[:n] + 1j * y[n:])[None, :]
            return f.gradient(z)[0, :, 0, 0].real

    def field_(y):
        g = gradient(y)
        return sign * np.concatenate([-g[n:], g[:n]])

    return field_


@dataclass
class ClassicalTrajectory:
    times: np.ndarray
    states: np.ndarray                      # (K, 2n) real
    escaped: bool
    crossing_times: dict = field(default_factory=dict)   # threshold -> first time |y| > threshold
    escape_range: tuple | None = None
    extrapolated: float | None = None
    steps: int = 0

    @property
    def z(self) -> np.ndarray:
        n = self.states.shape[1] // 2
        return self.states[:, :n] + 1j * self.states[:, n:]


def _midpoint_step(F, y, h, t):
    nxt = y + h * F(y)
    for _ in range(50):
        new = y + h * F(0.5 * (y + nxt))
        if np.max(np.abs(new - nxt)) <= 1e-13 * (1 + np.max(np.abs(new))):
            return new
        nxt = new
    raise StepSizeError(f"implicit midpoint did not converge at time {t:.6g}", time=t, state=y.copy())


def _extrapolate(crossings: dict):
    """Fit ``tau(B) = T + a / B`` over the thresholds crossed; return ``(T, range)``."""
    B = np.array(sorted(crossings))
    tb = np.array([crossings[b] for b in B])
    if B.size >= 2:
        a, T = np.polyfit(1.0 / B, tb, 1)
    else:
        T = float(tb[-1])
    lo, hi = sorted((float(tb[-1]), float(T)))
    return float(T), (lo, hi)


def classical_flow(f: Symbol, z0, cfg: EvolutionConfig = EvolutionConfig()) -> ClassicalTrajectory:
    """Integrate the flow of ``f`` from ``z0`` up to ``cfg.tau`` or escape past ``cfg.blowup``.

    The implicit midpoint rule uses the step ``h / max(1, |F(y)| / (1 + |y|))``
    so blow-up is resolved; crossing times of every threshold are recorded
    and extrapolated in ``1/B`` to an escape-time range.
    """
    state = z0 if isinstance(z0, ClassicalState) else ClassicalState.from_complex(as_points(z0, f.n))
    F = hamiltonian_vector_field(f, cfg.direction)
    y = state.vector.astype(float)
    crossings = {}
    if cfg.integrator == "adaptive-rk":
        events = []
        for B in cfg.thresholds:
            ev = (lambda s, yy, B=B: np.linalg.norm(yy) - B)
            ev.terminal = B == cfg.blowup
            ev.direction = 1
            events.append(ev)
        sol = solve_ivp(lambda s, yy: F(yy), (0.0, cfg.tau), y, method="DOP853", rtol=1e-11, atol=1e-12,
                        events=events, max_step=max(cfg.h * 100, 1e-3))
        for B, te in zip(cfg.thresholds, sol.t_events):
            if te.size:
                crossings[B] = float(te[0])
        times, states, steps = sol.t, sol.y.T, sol.t.size - 1
    else:
        times, states = [0.0], [y.copy()]
        s = 0.0
        steps = 0
        pending = list(cfg.thresholds)
        while s < cfg.tau and pending:
            v = F(y)
            hk = cfg.h / max(1.0, np.linalg.norm(v) / (1 + np.linalg.norm(y)))
            hk = min(hk, cfg.tau - s)
            y = _midpoint_step(F, y, hk, s)
            s += hk
            steps += 1
            times.append(s)
            states.append(y.copy())
            r = np.linalg.norm(y)
            while pending and r > pending[0]:
                crossings[pending.pop(0)] = float(s)
        times, states = np.array(times), np.array(states)
    escaped = cfg.blowup in crossings
    T, rng = (None, None)
    if escaped:
        T, rng = _extrapolate(crossings)
    return ClassicalTrajectory(np.asarray(times), np.asarray(states), escaped, crossings, rng, T, steps)


# --------------------------------------------------------------------------
# quantum side
# --------------------------------------------------------------------------
@dataclass
class QuantumTrajectory:
    spec: TruncationSpec
    times: np.ndarray
    states: np.ndarray                      # (K, dim) complex

    def norms(self):
        return np.linalg.norm(self.states, axis=1)

    def at(self, k) -> CoefficientVector:
        return CoefficientVector(self.spec, self.states[k])


def quantum_evolve(A: TruncatedOperator, psi0: CoefficientVector, times) -> QuantumTrajectory:
    """``psi(tau) = exp(-i tau A / t) psi0`` at each requested time (one eigendecomposition)."""
    if not A.hermitian:
        raise ParameterError("quantum evolution needs a hermitian generator")
    if A.spec != psi0.spec:
        raise SpecMismatchError("initial state and generator live on different truncations")
    nrm = np.linalg.norm(psi0.coeffs)
    if abs(nrm - 1) > 1e-8:
        raise ParameterError(f"initial state must be normalized (norm {nrm:.12g})")
    times = np.atleast_1d(np.asarray(times, dtype=float))
    lam, V = np.linalg.eigh(A.matrix)
    c = V.conj().T @ psi0.coeffs
    phases = np.exp(-1j * np.outer(times, lam) / A.spec.ctx.t)
    states = (phases * c[None, :]) @ V.T
    return QuantumTrajectory(A.spec, times, states)


def expectation_trajectory(observable, traj: QuantumTrajectory) -> np.ndarray:
    """``<psi(tau), O psi(tau)>`` per time, as ``vdot(psi, O psi)``.

    ``observable`` is a :class:`TruncatedOperator`, a list of them, or
    ``None`` for the position observables ``T_{z_j}`` (result shape ``(K, n)``).
    """
    single = isinstance(observable, TruncatedOperator)
    if observable is None:
        observable = [position_operator(traj.spec, j) for j in range(traj.spec.ctx.n)]
    ops = [observable] if single else list(observable)
    cols = []
    for O in ops:
        if O.spec != traj.spec:
            raise SpecMismatchError("observable and trajectory use different truncations")
        cols.append(np.einsum("ki,ki->k", np.conj(traj.states), traj.states @ O.matrix.T))
    out = np.stack(cols, axis=1)
    return out[:, 0] if single else out


def leakage(traj: QuantumTrajectory) -> np.ndarray:
    """Fraction of mass in degrees above ``0.9 M`` at each time."""
    spec = traj.spec
    top = spec.expand_internal(spec.degrees > 0.9 * spec.M)
    mass = np.abs(traj.states) ** 2
    return np.clip(mass[:, top].sum(axis=1) / mass.sum(axis=1), 0.0, 1.0)


@dataclass
class CompletenessReport:
    """Classical escape and quantum leakage for one probed orbit; no verdict is drawn."""

    z0: list
    classical_escaped: bool
    escape_range: list | None
    escape_crossings: dict
    cutoffs: list
    times: list
    leakage: dict
    onset_times: dict
    onset_trend: str
    summary: str
    note: str = "single probed orbit; completeness up to null sets of initial data is not addressed"

    def to_dict(self):
        d = asdict(self)
        d["schema_version"] = "1.0"
        d["report"] = "CompletenessReport"
        d["escape_crossings"] = {repr(float(k)): v for k, v in self.escape_crossings.items()}
        d["leakage"] = {str(k): v for k, v in self.leakage.items()}
        d["onset_times"] = {str(k): v for k, v in self.onset_times.items()}
        return d


def _trend(values):
    if any(v is None for v in values) or len(values) < 2:
        return "undetermined"
    diffs = np.diff(values)
    if np.all(diffs < 0):
        return "decreasing"
    if np.all(diffs > 0):
        return "increasing"
    return "non-monotone"


def completeness_experiment(f: Symbol, z0, ctx: QuantizationContext,
                            cfg: EvolutionConfig = EvolutionConfig()) -> CompletenessReport:
    """Run the classical flow from ``z0`` and the quantum evolution of the coherent state at ``z0``."""
    if f.d != 1 or ctx.d != 1:
        raise ParameterError("the completeness experiment is defined for scalar symbols")
    if not f.hermitian:
        raise ParameterError("the completeness experiment needs a real symbol")
    z0 = as_points(z0, ctx.n)
    cl = classical_flow(f, z0, cfg)
    times = np.linspace(0.0, cfg.tau, cfg.n_times)
    curves, onsets = {}, {}
    for M in cfg.cutoffs:
        spec = TruncationSpec(ctx, int(M))
        A = assemble_toeplitz(f, spec)
        psi0 = coherent_coefficients(spec, z0)
        psi0 = CoefficientVector(spec, psi0.coeffs / np.linalg.norm(psi0.coeffs))
        lk = leakage(quantum_evolve(A, psi0, times))
        curves[int(M)] = lk.tolist()
        above = np.flatnonzero(lk > cfg.leakage_threshold)
        onsets[int(M)] = float(times[above[0]]) if above.size else None
    trend = _trend([onsets[int(M)] for M in cfg.cutoffs])
    if cl.escaped:
        cl_text = f"classical orbit leaves |y| <= {cfg.blowup:g} at tau in [{cl.escape_range[0]:.6g}, {cl.escape_range[1]:.6g}]"
    else:
        cl_text = f"classical orbit stays below {cfg.blowup:g} up to tau = {cfg.tau:g}"
    q_text = ", ".join(f"M={M}: " + ("none" if onsets[int(M)] is None else f"{onsets[int(M)]:.4g}") for M in cfg.cutoffs)
    summary = f"{cl_text}; leakage onset (> {cfg.leakage_threshold:g}) {q_text}; onset trend across cutoffs: {trend}"
    return CompletenessReport([[float(c.real), float(c.imag)] for c in z0],
                              cl.escaped, list(cl.escape_range) if cl.escaped else None, cl.crossing_times,
                              [int(M) for M in cfg.cutoffs], times.tolist(), curves, onsets, trend, summary)


def write_csv(path, header, rows):
    """Deterministic CSV: shortest round-trip float formatting, ``\\n`` line endings."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
