"""Batch front end: ``python -m toeplab <command> --config run.json``.

Every run writes into its output directory a resolved ``config.json``, the
data artifacts (CSV tables, JSON reports, operator exports) and finally a
``manifest.json``, which is written atomically.  A run that stops on an
error leaves ``FAILED.json`` instead of a manifest.

Exit codes: 0 success, 2 a hypothesis or inequality check returned FAIL,
1 operational error.
"""
from __future__ import annotations

import argparse
import contextlib
import datetime as _dt
import hashlib
import inspect
import json
import os
import sys
import tempfile
import traceback
import warnings
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np
from threadpoolctl import threadpool_limits

from . import __version__
from .core import QuantizationContext
from .criteria import (bc_verify, commutator_diagnostics, grid_sup, main_theorem_hypothesis_check,
                       perturbation_bound_check, theta_derivative_bound)
from .dynamics import EvolutionConfig, classical_flow, completeness_experiment, write_csv
from .errors import AccuracyError, ParameterError, ToeplabError
from .fockbasis import TruncationSpec, basis_vector
from .quadrature import QuadratureSpec
from .symbol import (BUILTINS, HeatParams, constant, heat_transform, off_diagonal_heat,
                     sample_points, semigroup_identity_check, spectral_norm, symbol_from_dict)
from .toeplitz import (assemble_toeplitz, berezin_transform, covariance_check, export_operator, form_derivative,
                       integral_representation_check, operator_norm, rotation_covariance_check, weyl_matrix,
                       weyl_relation_check)

COMMANDS = ("quantize", "heat", "check", "bcverify", "identities", "spectrum", "dynamics", "report")
EXIT_OK, EXIT_ERROR, EXIT_FAIL = 0, 1, 2


def load_schema(name: str) -> dict:
    return json.loads(resources.files("toeplab.schemas").joinpath(f"{name}.schema.json").read_text())


def _now():
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")


def _atomic_write(path: Path, text: str):
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    with os.fdopen(fd, "w") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n"


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.bool_):
        return bool(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, complex):
        return [o.real, o.imag]
    raise TypeError(f"not JSON serializable: {type(o).__name__}")


# --------------------------------------------------------------------------
# configuration
# --------------------------------------------------------------------------
def load_config(path, out=None, seed=None) -> dict:
    """Read, validate and complete a run configuration."""
    path = Path(path)
    cfg = json.loads(path.read_text())
    jsonschema.validate(cfg, load_schema("config"))
    cfg = dict(cfg)
    ctx = {"n": 1, "t": 0.5, **cfg.get("ctx", {})}
    cfg["ctx"] = ctx
    cfg.setdefault("M", 40)
    cfg.setdefault("quadrature", {})
    params = {"R": 4.0, "resolution": 17, **cfg.get("params", {})}
    cfg["params"] = params
    if seed is not None:
        cfg["seed"] = seed
    cfg.setdefault("seed", 0)
    if out is not None:
        cfg["output"] = str(out)
    cfg.setdefault("output", str(path.with_suffix("")) + "-run")
    sym = cfg.get("symbol")
    if isinstance(sym, str):
        sym_path = Path(sym)
        if not sym_path.is_absolute():
            sym_path = path.parent / sym_path
        cfg["symbol"] = json.loads(sym_path.read_text())
    if cfg["command"] != "report" and "symbol" not in cfg:
        raise ParameterError(f"command {cfg['command']!r} needs a symbol")
    return cfg


def build_symbol(doc, ctx: dict):
    """Symbol from its document; built-ins inherit ``n`` from the context when they take it."""
    if isinstance(doc, dict) and "builtin" in doc and doc["builtin"] in BUILTINS:
        params = dict(doc.get("params", {}))
        if "n" in inspect.signature(BUILTINS[doc["builtin"]]).parameters:
            params.setdefault("n", ctx["n"])
        doc = {**doc, "params": params}
    if isinstance(doc, (int, float)):
        return constant([[doc]], n=ctx["n"])
    return symbol_from_dict(doc)


def _context(cfg, f) -> QuantizationContext:
    c = cfg["ctx"]
    d = c.get("d", f.d)
    if d != f.d or c["n"] != f.n:
        raise ParameterError(f"symbol has (n={f.n}, d={f.d}) but the context asks for (n={c['n']}, d={d})")
    return QuantizationContext(c["n"], c["t"], d)


def _quad(cfg) -> QuadratureSpec:
    return QuadratureSpec(**cfg["quadrature"])


def _points(raw, n):
    """``[[re, im], ...]`` for n = 1 or ``[[[re, im] x n], ...]`` in general."""
    a = np.asarray(raw, dtype=float)
    if a.ndim == 2 and n == 1:
        a = a[:, None, :]
    if a.ndim != 3 or a.shape[1:] != (n, 2):
        raise ParameterError(f"points must have shape (P, {n}, 2) (or (P, 2) when n = 1)")
    return a[..., 0] + 1j * a[..., 1]


def _point_columns(z):
    cols = []
    for j in range(z.shape[-1]):
        cols += [z[..., j].real, z[..., j].imag]
    return cols


def _point_header(n):
    return [h for j in range(n) for h in (f"x{j + 1}", f"xi{j + 1}")]


def _verdict(ok: bool) -> str:
    return "PASS" if ok else "FAIL"


# --------------------------------------------------------------------------
# commands; each returns (verdicts, written files)
# --------------------------------------------------------------------------
def cmd_quantize(cfg, out: Path):
    f = build_symbol(cfg["symbol"], cfg["ctx"])
    ctx = _context(cfg, f)
    spec = TruncationSpec(ctx, cfg["M"])
    A = assemble_toeplitz(f, spec, _quad(cfg))
    files = list(export_operator(A, out / "operator"))
    ev = A.eigenvalues()
    rows = [(k, float(np.real(v)), float(np.imag(v))) for k, v in enumerate(ev)]
    write_csv(out / "spectrum.csv", ["index", "re", "im"], rows)
    diag = {
        "dim": spec.dim,
        "hermitian": A.hermitian,
        "hermitian_deviation": A.provenance.get("hermitian_deviation"),
        "operator_norm": operator_norm(A),
        "min_eigenvalue": float(np.min(np.real(ev))),
        "positive_semidefinite": bool(A.hermitian and np.min(np.real(ev)) >= -1e-9),
        "method": A.provenance.get("method"),
    }
    (out / "diagnostics.json").write_text(_dump(diag))
    return {}, files + [out / "spectrum.csv", out / "diagnostics.json"]


def cmd_heat(cfg, out: Path):
    f = build_symbol(cfg["symbol"], cfg["ctx"])
    ctx = _context(cfg, f)
    p = cfg["params"]
    s = float(p.get("s", ctx.t))
    z = _points(p["points"], ctx.n) if "points" in p else sample_points(ctx.n, p["R"], int(p["resolution"]))
    fs = heat_transform(f, HeatParams(s))
    vals = fs(z)
    d = ctx.d
    header = _point_header(ctx.n) + [f"{part}_{i}{j}" for i in range(d) for j in range(d) for part in ("re", "im")]
    rows = []
    for k in range(z.shape[0]):
        row = [c[k] for c in _point_columns(z)]
        for i in range(d):
            for j in range(d):
                row += [vals[k, i, j].real, vals[k, i, j].imag]
        rows.append(row)
    write_csv(out / "heat.csv", header, rows)
    (out / "heat.json").write_text(_dump({"s": s, "symbol": fs.to_dict() if fs.is_polynomial else repr(fs)}))
    return {}, [out / "heat.csv", out / "heat.json"]


def cmd_check(cfg, out: Path):
    f = build_symbol(cfg["symbol"], cfg["ctx"])
    ctx = _context(cfg, f)
    p = cfg["params"]
    s = float(p.get("s", 0.0))
    R, res = float(p["R"]), int(p["resolution"])
    main = main_theorem_hypothesis_check(f, s, ctx, R, res)
    report = {"main_theorem": main.to_dict()}
    verdicts = {"main_theorem": _verdict(main.verdict)}
    theta = theta_derivative_bound(f, R, res)
    report["theta_derivative"] = theta.to_dict()
    verdicts["theta_derivative"] = _verdict(theta.verdict)
    rows = [(label, r.sup_statistic, r.sup_statistic_refined, r.relative_change, r.linear_constant, _verdict(r.bounded))
            for label, r in main.derivatives.items()]
    write_csv(out / "check.csv", ["derivative", "sup_statistic", "sup_statistic_refined", "relative_change",
                                  "linear_constant", "verdict"], rows)
    (out / "check.json").write_text(_dump(report))
    print(f"main theorem hypothesis at s={s:g}: {verdicts['main_theorem']}"
          + (f" (failing: {', '.join(main.failing)})" if main.failing else ""))
    for row in rows:
        print(f"  {row[0]:<10} sup={row[1]:<12.6g} refined={row[2]:<12.6g} {row[5]}")
    print(f"angular derivative quadratic bound: {verdicts['theta_derivative']}")
    return {"main_theorem": verdicts["main_theorem"]}, [out / "check.csv", out / "check.json"]


def cmd_bcverify(cfg, out: Path):
    f = build_symbol(cfg["symbol"], cfg["ctx"])
    ctx = _context(cfg, f)
    p = cfg["params"]
    ss = p.get("s", [ctx.t / 8, ctx.t / 4])
    ss = [float(v) for v in np.atleast_1d(ss)]
    spec = TruncationSpec(ctx, cfg["M"])
    q = _quad(cfg)
    rows, reports, verdicts = [], [], {}
    for s in ss:
        for name, fn in (("berger_coburn", bc_verify), ("perturbation", perturbation_bound_check)):
            try:
                r = fn(f, s, spec, float(p["R"]), int(p["resolution"]), q)
            except AccuracyError as exc:
                reports.append({"check": name, "s": s, "skipped": str(exc)})
                continue
            key = f"{name}@s={s:g}"
            verdicts[key] = _verdict(r.holds)
            rows.append((name, s, r.lhs, r.rhs, r.constant, r.slack, verdicts[key]))
            reports.append({"check": name, **r.to_dict()})
            print(f"{key}: L={r.lhs:.6g} <= rhs={r.rhs:.6g} (C={r.constant:.6g}, slack {r.slack:.6g}) {verdicts[key]}")
    write_csv(out / "bcverify.csv", ["check", "s", "lhs", "rhs", "constant", "slack", "verdict"], rows)
    (out / "bcverify.json").write_text(_dump({"reports": reports}))
    return verdicts, [out / "bcverify.csv", out / "bcverify.json"]


IDENTITY_TOLERANCES = {
    "berezin_heat": 1e-8,
    "semigroup": 1e-6,
    "off_diagonal_decay": 0.0,
    "weyl_relation": 1e-6,
    "weyl_unitarity": 1e-10,
    "covariance": 1e-6,
    "rotation_covariance": 1e-10,
    "form_derivative": 1e-10,
    "integral_representation": 1e-5,
}


def run_identities(f, ctx: QuantizationContext, M: int, seed: int, pairs: int = 20, q=None):
    """The identity checklist for one symbol; returns rows ``(check, case, residual, tolerance, verdict)``."""
    q = q or QuadratureSpec()
    rng = np.random.default_rng(seed)
    spec = TruncationSpec(ctx, M)
    rows = []

    def add(check, case, residual):
        tol = IDENTITY_TOLERANCES[check]
        rows.append((check, case, float(residual), tol, _verdict(residual <= tol)))

    def disc(k, radius):
        r = radius * np.sqrt(rng.uniform(size=(k, ctx.n)))
        return r * np.exp(2j * np.pi * rng.uniform(size=(k, ctx.n)))

    T = assemble_toeplitz(f, spec, q)
    pts = disc(10, 1.0)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        ber = berezin_transform(T, pts)
    heat = heat_transform(f, HeatParams(ctx.t))(pts)
    add("berezin_heat", "10 points |z|<=1", np.max(spectral_norm(ber - heat)))

    z, w = disc(pairs, 2.0), disc(pairs, 2.0)
    add("semigroup", f"s=t/4, {pairs} pairs |z|,|w|<=2", semigroup_identity_check(f, ctx.t / 4, z, w, ctx, q))

    try:
        sup = max(grid_sup(f))
        od = off_diagonal_heat(f, z, w, ctx, q)
        bound = sup * np.exp(-np.sum(np.abs(z - w) ** 2, axis=-1) / (8 * ctx.t))
        add("off_diagonal_decay", f"{pairs} pairs, violations", float(np.sum(spectral_norm(od) > bound * (1 + 1e-12))))
    except AccuracyError:
        pass

    a, b = disc(1, 0.5)[0], disc(1, 0.5)[0]
    add("weyl_relation", "|w|,|z|<=0.5", weyl_relation_check(spec, a, b))
    W = weyl_matrix(spec, a).matrix
    add("weyl_unitarity", "|w|<=0.5", np.max(np.abs(W @ W.conj().T - np.eye(spec.dim))))

    if f.is_polynomial:
        poly = f.as_polynomial()
        shift = np.ones(ctx.n, dtype=complex) / np.sqrt(ctx.n)
        add("covariance", "z=(1,..)/sqrt(n), interior M/2", covariance_check(f, spec, shift))
        add("rotation_covariance", "theta=pi/3", rotation_covariance_check(f, spec, np.pi / 3))
        top = M - poly.degree - 1
        if top >= 0:
            for j in range(ctx.n):
                for conj in (False, True):
                    D = form_derivative(T, j, conj).interior(top)
                    ref = assemble_toeplitz(poly.derivative(j, conj), spec).interior(top)
                    scale = max(1.0, float(np.max(np.abs(ref))))
                    name = f"{'dbar' if conj else 'd'}_{j + 1}, interior degree {top}"
                    add("form_derivative", name, np.max(np.abs(D - ref), initial=0.0) / scale)

    if M >= 2:
        g = basis_vector(spec, tuple(1 if k == 0 else 0 for k in range(ctx.n)))
        add("integral_representation", "g=e_1, z=0.5", integral_representation_check(f, g, 0.5 * np.ones(ctx.n), q))
    return rows


def cmd_identities(cfg, out: Path):
    f = build_symbol(cfg["symbol"], cfg["ctx"])
    ctx = _context(cfg, f)
    rows = run_identities(f, ctx, cfg["M"], cfg["seed"], int(cfg["params"].get("pairs", 20)), _quad(cfg))
    write_csv(out / "identities.csv", ["check", "case", "residual", "tolerance", "verdict"], rows)
    verdicts = {}
    for check, case, res, tol, v in rows:
        verdicts[f"{check}: {case}"] = v
        print(f"{check:<24} {case:<36} residual={res:<11.3e} tol={tol:<8.0e} {v}")
    return verdicts, [out / "identities.csv"]


def cmd_spectrum(cfg, out: Path):
    f = build_symbol(cfg["symbol"], cfg["ctx"])
    ctx = _context(cfg, f)
    p = cfg["params"]
    cutoffs = [int(m) for m in p.get("cutoffs", [cfg["M"]])]
    q = _quad(cfg)
    rows, norms = [], []
    for M in cutoffs:
        A = assemble_toeplitz(f, TruncationSpec(ctx, M), q)
        ev = A.eigenvalues()
        rows += [(M, k, float(np.real(v)), float(np.imag(v))) for k, v in enumerate(ev)]
        norms.append((M, operator_norm(A)))
    write_csv(out / "spectrum.csv", ["M", "index", "re", "im"], rows)
    write_csv(out / "norms.csv", ["M", "operator_norm"], norms)
    files = [out / "spectrum.csv", out / "norms.csv"]
    if len(cutoffs) >= 2 and cutoffs[0] >= 1:
        diag = commutator_diagnostics(f, ctx, cutoffs, seed=cfg["seed"], q=q)
        write_csv(out / "commutator.csv", ["m", "c1", "c2"], list(zip(diag.cutoffs, diag.c1, diag.c2)))
        (out / "commutator.json").write_text(_dump(diag.to_dict()))
        files += [out / "commutator.csv", out / "commutator.json"]
        print(f"commutator growth exponents: c1 {diag.exponent_c1:.3f}, c2 {diag.exponent_c2:.3f}")
    return {}, files


def cmd_dynamics(cfg, out: Path):
    f = build_symbol(cfg["symbol"], cfg["ctx"])
    ctx = _context(cfg, f)
    p = cfg["params"]
    keys = ("tau", "h", "integrator", "direction", "n_times", "leakage_threshold")
    ecfg = EvolutionConfig(**{k: p[k] for k in keys if k in p},
                           **({"cutoffs": tuple(p["cutoffs"])} if "cutoffs" in p else {}))
    z0 = _points([p.get("z0", [1.0, 0.0])] if np.ndim(p.get("z0", [1.0, 0.0])) == 1 else [p["z0"]], ctx.n)[0]
    rep = completeness_experiment(f, z0, ctx, ecfg)
    traj = classical_flow(f, z0, ecfg)
    write_csv(out / "classical.csv", ["time"] + _point_header(ctx.n),
              [[tm] + list(st) for tm, st in zip(traj.times, _interleave(traj.states, ctx.n))])
    header = ["time"] + [f"leakage_M{M}" for M in rep.cutoffs]
    write_csv(out / "leakage.csv", header,
              [[tm] + [rep.leakage[M][k] for M in rep.cutoffs] for k, tm in enumerate(rep.times)])
    doc = rep.to_dict()
    doc.pop("times")
    doc.pop("leakage")
    doc["config"] = ecfg.to_dict()
    (out / "dynamics.json").write_text(_dump(doc))
    print(rep.summary)
    return {}, [out / "classical.csv", out / "leakage.csv", out / "dynamics.json"]


def _interleave(states, n):
    out = np.empty_like(states)
    out[:, 0::2] = states[:, :n]
    out[:, 1::2] = states[:, n:]
    return out


def cmd_report(cfg, out: Path):
    runs = cfg["params"].get("runs", [])
    if not runs:
        raise ParameterError("report needs params.runs: a list of run directories")
    lines = ["| run | command | status | checks | failing |", "|---|---|---|---|---|"]
    summary = []
    for r in runs:
        d = Path(r)
        if (d / "manifest.json").exists():
            m = json.loads((d / "manifest.json").read_text())
            failing = [k for k, v in m["verdicts"].items() if v == "FAIL"]
            lines.append(f"| {d} | {m['command']} | {m['status']} | {len(m['verdicts'])} | {'; '.join(failing)} |")
            summary.append({"run": str(d), "command": m["command"], "status": m["status"], "failing": failing})
        elif (d / "FAILED.json").exists():
            e = json.loads((d / "FAILED.json").read_text())
            lines.append(f"| {d} | {e.get('command', '?')} | ERROR | 0 | {e['error']} |")
            summary.append({"run": str(d), "status": "ERROR", "error": e["error"]})
        else:
            lines.append(f"| {d} | ? | MISSING | 0 | |")
            summary.append({"run": str(d), "status": "MISSING"})
    text = "\n".join(lines) + "\n"
    (out / "report.md").write_text(text)
    (out / "report.json").write_text(_dump({"runs": summary}))
    print(text, end="")
    return {}, [out / "report.md", out / "report.json"]


HANDLERS = {
    "quantize": cmd_quantize,
    "heat": cmd_heat,
    "check": cmd_check,
    "bcverify": cmd_bcverify,
    "identities": cmd_identities,
    "spectrum": cmd_spectrum,
    "dynamics": cmd_dynamics,
    "report": cmd_report,
}


def _inventory(files, out: Path):
    inv = []
    for p in sorted({Path(f) for f in files}):
        data = p.read_bytes()
        inv.append({"file": str(p.relative_to(out)), "sha256": hashlib.sha256(data).hexdigest(), "bytes": len(data)})
    return inv


def run(command: str, config_path, out=None, seed=None, threads=None) -> int:
    """Execute one command; returns the process exit code."""
    started = _now()
    out_dir = Path(out) if out is not None else None
    cfg = None
    try:
        cfg = load_config(config_path, out, seed)
        if cfg["command"] != command:
            raise ParameterError(f"config is for command {cfg['command']!r}, not {command!r}")
        out_dir = Path(cfg["output"])
        out_dir.mkdir(parents=True, exist_ok=True)
        for stale in ("manifest.json", "FAILED.json"):
            with contextlib.suppress(FileNotFoundError):
                (out_dir / stale).unlink()
        (out_dir / "config.json").write_text(_dump(cfg))
        limits = threadpool_limits(limits=threads) if threads else contextlib.nullcontext()
        with limits, warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            np.random.seed(cfg["seed"])
            verdicts, files = HANDLERS[command](cfg, out_dir)
        status = ("FAIL" if "FAIL" in verdicts.values() else "PASS") if verdicts else "DONE"
        manifest = {
            "schema_version": 1,
            "tool": "toeplab",
            "version": __version__,
            "command": command,
            "config": cfg,
            "started": started,
            "finished": _now(),
            "status": status,
            "verdicts": verdicts,
            "outputs": _inventory(list(files) + [out_dir / "config.json"], out_dir),
            "warnings": sorted({f"{w.category.__name__}: {w.message}" for w in caught}),
        }
        jsonschema.validate(json.loads(_dump(manifest)), load_schema("manifest"))
        _atomic_write(out_dir / "manifest.json", _dump(manifest))
        return EXIT_FAIL if status == "FAIL" else EXIT_OK
    except (ToeplabError, jsonschema.ValidationError, OSError, json.JSONDecodeError, KeyError, ValueError,
            TypeError) as exc:
        err = {
            "command": command,
            "error": type(exc).__name__,
            "message": str(exc).splitlines()[0] if str(exc) else "",
            "started": started,
            "failed": _now(),
        }
        if isinstance(exc, ParameterError):
            err["hint"] = "a parameter violates the documented precondition of the operation"
        print(json.dumps(err), file=sys.stderr)
        if os.environ.get("TOEPLAB_TRACEBACK"):
            traceback.print_exc()
        if out_dir is not None:
            with contextlib.suppress(OSError):
                out_dir.mkdir(parents=True, exist_ok=True)
                _atomic_write(out_dir / "FAILED.json", _dump(err))
        return EXIT_ERROR


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="toeplab", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"toeplab {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=True, help="JSON run configuration")
        sp.add_argument("--out", help="output directory (overrides config 'output')")
        sp.add_argument("--seed", type=int, help="random seed (overrides config 'seed')")
        sp.add_argument("--threads", type=int, help="BLAS thread limit")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return run(args.command, args.config, args.out, args.seed, args.threads)


if __name__ == "__main__":
    sys.exit(main())
