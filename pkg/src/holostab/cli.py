"""Batch experiment runner.

Usage::

    holostab run --config experiment.json [--output DIR] [--quiet] [--threads N]
    holostab validate --config experiment.json

A run reads one JSON document, builds the connection, loops, state and error
model it describes, dispatches to the library, and writes ``summary.json``
plus an experiment-specific CSV into the output directory. Nothing is written
unless the whole computation succeeds.

Exit codes: 0 success, 2 configuration error, 3 numerical failure
(non-convergence, lost degeneracy), 4 failed self-check.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import logging
import math
import os
import sys
import time
from dataclasses import dataclass, fields
from pathlib import Path as FsPath

import numpy as np

from . import __version__
from .connection import (
    AdiabaticConnection,
    ConnectionField,
    ConstantConnection,
    FourierConnection,
    HamiltonianFamily,
    LinearConnection,
    PureGaugeConnection,
)
from .errors import ConvergenceError, DegeneracyLostError, GaugeAlignmentError, HolostabError, InvalidInputError, SelfCheckError
from .fidelity import (
    fidelity_exact,
    fidelity_rate,
    fidelity_taylor,
    linear_term,
    loglog_slope,
    parallelogram_fidelity,
    robustness_scan,
    scaling_experiment,
)
from .geometry import (
    Loop,
    ParallelogramErrorModel,
    SmoothErrorModel,
    circle_loop,
    parallelogram_loop,
    perturb_loop,
    square_loop,
)
from .holonomy import IntegratorConfig, convergence_study, holonomy, stokes_residual
from .linalg import density_matrix, gell_mann, maximally_mixed, pure_state, unitarity_defect

log = logging.getLogger("holostab")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_SELFCHECK = 0, 2, 3, 4

EXPERIMENTS = ("holonomy", "fidelity", "taylor", "rate", "stokes", "scaling", "robustness", "convergence")

CSV_HEADERS = {
    "scaling": ["epsilon", "f_re", "f_im", "abs_f", "abs_dev"],
    "convergence": ["steps", "distance"],
    "stokes": ["mesh_n", "residual"],
    "rate": ["plane_mu", "plane_nu", "rate", "area", "fd_estimate"],
    "taylor": ["epsilon", "f_re", "f_im", "order2_re", "order2_im", "order3_re", "order3_im", "order4_re", "order4_im", "residual2"],
}


class ConfigError(Exception):
    """Invalid configuration; ``where`` is a dotted path into the document."""

    def __init__(self, where: str, message: str):
        super().__init__(f"{where}: {message}" if where else message)
        self.where = where


def fmt(x) -> str:
    """Lossless text form of a number (17 significant digits)."""
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    return format(float(x) + 0.0, ".17g")  # + 0.0 folds -0.0 into 0.0


# --- schema helpers ----------------------------------------------------------


def _join(path: str, key) -> str:
    if isinstance(key, int):
        return f"{path}[{key}]"
    return f"{path}.{key}" if path else str(key)


def _req(obj: dict, key: str, path: str):
    if not isinstance(obj, dict):
        raise ConfigError(path, "expected an object")
    if key not in obj:
        raise ConfigError(_join(path, key), "missing required field")
    return obj[key]


def _number(x, path: str, positive: bool = False) -> float:
    if isinstance(x, bool) or not isinstance(x, (int, float)) or not math.isfinite(x):
        raise ConfigError(path, f"expected a finite number, got {x!r}")
    if positive and not x > 0:
        raise ConfigError(path, "must be > 0")
    return float(x)


def _integer(x, path: str, minimum: int | None = None) -> int:
    if isinstance(x, bool) or not isinstance(x, int):
        raise ConfigError(path, f"expected an integer, got {x!r}")
    if minimum is not None and x < minimum:
        raise ConfigError(path, f"must be >= {minimum}")
    return x


def _vector(x, path: str, dim: int | None = None) -> np.ndarray:
    if not isinstance(x, list) or not x:
        raise ConfigError(path, "expected a non-empty list of numbers")
    v = np.array([_number(c, _join(path, i)) for i, c in enumerate(x)])
    if dim is not None and v.size != dim:
        raise ConfigError(path, f"dimension {v.size} does not match connection control_dim {dim}")
    return v


def _complex_matrix(x, path: str) -> np.ndarray:
    """Square matrix given as rows of [re, im] pairs."""
    if not isinstance(x, list) or not x:
        raise ConfigError(path, "expected a list of rows of [re, im] pairs")
    n = len(x)
    out = np.zeros((n, n), dtype=complex)
    for i, row in enumerate(x):
        rp = _join(path, i)
        if not isinstance(row, list) or len(row) != n:
            raise ConfigError(rp, f"expected a row of {n} [re, im] pairs")
        for j, pair in enumerate(row):
            pp = _join(rp, j)
            if not isinstance(pair, list) or len(pair) != 2:
                raise ConfigError(pp, "expected an [re, im] pair")
            out[i, j] = complex(_number(pair[0], pp), _number(pair[1], pp))
    return out


def encode_matrix(m) -> list:
    return [[[float(z.real), float(z.imag)] for z in row] for row in np.asarray(m, dtype=complex)]


def _seed(spec: dict, cfg: dict, path: str) -> int:
    if "seed" in spec:
        return _integer(spec["seed"], _join(path, "seed"))
    if "seed" in cfg:
        return _integer(cfg["seed"], "seed")
    raise ConfigError(_join(path, "seed"), "randomized spec needs a seed (here or at top level)")


# --- builders -----------------------------------------------------------------


def build_connection(spec, cfg: dict, path: str = "connection") -> ConnectionField:
    kind = _req(spec, "kind", path)
    try:
        if kind == "constant":
            mats = _req(spec, "matrices", path)
            if not isinstance(mats, list) or not mats:
                raise ConfigError(_join(path, "matrices"), "expected a non-empty list of matrices")
            ms = [_complex_matrix(m, _join(_join(path, "matrices"), i)) for i, m in enumerate(mats)]
            if len({m.shape for m in ms}) != 1:
                raise ConfigError(_join(path, "matrices"), "components have different sizes")
            return ConstantConnection(ms)
        if kind == "zero":
            d = _integer(_req(spec, "control_dim", path), _join(path, "control_dim"), 1)
            n = _integer(_req(spec, "code_dim", path), _join(path, "code_dim"), 1)
            return ConstantConnection.zero(d, n)
        if kind == "abelian_uniform":
            return LinearConnection.abelian_uniform(_number(spec.get("strength", 1.0), _join(path, "strength")))
        if kind in ("fourier", "pure_gauge"):
            kw = dict(
                control_dim=_integer(spec.get("control_dim", 2), _join(path, "control_dim"), 1),
                code_dim=_integer(spec.get("code_dim", 2), _join(path, "code_dim"), 1),
                seed=_seed(spec, cfg, path),
                amplitude=_number(spec.get("amplitude", 1.0), _join(path, "amplitude")),
            )
            if kind == "fourier":
                kw["cutoff"] = _integer(spec.get("cutoff", 2), _join(path, "cutoff"), 1)
                return FourierConnection(**kw)
            kw["cutoff"] = _integer(spec.get("cutoff", 1), _join(path, "cutoff"), 1)
            kw["factors"] = _integer(spec.get("factors", 3), _join(path, "factors"), 1)
            return PureGaugeConnection(**kw)
        if kind == "hamiltonian_family":
            h = _number(spec.get("h", 1e-4), _join(path, "h"), positive=True)
            preset = spec.get("preset")
            if preset is not None:
                if preset != "su3_example":
                    raise ConfigError(_join(path, "preset"), f"unknown preset {preset!r}")
                return AdiabaticConnection(HamiltonianFamily.su3_example(), h=h)
            h0 = _complex_matrix(_req(spec, "h0", path), _join(path, "h0"))
            gens_spec = _req(spec, "generators", path)
            if not isinstance(gens_spec, list) or not gens_spec:
                raise ConfigError(_join(path, "generators"), "expected a non-empty list")
            gens = []
            for i, g in enumerate(gens_spec):
                gp = _join(_join(path, "generators"), i)
                if isinstance(g, dict) and "gell_mann" in g:
                    gens.append(gell_mann(_integer(g["gell_mann"], _join(gp, "gell_mann"))))
                else:
                    gens.append(_complex_matrix(g, gp))
            code_dim = _integer(_req(spec, "code_dim", path), _join(path, "code_dim"), 1)
            return AdiabaticConnection(HamiltonianFamily(h0, gens, code_dim), h=h)
    except InvalidInputError as exc:
        raise ConfigError(path, str(exc)) from exc
    raise ConfigError(_join(path, "kind"), f"unknown connection kind {kind!r}")


def build_loop(spec, dim: int, path: str) -> Loop:
    kind = _req(spec, "kind", path)
    try:
        if kind == "vertices":
            vs = _req(spec, "vertices", path)
            if not isinstance(vs, list) or len(vs) < 2:
                raise ConfigError(_join(path, "vertices"), "expected at least two vertices")
            pts = np.array([_vector(v, _join(_join(path, "vertices"), i), dim) for i, v in enumerate(vs)])
            return Loop.from_vertices(pts)
        plane = tuple(_integer(c, _join(_join(path, "plane"), i), 0) for i, c in enumerate(spec.get("plane", [0, 1])))
        if len(plane) != 2 or max(plane) >= dim or plane[0] == plane[1]:
            raise ConfigError(_join(path, "plane"), f"expected two distinct axes below {dim}")
        if kind == "square":
            return square_loop(
                _vector(_req(spec, "anchor", path), _join(path, "anchor"), dim),
                _number(_req(spec, "side", path), _join(path, "side"), positive=True),
                plane=plane,
                per_side=_integer(spec.get("per_side", 64), _join(path, "per_side"), 1),
            )
        if kind == "circle":
            return circle_loop(
                _vector(_req(spec, "center", path), _join(path, "center"), dim),
                _number(_req(spec, "radius", path), _join(path, "radius"), positive=True),
                plane=plane,
                samples=_integer(spec.get("samples", 256), _join(path, "samples"), 3),
            )
        if kind == "parallelogram":
            return parallelogram_loop(
                _vector(_req(spec, "anchor", path), _join(path, "anchor"), dim),
                _vector(_req(spec, "a", path), _join(path, "a"), dim),
                _vector(_req(spec, "b", path), _join(path, "b"), dim),
            )
    except InvalidInputError as exc:
        raise ConfigError(path, str(exc)) from exc
    raise ConfigError(_join(path, "kind"), f"unknown loop kind {kind!r}")


def build_error_model(spec, cfg: dict, dim: int, path: str = "error_model"):
    kind = _req(spec, "kind", path)
    try:
        if kind == "smooth":
            return SmoothErrorModel(
                seed=_seed(spec, cfg, path),
                amplitude=_number(spec.get("amplitude", 1.0), _join(path, "amplitude")),
                cutoff=_integer(spec.get("cutoff", 3), _join(path, "cutoff"), 1),
            )
        if kind == "parallelogram":
            return ParallelogramErrorModel(
                _vector(_req(spec, "anchor", path), _join(path, "anchor"), dim),
                _vector(_req(spec, "a", path), _join(path, "a"), dim),
                _vector(_req(spec, "b", path), _join(path, "b"), dim),
            )
    except InvalidInputError as exc:
        raise ConfigError(path, str(exc)) from exc
    raise ConfigError(_join(path, "kind"), f"unknown error model kind {kind!r}")


def build_rho(spec, code_dim: int, path: str = "rho") -> np.ndarray:
    kind = _req(spec, "kind", path)
    try:
        if kind == "pure":
            k = _integer(_req(spec, "index", path), _join(path, "index"), 0)
            if k >= code_dim:
                raise ConfigError(_join(path, "index"), f"index {k} out of range for code dimension {code_dim}")
            return pure_state(k, code_dim)
        if kind == "maximally_mixed":
            return maximally_mixed(code_dim)
        if kind == "matrix":
            m = _complex_matrix(_req(spec, "matrix", path), _join(path, "matrix"))
            if m.shape[0] != code_dim:
                raise ConfigError(_join(path, "matrix"), f"dimension {m.shape[0]} does not match connection code_dim {code_dim}")
            return density_matrix(m)
    except InvalidInputError as exc:
        raise ConfigError(path, f"DensityMatrix invariant violated: {exc}") from exc
    raise ConfigError(_join(path, "kind"), f"unknown rho kind {kind!r}")


def build_integrator(spec, path: str = "integrator") -> IntegratorConfig:
    if spec is None:
        return IntegratorConfig()
    if not isinstance(spec, dict):
        raise ConfigError(path, "expected an object")
    known = {f.name for f in fields(IntegratorConfig)}
    for key in spec:
        if key not in known:
            raise ConfigError(_join(path, key), "unknown integrator field")
    kw = {}
    for key in ("steps_per_segment", "refinement"):
        if key in spec:
            kw[key] = _integer(spec[key], _join(path, key), 0)
    if "tolerance" in spec:
        kw["tolerance"] = _number(spec["tolerance"], _join(path, "tolerance"), positive=True)
    if "unitary_projection" in spec:
        if not isinstance(spec["unitary_projection"], bool):
            raise ConfigError(_join(path, "unitary_projection"), "expected true or false")
        kw["unitary_projection"] = spec["unitary_projection"]
    try:
        return IntegratorConfig(**kw)
    except InvalidInputError as exc:
        raise ConfigError(path, str(exc)) from exc


def _epsilons(cfg: dict, path: str = "epsilons") -> np.ndarray:
    eps = _req(cfg, "epsilons", "")
    if not isinstance(eps, list) or not eps:
        raise ConfigError(path, "expected a non-empty list")
    return np.array([_number(e, _join(path, i), positive=True) for i, e in enumerate(eps)])


def _plane(x, dim: int, path: str) -> tuple[int, int]:
    if not isinstance(x, list) or len(x) != 2:
        raise ConfigError(path, "expected [mu, nu]")
    mu, nu = (_integer(c, _join(path, i), 0) for i, c in enumerate(x))
    if not nu < mu < dim:
        raise ConfigError(path, f"plane must satisfy nu < mu < {dim}")
    return mu, nu


@dataclass
class Experiment:
    """Fully built experiment, ready to run."""

    kind: str
    config: dict
    field: ConnectionField
    integrator: IntegratorConfig
    rho: np.ndarray | None = None
    loop: Loop | None = None
    loop_prime: Loop | None = None
    model: object = None


def build(cfg) -> Experiment:
    """Check the schema and cross-field consistency; no heavy computation."""
    if not isinstance(cfg, dict):
        raise ConfigError("", "top level must be a JSON object")
    kind = _req(cfg, "experiment", "")
    if kind not in EXPERIMENTS:
        raise ConfigError("experiment", f"must be one of {', '.join(EXPERIMENTS)}")
    if "seed" in cfg:
        _integer(cfg["seed"], "seed")
    if "output" in cfg and not isinstance(cfg["output"], str):
        raise ConfigError("output", "expected a directory path string")
    fld = build_connection(_req(cfg, "connection", ""), cfg)
    d, n = fld.control_dim, fld.code_dim
    exp = Experiment(kind=kind, config=cfg, field=fld, integrator=build_integrator(cfg.get("integrator")))
    if "rho" in cfg:
        exp.rho = build_rho(cfg["rho"], n)
    elif kind in ("fidelity", "taylor", "rate", "scaling", "robustness"):
        raise ConfigError("rho", "missing required field")
    if "loop" in cfg:
        exp.loop = build_loop(cfg["loop"], d, "loop")
    elif kind in ("holonomy", "fidelity", "stokes", "scaling", "robustness", "convergence"):
        raise ConfigError("loop", "missing required field")
    if "loop_prime" in cfg:
        exp.loop_prime = build_loop(cfg["loop_prime"], d, "loop_prime")
        if not np.array_equal(exp.loop_prime.base_point, exp.loop.base_point):
            raise ConfigError("loop_prime", "base point differs from loop base point")
    if "error_model" in cfg:
        exp.model = build_error_model(cfg["error_model"], cfg, d)
        if isinstance(exp.model, ParallelogramErrorModel) and exp.loop is not None:
            if not np.array_equal(exp.model.anchor, exp.loop.base_point):
                raise ConfigError("error_model.anchor", "must equal the loop base point")
    if kind == "fidelity" and exp.loop_prime is None:
        if exp.model is None:
            raise ConfigError("loop_prime", "fidelity needs loop_prime or error_model with epsilon")
        _number(_req(cfg, "epsilon", ""), "epsilon")
    if kind == "scaling":
        if exp.model is None:
            raise ConfigError("error_model", "missing required field")
        eps = _epsilons(cfg)
        if eps.size < 4 or eps.max() / eps.min() < 10 * (1 - 1e-12):
            raise ConfigError("epsilons", "need at least 4 values spanning at least one decade")
        if "linear_term_eps" in cfg:
            _number(cfg["linear_term_eps"], "linear_term_eps", positive=True)
    if kind == "taylor":
        for key in ("anchor", "a", "b"):
            _vector(_req(cfg, key, ""), key, d)
        _epsilons(cfg)
    if kind == "rate":
        _vector(_req(cfg, "anchor", ""), "anchor", d)
        planes = cfg.get("planes")
        if planes is not None:
            if not isinstance(planes, list) or not planes:
                raise ConfigError("planes", "expected a non-empty list of [mu, nu]")
            for i, p in enumerate(planes):
                _plane(p, d, _join("planes", i))
        elif d < 2:
            raise ConfigError("connection", "rate needs control_dim >= 2")
        if "area" in cfg:
            _number(cfg["area"], "area", positive=True)
    if kind == "stokes":
        sizes = _req(cfg, "mesh_sizes", "")
        if not isinstance(sizes, list) or not sizes:
            raise ConfigError("mesh_sizes", "expected a non-empty list")
        for i, s in enumerate(sizes):
            _integer(s, _join("mesh_sizes", i), 1)
        if cfg.get("method", "coons") not in ("coons", "cone"):
            raise ConfigError("method", "expected 'coons' or 'cone'")
    if kind == "robustness" and "samples" in cfg:
        _integer(cfg["samples"], "samples", 2)
    if kind == "convergence" and "levels" in cfg:
        _integer(cfg["levels"], "levels", 1)
    return exp


# --- experiments ---------------------------------------------------------------


def _csv_text(header: list[str], rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(x) for x in row])
    return buf.getvalue()


def _fidelity_summary(fv) -> dict:
    return {"f_re": fv.f.real, "f_im": fv.f.imag, "abs_f": fv.magnitude, "self_check": fv.self_check}


def run_experiment(exp: Experiment, threads: int | None) -> tuple[dict, dict[str, str]]:
    """Run a built experiment; returns (results, {filename: csv text})."""
    cfg, fld, ic = exp.config, exp.field, exp.integrator
    d = fld.control_dim
    kind = exp.kind
    if kind == "holonomy":
        g = holonomy(fld, exp.loop, ic)
        return {"holonomy": encode_matrix(g), "unitarity_defect": unitarity_defect(g)}, {}
    if kind == "fidelity":
        loop1 = exp.loop_prime or perturb_loop(exp.loop, exp.model, float(cfg["epsilon"]))
        return _fidelity_summary(fidelity_exact(exp.rho, fld, exp.loop, loop1, ic)), {}
    if kind == "taylor":
        anchor, a, b = (_vector(cfg[k], k, d) for k in ("anchor", "a", "b"))
        eps = _epsilons(cfg)
        rows, resid, checks = [], [], []
        for e in eps:
            terms = fidelity_taylor(exp.rho, fld, anchor, a, b, float(e))
            fv = parallelogram_fidelity(exp.rho, fld, anchor, e * a, e * b, ic)
            r = abs(fv.f - 1 - terms.order2)
            resid.append(r)
            checks.append(fv.self_check)
            rows.append([e, fv.f.real, fv.f.imag, terms.order2.real, terms.order2.imag,
                         terms.order3.real, terms.order3.imag, terms.order4.real, terms.order4.imag, r])
        slope = loglog_slope(eps, resid) if len(eps) >= 2 and min(resid) > 0 else math.nan
        return {"residual2_slope": slope, "max_self_check": max(checks)}, {"taylor.csv": _csv_text(CSV_HEADERS["taylor"], rows)}
    if kind == "rate":
        anchor = _vector(cfg["anchor"], "anchor", d)
        area = cfg.get("area")
        planes = [_plane(p, d, "planes") for p in cfg["planes"]] if "planes" in cfg else [(mu, nu) for mu in range(d) for nu in range(mu)]
        rows, out = [], []
        for mu, nu in planes:
            rep = fidelity_rate(exp.rho, fld, anchor, (mu, nu), area=area, cfg=ic)
            rows.append([mu, nu, rep.rate, rep.error_area, rep.fd_estimate])
            out.append({"plane": [mu, nu], "rate": rep.rate, "fd_estimate": rep.fd_estimate})
        return {"rates": out}, {"rate.csv": _csv_text(CSV_HEADERS["rate"], rows)}
    if kind == "stokes":
        method = cfg.get("method", "coons")
        sizes = [int(s) for s in cfg["mesh_sizes"]]
        res = [stokes_residual(fld, exp.loop, s, ic, method) for s in sizes]
        return {"method": method, "residuals": res}, {"stokes.csv": _csv_text(CSV_HEADERS["stokes"], zip(sizes, res))}
    if kind == "scaling":
        eps = _epsilons(cfg)
        rep = scaling_experiment(exp.rho, fld, exp.loop, exp.model, eps, ic, threads=threads)
        rows = [[e, f.real, f.imag, abs(f), dv] for e, f, dv in zip(rep.epsilons, rep.f, rep.abs_dev)]
        out = {
            "slope_dev": rep.slope_dev,
            "slope_magnitude": rep.slope_magnitude,
            "degenerate_dev": rep.degenerate_dev,
            "degenerate_magnitude": rep.degenerate_magnitude,
        }
        if "linear_term_eps" in cfg:
            lt = linear_term(exp.rho, fld, exp.loop, exp.model, float(cfg["linear_term_eps"]), ic, threads=threads)
            out["linear_term"] = {
                "eps": lt.eps,
                "derivative_re": lt.derivative.real,
                "derivative_im": lt.derivative.imag,
                "quadratic_re": lt.quadratic.real,
                "quadratic_im": lt.quadratic.imag,
                "ratio": lt.ratio,
            }
        return out, {"scaling.csv": _csv_text(CSV_HEADERS["scaling"], rows)}
    if kind == "robustness":
        rep = robustness_scan(exp.rho, fld, exp.loop, int(cfg.get("samples", 64)))
        return {
            "max_curvature_norm": rep.max_curvature_norm,
            "max_trace": rep.max_trace,
            "worst_point": rep.worst_point.tolist(),
            "worst_plane": list(rep.worst_plane),
            "robust": rep.robust,
        }, {}
    if kind == "convergence":
        steps, dist = convergence_study(fld, exp.loop, ic, levels=int(cfg.get("levels", 6)))
        ok = dist > 0
        slope = -loglog_slope(steps[ok], dist[ok]) if ok.sum() >= 2 else math.nan
        return {"order": slope}, {"convergence.csv": _csv_text(CSV_HEADERS["convergence"], zip(steps, dist))}
    raise AssertionError(kind)


def config_digest(cfg: dict) -> str:
    """sha256 of the canonical JSON form, ignoring the output location."""
    body = {k: v for k, v in cfg.items() if k != "output"}
    canon = json.dumps(body, sort_keys=True, separators=(",", ":"), ensure_ascii=True)
    return hashlib.sha256(canon.encode()).hexdigest()


def _jsonable(x):
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if math.isfinite(x) else None
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    return x


def load_config(path: str) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as exc:
        raise ConfigError("", f"cannot read config {path}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError("", f"malformed JSON in {path}: {exc}") from exc


# --- commands ------------------------------------------------------------------


def cmd_validate(args) -> int:
    try:
        build(load_config(args.config))
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if not args.quiet:
        print(f"{args.config}: ok")
    return EXIT_OK


def cmd_run(args) -> int:
    t0 = time.perf_counter()
    try:
        cfg = load_config(args.config)
        exp = build(cfg)
        out_dir = args.output or cfg.get("output")
        if not out_dir:
            raise ConfigError("output", "no output directory (set it in the config or pass --output)")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    threads = args.threads if args.threads is not None else (os.cpu_count() or 1)
    try:
        results, tables = run_experiment(exp, threads)
    except ConvergenceError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (DegeneracyLostError, GaugeAlignmentError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except SelfCheckError as exc:
        print(f"self-check failed: {exc}", file=sys.stderr)
        return EXIT_SELFCHECK
    except (InvalidInputError, HolostabError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    summary = {
        "experiment": exp.kind,
        "input_digest": config_digest(cfg),
        "results": _jsonable(results),
        "wall_time_s": time.perf_counter() - t0,
        "version": __version__,
    }
    out = FsPath(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for name, text in tables.items():
        (out / name).write_text(text, encoding="utf-8")
    (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    if not args.quiet:
        print(f"{exp.kind}: wrote {', '.join(sorted(tables) + ['summary.json'])} to {out}")
    return EXIT_OK


def make_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="holostab", description="Holonomic gate stability experiments.")
    p.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run an experiment config")
    r.add_argument("--config", required=True, help="path to the JSON experiment config")
    r.add_argument("--output", help="output directory (overrides the config)")
    r.add_argument("--quiet", action="store_true", help="suppress progress output")
    r.add_argument("--threads", type=int, default=None, help="max concurrent grid evaluations (default: all cores)")
    r.set_defaults(func=cmd_run)
    v = sub.add_parser("validate", help="check a config without running it")
    v.add_argument("--config", required=True, help="path to the JSON experiment config")
    v.add_argument("--quiet", action="store_true")
    v.set_defaults(func=cmd_validate)
    return p


def main(argv=None) -> int:
    parser = make_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    if getattr(args, "threads", None) is not None and args.threads < 1:
        print("config error: --threads must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
