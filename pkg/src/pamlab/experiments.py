"""Config-driven experiment runs with CSV/JSON output and a manifest.

Config files are flat ``key = value`` lines (``#`` starts a comment).  The
cumulant model is given by ``model.<key>`` entries and the diffusion speed by
``kappa.<key>`` entries, e.g.::

    kind = solve-discrete
    variant = db
    gamma = 0
    rho = 0.5, 1, 2
    R = 10
    seed = 0

The comma-separated key of each kind is its sweep axis.  Every default is
written into the manifest so that a run can be repeated from it alone.
"""
from __future__ import annotations

import csv
import hashlib
import io
import json
import platform
import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np
import scipy

from . import __version__
from .continuous.grid import ContinuousKind, ContinuousProblem, GridOptions, solve_grid
from .continuous.legendre import legendre_bridge
from .continuous.transfer import continuous_reference, scaling_transfer
from .cumulant import format_model, model_from_mapping
from .discrete import DiscreteProblem, Kind, SolverOptions, solve
from .feynman_kac import annealed_moment_mc, excursion_proposal, phase_trend_check
from .lattice import Boundary
from .scales import DiffusionFunction, as_fraction, classify_phase, solve_alpha

__all__ = [
    "KINDS",
    "ConfigError",
    "ExperimentConfig",
    "RunResult",
    "parse_config",
    "load_config",
    "run",
    "convergence_table",
]

KINDS = (
    "solve-discrete",
    "solve-continuous",
    "scaling-transfer",
    "alpha",
    "classify",
    "fk-moment",
    "phase-trend",
    "legendre-bridge",
)

REQUIRED = object()


class ConfigError(ValueError):
    """All validation problems of a config, one message per field."""

    def __init__(self, errors: List[str]):
        super().__init__("; ".join(errors))
        self.errors = list(errors)


# key -> (parser, default); parsers raise ValueError with a short reason
def _float(v):
    return float(v)


def _int(v):
    f = float(v)
    if f != int(f):
        raise ValueError("must be an integer")
    return int(f)


def _floats(v):
    out = [float(x) for x in str(v).split(",") if x.strip()]
    if not out:
        raise ValueError("must list at least one number")
    return out


def _choice(*opts):
    def parse(v):
        if v not in opts:
            raise ValueError(f"must be one of {', '.join(opts)}")
        return v

    return parse


def _opt_float(v):
    return None if v in (None, "", "none") else float(v)


COMMON = {"seed": (_int, 0), "d": (_int, 1)}

SCHEMA: Dict[str, Dict[str, Tuple[Callable, object]]] = {
    "solve-discrete": {
        "variant": (_choice("db", "de"), "db"),
        "gamma": (_opt_float, None),
        "rho": (_floats, REQUIRED),
        "R": (_int, 10),
        "boundary": (_choice("free", "periodic"), "free"),
        "restarts": (_int, 16),
        "grad_tol": (_float, 1e-9),
    },
    "solve-continuous": {
        "variant": (_choice("b", "ab", "rwrs", "gks"), "ab"),
        "gamma": (_opt_float, None),
        "rho": (_floats, [1.0]),
        "theta": (_floats, [1.0]),
        "u": (_floats, [0.5]),
        "R": (_float, 12.0),
        "mesh": (_float, 0.02),
        "richardson": (_choice("true", "false"), "true"),
    },
    "scaling-transfer": {
        "gamma": (_float, REQUIRED),
        "rho": (_float, 1.0),
        "kappas": (_floats, REQUIRED),
        "R0": (_float, 6.0),
    },
    "alpha": {"t": (_floats, REQUIRED), "gamma": (_opt_float, None)},
    "classify": {"gamma": (_opt_float, None)},
    "fk-moment": {
        "t": (_floats, REQUIRED),
        "n_paths": (_int, 20000),
        "tilt": (_opt_float, None),
        "away_tilt": (_float, 0.0),
    },
    "phase-trend": {
        "phase": (_int, REQUIRED),
        "t": (_floats, REQUIRED),
        "n_paths": (_int, 20000),
        "chi": (_opt_float, None),
    },
    "legendre-bridge": {"beta": (_floats, REQUIRED), "R": (_float, 12.0), "mesh": (_float, 0.02)},
}

# kinds that read model.* / kappa.* entries
NEEDS_MODEL = {"fk-moment", "phase-trend", "legendre-bridge", "alpha", "classify"}
NEEDS_KAPPA = {"alpha", "classify", "fk-moment", "phase-trend"}
MODEL_OPTIONAL = {"alpha", "classify"}  # gamma may stand in for the model


@dataclass
class ExperimentConfig:
    kind: str
    params: Dict[str, object]
    model: Dict[str, str] = field(default_factory=dict)
    kappa: Dict[str, str] = field(default_factory=dict)
    base_dir: Optional[Path] = None  # resolves relative model.file paths

    def resolved(self) -> dict:
        """Flat mapping with every default filled in."""
        out = {"kind": self.kind}
        out.update({k: v for k, v in self.params.items()})
        out.update({f"model.{k}": v for k, v in self.model.items()})
        out.update({f"kappa.{k}": v for k, v in self.kappa.items()})
        return out

    def config_hash(self) -> str:
        return hashlib.sha256(json.dumps(self.resolved(), sort_keys=True).encode()).hexdigest()


def _raw_pairs(text: str) -> Dict[str, str]:
    raw = {}
    for n, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError([f"line {n}: expected key = value"])
        k, v = line.split("=", 1)
        raw[k.strip()] = v.strip()
    return raw


def parse_config(text: str, overrides: Optional[Dict[str, str]] = None, base_dir: Optional[Path] = None) -> ExperimentConfig:
    """Parse and validate; every problem is reported in one :class:`ConfigError`."""
    raw = _raw_pairs(text)
    raw.update(overrides or {})
    errors: List[str] = []
    kind = raw.pop("kind", None)
    if kind not in KINDS:
        raise ConfigError([f"kind: must be one of {', '.join(KINDS)} (got {kind!r})"])
    model = {k[6:]: raw.pop(k) for k in list(raw) if k.startswith("model.")}
    kappa = {k[6:]: raw.pop(k) for k in list(raw) if k.startswith("kappa.")}
    schema = {**COMMON, **SCHEMA[kind]}
    params: Dict[str, object] = {}
    for key in raw:
        if key not in schema:
            errors.append(f"{key}: unknown key for kind {kind}")
    for key, (parse, default) in schema.items():
        if key in raw:
            try:
                params[key] = parse(raw[key])
            except (ValueError, TypeError) as exc:
                errors.append(f"{key}: {exc}")
        elif default is REQUIRED:
            errors.append(f"{key}: required")
        else:
            params[key] = default
    cfg = ExperimentConfig(kind, params, model, kappa, base_dir)
    errors.extend(_check_semantics(cfg, base_dir))
    if errors:
        raise ConfigError(errors)
    return cfg


def load_config(path, overrides: Optional[Dict[str, str]] = None) -> ExperimentConfig:
    path = Path(path)
    return parse_config(path.read_text(), overrides, base_dir=path.parent)


def _build_model(cfg: ExperimentConfig, base_dir=None):
    return model_from_mapping(cfg.model, base_dir=base_dir or cfg.base_dir)


def _build_kappa(cfg: ExperimentConfig) -> DiffusionFunction:
    return DiffusionFunction(float(cfg.kappa.get("c", 1.0)), as_fraction(cfg.kappa.get("beta", "0")))


def _check_semantics(cfg: ExperimentConfig, base_dir) -> List[str]:
    """Module preconditions, checked before any compute starts."""
    errs: List[str] = []
    p = cfg.params
    kind = cfg.kind
    if "d" in p and not (isinstance(p["d"], int) and p["d"] >= 1):
        errs.append("d: must be a positive integer")
    for key in ("rho", "theta", "u", "kappas", "t", "beta"):
        vals = p.get(key)
        if isinstance(vals, list) and any(not v > 0 for v in vals):
            errs.append(f"{key}: every value must be positive")
    if isinstance(p.get("rho"), float) and not p["rho"] > 0:
        errs.append("rho: must be positive")
    if isinstance(p.get("gamma"), float) and p["gamma"] < 0:
        errs.append("gamma: must be non-negative")
    if cfg.model:
        try:
            _build_model(cfg, base_dir)
        except (ValueError, KeyError, OSError) as exc:
            errs.append(f"model: {exc}")
    elif kind in NEEDS_MODEL and not (kind in MODEL_OPTIONAL and p.get("gamma") is not None):
        errs.append("model: model.family is required for this kind" + (" (or give gamma)" if kind in MODEL_OPTIONAL else ""))
    if kind in NEEDS_KAPPA:
        try:
            _build_kappa(cfg)
        except (ValueError, ZeroDivisionError) as exc:
            errs.append(f"kappa: {exc}")
    if errs:
        return errs
    # per-kind constructions
    try:
        if kind == "solve-discrete":
            for rho in p["rho"]:
                with warnings.catch_warnings():
                    warnings.simplefilter("ignore")
                    DiscreteProblem(Kind(p["variant"]), rho, p["d"], p["R"], Boundary(p["boundary"]), p["gamma"])
        elif kind == "solve-continuous":
            _continuous_problem(cfg, 0, None)
        elif kind == "scaling-transfer":
            if not 0 <= p["gamma"] < 1 + 2 / p["d"]:
                errs.append("gamma: must lie in [0, 1 + 2/d)")
            if any(k < 10 for k in p["kappas"]):
                errs.append("kappas: every value must be >= 10")
        elif kind == "phase-trend":
            if p["phase"] not in (1, 2, 3):
                errs.append("phase: must be 1, 2 or 3")
            elif p["phase"] != 1 and p["chi"] is None:
                errs.append("chi: required for phases 2 and 3")
        elif kind == "fk-moment":
            if p["n_paths"] < 100:
                errs.append("n_paths: must be at least 100")
        elif kind == "legendre-bridge":
            ContinuousProblem(ContinuousKind.RWRS, p["d"], p["R"], p["mesh"], model=_build_model(cfg, base_dir), theta=1.0)
    except ValueError as exc:
        errs.append(f"{_field_of(exc)}: {exc}")
    except KeyError:
        pass  # a field that failed to parse is already reported
    return errs


def _field_of(exc: Exception) -> str:
    msg = str(exc)
    for key in ("rho", "gamma", "theta", "mesh", "R", "u", "d", "model"):
        if msg.startswith(key) or f" {key} " in f" {msg} ":
            return key
    return "config"


def _continuous_problem(cfg: ExperimentConfig, i: int, model):
    p = cfg.params
    kind = ContinuousKind(p["variant"])
    if kind in (ContinuousKind.RWRS, ContinuousKind.GKS) and model is None:
        model = _build_model(cfg)
    axis = _sweep_key(cfg)
    val = p[axis][i]
    kw = {axis: val}
    if kind is ContinuousKind.B:
        kw["gamma"] = p["gamma"]
    return ContinuousProblem(kind, p["d"], p["R"], p["mesh"], model=model, **kw)


def _sweep_key(cfg: ExperimentConfig) -> Optional[str]:
    kind = cfg.kind
    if kind == "solve-discrete":
        return "rho"
    if kind == "solve-continuous":
        return {"b": "rho", "ab": "rho", "rwrs": "theta", "gks": "u"}[cfg.params["variant"]]
    if kind in ("alpha", "fk-moment"):
        return "t"
    if kind == "legendre-bridge":
        return "beta"
    return None


# ---------------------------------------------------------------------------
# running

COLUMN_NOTES = {
    "rho": "rho [dimensionless]: penalty weight",
    "value": "value [dimensionless]: minimum of S(p) + penalty over probability measures p",
    "support_size": "support_size [sites]: masses above 1e-10",
    "converged": "converged: gradient-norm certificate below tolerance",
    "grad_norm": "grad_norm: Riemannian gradient norm at the returned minimiser",
    "theta": "theta [dimensionless]: weight of -int H(g^2)",
    "u": "u [potential units]: level in the GKS dual",
    "raw_value": "raw_value: grid value at the base mesh before extrapolation",
    "kappa": "kappa [1/time]: diffusion constant",
    "raw_discrete": "raw_discrete: discrete constant at rho/kappa",
    "transformed": "transformed: discrete constant mapped to the continuum scale",
    "continuous_ref": "continuous_ref: closed-form or grid continuum constant",
    "rel_error": "rel_error: |transformed - continuous_ref| / |continuous_ref|",
    "t": "t [time]: horizon",
    "alpha": "alpha [sites]: root of hscale(t/alpha^d) = t kappa(t)/alpha^(d+2)",
    "residual": "residual: relative residual of that equation",
    "log_estimate": "log_estimate: log E_walk exp(sum_z H(l_t(z)))",
    "ci": "ci [log units]: 99.9% half-width from 16 batch means",
    "ess": "ess [paths]: effective sample size",
    "n_paths": "n_paths: sampled walks",
    "tilt": "tilt: log factor by which jumps out of the origin are thinned",
    "away_tilt": "away_tilt: log factor by which jumps elsewhere are sped up",
    "seed": "seed: RNG seed of this row",
    "ratio": "ratio: normalised log-moment (see kind)",
    "ratio_ci": "ratio_ci: half-width of ratio",
    "target": "target: limit the ratio should approach",
    "gap": "gap: |ratio - target|",
    "beta": "beta [dimensionless]: Legendre variable",
    "left": "left: sup_u (beta u - chi_gks(u)) on the grid",
    "right": "right: -beta^(-2/d) chi_rwrs(beta^(1+2/d)) on the matched grid",
    "rel_gap": "rel_gap: |left - right| / |right|",
    "u_star": "u_star: maximising level",
    "error": "error: message when this sweep point failed",
}


@dataclass
class RunResult:
    status: int
    result_path: Path
    manifest_path: Path
    rows: List[dict]


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, (np.floating,)):
        return repr(float(v))
    return "" if v is None else str(v)


def _write_csv(path: Path, rows: List[dict], columns: List[str], title: str) -> None:
    buf = io.StringIO()
    buf.write(f"# {title}\n")
    for c in columns:
        buf.write(f"# {COLUMN_NOTES.get(c, c)}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_fmt(r.get(c)) for c in columns])
    path.write_text(buf.getvalue())


def _map(fn, items, threads):
    """Apply ``fn`` to each item; failures become ``{"error": ...}`` rows in order."""

    def safe(arg):
        i, x = arg
        try:
            return fn(i, x)
        except Exception as exc:  # recorded in-row, sweep continues
            return {"error": f"{type(exc).__name__}: {exc}"}

    items = list(enumerate(items))
    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            return list(pool.map(safe, items))
    return [safe(a) for a in items]


def _run_solve_discrete(cfg, threads):
    p = cfg.params
    opts = SolverOptions(restarts=p["restarts"], grad_tol=p["grad_tol"], seed=p["seed"])

    def point(i, rho):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            prob = DiscreteProblem(Kind(p["variant"]), rho, p["d"], p["R"], Boundary(p["boundary"]), p["gamma"])
        sol = solve(prob, opts)
        return {"rho": rho, "value": sol.value, "support_size": sol.support_size, "converged": sol.converged, "grad_norm": sol.grad_norm}

    rows = _map(point, p["rho"], threads)
    for r, rho in zip(rows, p["rho"]):
        r.setdefault("rho", rho)
    return rows, ["rho", "value", "support_size", "converged", "grad_norm", "error"], "discrete variational constant"


def _run_solve_continuous(cfg, threads):
    p = cfg.params
    axis = _sweep_key(cfg)
    model = _build_model(cfg) if p["variant"] in ("rwrs", "gks") else None
    opts = GridOptions(seed=p["seed"], richardson=p["richardson"] == "true")

    def point(i, _):
        sol = solve_grid(_continuous_problem(cfg, i, model), opts)
        return {axis: p[axis][i], "value": sol.value, "raw_value": sol.raw_value, "converged": sol.converged, "grad_norm": sol.grad_norm}

    rows = _map(point, p[axis], threads)
    for r, v in zip(rows, p[axis]):
        r.setdefault(axis, v)
    return rows, [axis, "value", "raw_value", "converged", "grad_norm", "error"], "continuum variational constant on a grid"


def convergence_table(cfg: ExperimentConfig, threads: int = 1) -> List[dict]:
    """Rows ``kappa, raw_discrete, transformed, continuous_ref, rel_error`` for a scaling-transfer config."""
    p = cfg.params
    rows = scaling_transfer(p["gamma"], p["rho"], p["d"], p["kappas"], R0=p["R0"], threads=threads)
    ref = continuous_reference(p["gamma"], p["rho"], p["d"])
    return [
        {
            "kappa": r.kappa,
            "raw_discrete": r.raw_discrete,
            "transformed": r.transformed,
            "continuous_ref": ref,
            "rel_error": abs(r.transformed - ref) / abs(ref),
        }
        for r in rows
    ]


def _run_scaling(cfg, threads):
    try:
        rows = convergence_table(cfg, threads)
    except Exception as exc:
        rows = [{"error": f"{type(exc).__name__}: {exc}"}]
    return rows, ["kappa", "raw_discrete", "transformed", "continuous_ref", "rel_error", "error"], "discrete-to-continuum scaling"


def _hscale_and_gamma(cfg):
    if cfg.model:
        m = _build_model(cfg)
        return m.hscale, m.gamma, m
    g = cfg.params["gamma"]
    return (lambda t: t**g), g, g


def _run_alpha(cfg, threads):
    p = cfg.params
    hscale, _, _ = _hscale_and_gamma(cfg)
    kappa = _build_kappa(cfg)

    def point(i, t):
        a = solve_alpha(t, kappa, hscale, p["d"])
        rhs = t * float(kappa(t)) / a ** (p["d"] + 2)
        return {"t": t, "alpha": a, "residual": abs(hscale(t / a ** p["d"]) - rhs) / rhs}

    rows = _map(point, p["t"], threads)
    for r, t in zip(rows, p["t"]):
        r.setdefault("t", t)
    return rows, ["t", "alpha", "residual", "error"], "island scale alpha_t"


def _run_fk(cfg, threads):
    p = cfg.params
    model = _build_model(cfg)
    kappa = _build_kappa(cfg)

    def point(i, t):
        k = float(kappa(t))
        tilt = p["tilt"]
        away = p["away_tilt"]
        if tilt is None:
            tilt, away = excursion_proposal(t, k, model, p["d"]) if away == 0 else (0.0, away)
        est = annealed_moment_mc(t, k, model, p["n_paths"], p["seed"] + i, tilt, p["d"], 1, away)
        return est.to_dict()

    rows = _map(point, p["t"], threads)
    for r, t in zip(rows, p["t"]):
        r.setdefault("t", t)
    return rows, ["t", "log_estimate", "ci", "ess", "n_paths", "tilt", "away_tilt", "seed", "error"], "annealed moment"


def _run_trend(cfg, threads):
    p = cfg.params
    try:
        rows = phase_trend_check(
            p["phase"], _build_model(cfg), _build_kappa(cfg), p["d"], p["t"], p["n_paths"], p["seed"], p["chi"], threads=threads
        )
    except Exception as exc:
        rows = [{"error": f"{type(exc).__name__}: {exc}"}]
    return rows, ["t", "log_estimate", "ci", "ess", "ratio", "ratio_ci", "target", "gap", "error"], "phase trend"


def _run_bridge(cfg, threads):
    p = cfg.params
    model = _build_model(cfg)

    def point(i, beta):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            r = legendre_bridge(model, beta, p["d"], p["R"], p["mesh"])
        return {"beta": beta, "left": r.left, "right": r.right, "rel_gap": r.rel_gap, "u_star": r.u_star}

    rows = _map(point, p["beta"], threads)
    for r, b in zip(rows, p["beta"]):
        r.setdefault("beta", b)
    return rows, ["beta", "left", "right", "rel_gap", "u_star", "error"], "Legendre duality check"


RUNNERS = {
    "solve-discrete": _run_solve_discrete,
    "solve-continuous": _run_solve_continuous,
    "scaling-transfer": _run_scaling,
    "alpha": _run_alpha,
    "fk-moment": _run_fk,
    "phase-trend": _run_trend,
    "legendre-bridge": _run_bridge,
}


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def run(cfg: ExperimentConfig, out_dir, threads: int = 1) -> RunResult:
    """Execute ``cfg`` and write ``result.csv`` (``result.json`` for classify) plus ``manifest.json``.

    Status 0 when every sweep point succeeded, 3 when some rows carry an error.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    start = time.perf_counter()
    if cfg.kind == "classify":
        _, g, m = _hscale_and_gamma(cfg)
        report = classify_phase(_build_kappa(cfg), m, cfg.params["d"])
        result = out / "result.json"
        result.write_text(report.to_json() + "\n")
        rows = [report.to_dict()]
    else:
        rows, columns, title = RUNNERS[cfg.kind](cfg, threads)
        result = out / "result.csv"
        _write_csv(result, rows, columns, title)
    wall = time.perf_counter() - start
    status = 3 if any(r.get("error") for r in rows) else 0
    manifest = {
        "config": cfg.resolved(),
        "config_hash": cfg.config_hash(),
        "model": format_model(_build_model(cfg)) if cfg.model else None,
        "seed": cfg.params.get("seed"),
        "threads": threads,
        "versions": {"pamlab": __version__, "numpy": np.__version__, "scipy": scipy.__version__, "python": platform.python_version()},
        "wall_time_s": wall,
        "result": result.name,
        "result_sha256": _sha256(result),
        "status": status,
    }
    mpath = out / "manifest.json"
    mpath.write_text(json.dumps(manifest, indent=2, sort_keys=True, default=str) + "\n")
    return RunResult(status, result, mpath, rows)
