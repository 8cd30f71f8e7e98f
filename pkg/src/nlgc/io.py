"""Run configuration, field export and run manifests.

Config files are YAML mappings.  Every section is optional except
``body``, ``domain`` and ``kernel``; missing keys take the defaults
listed in :data:`DEFAULTS`.  Floats are written with 17 significant
digits so that exported fields read back bit for bit.
"""

from __future__ import annotations

import copy
import csv
import hashlib
import json
import os
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any

import numpy as np
import yaml

from . import __version__
from .constraint_solver import SolveConfig, SolverError
from .convex_geometry import BodyError, ConvexBody, body_from_config
from .domain_obstacles import Domain, DomainError, ExteriorData, domain_from_config, exterior_from_config
from .nonlocal_operators import ExteriorRule, GridField, KernelError, KernelSpec

__all__ = [
    "ConfigError",
    "ConfigParseError",
    "ConfigValidationError",
    "DEFAULTS",
    "RunConfig",
    "RunManifest",
    "load_config",
    "parse_config",
    "config_hash",
    "export_field",
    "import_field",
    "write_json",
    "sha256_file",
]

FLOAT_FMT = "%.17g"

# Defaults for every tunable; the README documents the same table.
DEFAULTS: dict[str, Any] = {
    "seed": 0,
    "output": "nlgc_out",
    "max_parallel": 1,
    "phi": {"kind": "zero"},
    "kernel": {
        "s": 0.5,
        "s0": None,
        "lambda": 1.0,
        "Lambda": 1.0,
        "kind": "frac_laplacian",
        "R_inf": None,
        "normalization": "one_minus_s",
    },
    "grid": {"h": 1 / 64},
    "solver": {
        "formulation": "double_obstacle",
        "method": "policy_iteration",
        "tol": 1e-8,
        "max_iters": 200,
        "n_boundary": 720,
        "lip_radius": 2,
        "hamiltonian": "lipschitz",
        "n_dirs": 32,
        "backend": None,
        "tol_contact": None,
        "holder_tau": 0.25,
    },
    "geometry": {"n_dirs": 720, "n_samples": 720},
    "obstacle": {"det_floor": 1e-6, "tol_rel": 1e-6},
    "verify": {"battery": "default", "h": 1 / 128, "include_euclidean": True, "equivalence_tol": 5e-2},
    "sweep": {"k_max": 5, "tau": 0.25, "n_samples": 16384, "delta0": None, "eps0": None},
}

_SECTIONS = ("body", "domain", "phi", "kernel", "grid", "solver", "geometry", "obstacle", "verify", "sweep")
_SCALARS = ("seed", "output", "max_parallel")


class ConfigError(ValueError):
    pass


class ConfigParseError(ConfigError):
    """The file is not a readable YAML mapping."""


class ConfigValidationError(ConfigError):
    """A key is missing, unknown or out of range; ``key`` names it."""

    def __init__(self, key: str, msg: str):
        super().__init__(f"{key}: {msg}")
        self.key = key


@dataclass
class RunConfig:
    """Resolved configuration for one CLI run.

    ``raw`` keeps the merged mapping (defaults filled in); its canonical
    JSON form is what :func:`config_hash` digests.
    """

    body: ConvexBody
    domain: Domain
    phi: ExteriorData
    kernel: KernelSpec
    h: float
    solver: dict[str, Any]
    geometry: dict[str, Any]
    obstacle: dict[str, Any]
    verify: dict[str, Any]
    sweep: dict[str, Any]
    output: str
    seed: int
    max_parallel: int
    raw: dict[str, Any] = field(default_factory=dict)

    def solve_config(self, **over) -> SolveConfig:
        s = self.solver
        kw = dict(
            domain=self.domain, body=self.body, phi=self.phi, kernel=self.kernel, h=self.h,
            formulation=s["formulation"], method=s["method"], tol=float(s["tol"]),
            max_iters=int(s["max_iters"]), n_boundary=int(s["n_boundary"]),
            lip_radius=int(s["lip_radius"]), max_parallel=self.max_parallel, backend=s["backend"],
            hamiltonian=s["hamiltonian"], n_dirs=int(s["n_dirs"]),
        )
        kw.update(over)
        try:
            return SolveConfig(**kw)
        except SolverError as exc:
            msg = str(exc)
            key = "grid.h" if msg.startswith("h") else "solver"
            raise ConfigValidationError(key, msg) from None


def _merge(defaults: dict, given: dict, prefix: str) -> dict:
    out = copy.deepcopy(defaults)
    for k, v in given.items():
        if k not in defaults:
            raise ConfigValidationError(f"{prefix}{k}", "unknown key")
        out[k] = v
    return out


def _number(d: dict, key: str, prefix: str, lo=None, hi=None, integer=False, allow_none=False,
            lo_open=False):
    v = d[key]
    name = f"{prefix}{key}"
    if v is None and allow_none:
        return None
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigValidationError(name, f"expected a number, got {v!r}")
    if integer and int(v) != v:
        raise ConfigValidationError(name, f"expected an integer, got {v!r}")
    if not np.isfinite(v):
        raise ConfigValidationError(name, "must be finite")
    if lo is not None and (v < lo or (lo_open and v == lo)):
        raise ConfigValidationError(name, f"must be {'>' if lo_open else '>='} {lo}, got {v}")
    if hi is not None and v > hi:
        raise ConfigValidationError(name, f"must be <= {hi}, got {v}")
    return int(v) if integer else float(v)


def _kernel(d: dict) -> KernelSpec:
    p = "kernel."
    s = _number(d, "s", p, 0.0, 1.0, lo_open=True)
    if s >= 1.0:
        raise ConfigValidationError("kernel.s", f"must be < 1, got {s}")
    s0 = _number(d, "s0", p, 0.0, lo_open=True, allow_none=True)
    if s0 is not None and s0 >= s:
        raise ConfigValidationError("kernel.s0", f"must be < s = {s}, got {s0}")
    lam = _number(d, "lambda", p, 0.0, lo_open=True)
    Lam = _number(d, "Lambda", p, 0.0, lo_open=True)
    if lam > Lam:
        raise ConfigValidationError("kernel.lambda", f"lambda = {lam} exceeds Lambda = {Lam}")
    R = _number(d, "R_inf", p, 0.0, lo_open=True, allow_none=True)
    try:
        return KernelSpec(s=s, s0=s0, lam=lam, Lam=Lam, kind=d["kind"], R_inf=R,
                          normalization=d["normalization"])
    except KernelError as exc:
        msg = str(exc)
        key = "kernel.normalization" if msg.startswith("normalization") else "kernel.kind"
        raise ConfigValidationError(key, msg) from None


def parse_config(data: Any) -> RunConfig:
    """Validate a config mapping and build the problem objects."""
    if not isinstance(data, dict):
        raise ConfigParseError("config must be a mapping at top level")
    for k in data:
        if k not in _SECTIONS and k not in _SCALARS:
            raise ConfigValidationError(str(k), "unknown key")
    for k in ("body", "domain", "kernel"):
        if k not in data:
            raise ConfigValidationError(k, "missing required section")
    raw: dict[str, Any] = {}
    for k in _SCALARS:
        raw[k] = data.get(k, DEFAULTS[k])
    for k in ("body", "domain"):
        if not isinstance(data[k], dict):
            raise ConfigValidationError(k, "expected a mapping")
        raw[k] = copy.deepcopy(data[k])
    for k in ("phi", "kernel", "grid", "solver", "geometry", "obstacle", "verify", "sweep"):
        given = data.get(k) or {}
        if not isinstance(given, dict):
            raise ConfigValidationError(k, "expected a mapping")
        raw[k] = given if k == "phi" and given else _merge(DEFAULTS[k], given, f"{k}.")
    if raw["phi"] == {}:
        raw["phi"] = dict(DEFAULTS["phi"])

    try:
        body = body_from_config(raw["body"])
    except (BodyError, ValueError, TypeError) as exc:
        raise ConfigValidationError("body", str(exc)) from None
    try:
        domain = domain_from_config(raw["domain"])
    except (DomainError, ValueError, TypeError, KeyError) as exc:
        raise ConfigValidationError("domain", str(exc)) from None
    if body.dim != domain.dim:
        raise ConfigValidationError("body", f"dimension {body.dim} differs from domain dimension {domain.dim}")
    try:
        phi = exterior_from_config(raw["phi"], domain.dim)
    except (DomainError, ValueError, TypeError, KeyError) as exc:
        raise ConfigValidationError("phi", str(exc)) from None
    kernel = _kernel(raw["kernel"])
    h = _number(raw["grid"], "h", "grid.", 0.0, lo_open=True)

    sv = raw["solver"]
    _number(sv, "tol", "solver.", 0.0, lo_open=True)
    _number(sv, "max_iters", "solver.", 1, integer=True)
    _number(sv, "n_boundary", "solver.", 16, integer=True)
    _number(sv, "lip_radius", "solver.", 1, integer=True)
    _number(sv, "n_dirs", "solver.", 4, integer=True)
    _number(sv, "tol_contact", "solver.", 0.0, lo_open=True, allow_none=True)
    _number(sv, "holder_tau", "solver.", 0.0, lo_open=True, allow_none=True)
    if sv["backend"] not in (None, "python", "cython"):
        raise ConfigValidationError("solver.backend", f"must be python, cython or null, got {sv['backend']!r}")
    _number(raw["geometry"], "n_dirs", "geometry.", 8, integer=True)
    _number(raw["geometry"], "n_samples", "geometry.", 16, integer=True)
    _number(raw["obstacle"], "det_floor", "obstacle.", 0.0)
    _number(raw["obstacle"], "tol_rel", "obstacle.", 0.0, lo_open=True)
    if raw["verify"]["battery"] not in ("default", "config"):
        raise ConfigValidationError("verify.battery", "must be 'default' or 'config'")
    _number(raw["verify"], "h", "verify.", 0.0, lo_open=True)
    _number(raw["verify"], "equivalence_tol", "verify.", 0.0, lo_open=True)
    _number(raw["sweep"], "k_max", "sweep.", 1, integer=True)
    _number(raw["sweep"], "tau", "sweep.", 0.0, lo_open=True)
    _number(raw["sweep"], "n_samples", "sweep.", 64, integer=True)
    seed = _number(raw, "seed", "", 0, integer=True)
    mp = _number(raw, "max_parallel", "", 1, integer=True)

    rc = RunConfig(body, domain, phi, kernel, h, sv, raw["geometry"], raw["obstacle"], raw["verify"],
                   raw["sweep"], str(raw["output"]), seed, mp, raw)
    rc.solve_config(check_exterior=False)  # surfaces grid and solver errors early
    return rc


def load_config(path: str | os.PathLike) -> RunConfig:
    """Read and validate a YAML config file."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigParseError(f"{path}: {exc.strerror or exc}") from None
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigParseError(f"{path}: {exc}") from None
    return parse_config(data)


def _jsonable(o):
    if isinstance(o, dict):
        return {str(k): _jsonable(v) for k, v in o.items()}
    if isinstance(o, (list, tuple)):
        return [_jsonable(v) for v in o]
    if isinstance(o, np.ndarray):
        return _jsonable(o.tolist())
    if isinstance(o, np.bool_):
        return bool(o)
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    return o


def canonical_json(obj) -> str:
    return json.dumps(_jsonable(obj), sort_keys=True, separators=(",", ":"))


def config_hash(rc: RunConfig | dict) -> str:
    raw = rc.raw if isinstance(rc, RunConfig) else rc
    return hashlib.sha256(canonical_json(raw).encode()).hexdigest()


def write_json(obj, path: str | os.PathLike) -> Path:
    """Write sorted, indented JSON; Python's float repr round-trips exactly."""
    p = Path(path)
    try:
        p.write_text(json.dumps(_jsonable(obj), sort_keys=True, indent=2) + "\n")
    except OSError as exc:
        raise OSError(f"{p}: {exc.strerror or exc}") from None
    return p


def sha256_file(path: str | os.PathLike) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


# ---------------------------------------------------------------------------
# fields


def _axis_names(dim: int) -> list[str]:
    return ["x", "y"][:dim]


def export_field(u: GridField, path: str | os.PathLike, format: str | None = None,
                 err: np.ndarray | None = None, extra: dict[str, np.ndarray] | None = None) -> Path:
    """Write a grid field as CSV or JSON.

    CSV has a header, then one row per node with coordinates, value and
    any ``err``/``extra`` columns, in C order of the node indices.  JSON
    stores origin, spacing, shape and the flattened values in the same
    order.
    """
    p = Path(path)
    fmt = (format or p.suffix.lstrip(".")).lower()
    vals = np.asarray(u.values, dtype=float)
    if not np.all(np.isfinite(vals)):
        raise ValueError(f"{p}: field has non-finite values")
    cols: dict[str, np.ndarray] = {}
    if err is not None:
        cols["err"] = np.asarray(err, dtype=float).reshape(vals.shape)
    for k, v in (extra or {}).items():
        cols[k] = np.asarray(v).reshape(vals.shape)
    try:
        if fmt == "csv":
            X = u.coords().reshape(-1, u.dim)
            with open(p, "w", newline="") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(_axis_names(u.dim) + ["value"] + list(cols))
                flat = [c.ravel() for c in cols.values()]
                for i, (xi, vi) in enumerate(zip(X, vals.ravel())):
                    row = [FLOAT_FMT % c for c in xi] + [FLOAT_FMT % vi]
                    row += [_fmt(c[i]) for c in flat]
                    w.writerow(row)
        elif fmt == "json":
            obj = {
                "origin": [float(o) for o in u.origin],
                "h": float(u.h),
                "shape": list(vals.shape),
                "order": "C",
                "values": vals.ravel().tolist(),
            }
            for k, c in cols.items():
                obj[k] = c.ravel().tolist()
            write_json(obj, p)
        else:
            raise ValueError(f"{p}: unknown format {fmt!r}")
    except OSError as exc:
        raise OSError(f"{p}: {exc.strerror or exc}") from None
    return p


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return FLOAT_FMT % v


def _recover_step(axes: list[np.ndarray]) -> float:
    """Spacing that reproduces ``a[0] + h * i`` bit for bit on every axis, if any.

    Each coordinate is monotone in ``h``, so the admissible spacings form an
    interval of doubles; it is located by bisection on the bit patterns.
    """
    axes = [a for a in axes if len(a) > 1]
    if not axes:
        return 1.0
    o = np.concatenate([np.full(len(a) - 1, a[0]) for a in axes])
    i = np.concatenate([np.arange(1.0, len(a)) for a in axes])
    c = np.concatenate([a[1:] for a in axes])

    def first(strict: bool) -> np.ndarray:
        # smallest positive double h with o + h*i >= c (or > c)
        lo = np.zeros(len(c), dtype=np.int64)
        hi = np.full(len(c), np.array(np.inf).view(np.int64))
        while np.any(lo < hi):
            mid = (lo + hi) // 2
            g = o + mid.view(np.float64) * i
            ok = g > c if strict else g >= c
            hi, lo = np.where(ok, mid, hi), np.where(ok, lo, mid + 1)
        return lo

    a = max(axes, key=len)
    guess = np.array((a[-1] - a[0]) / (len(a) - 1)).view(np.int64)
    lo, hi = first(False).max(), first(True).min()
    if lo < hi:
        return float(np.clip(guess, lo, hi - 1).view(np.float64))
    return float(guess.view(np.float64))


def import_field(path: str | os.PathLike, format: str | None = None,
                 exterior: ExteriorRule | None = None) -> GridField:
    """Read a field written by :func:`export_field`."""
    p = Path(path)
    fmt = (format or p.suffix.lstrip(".")).lower()
    try:
        if fmt == "json":
            obj = json.loads(p.read_text())
            origin = np.asarray(obj["origin"], dtype=float)
            vals = np.asarray(obj["values"], dtype=float).reshape(obj["shape"])
            h = float(obj["h"])
        elif fmt == "csv":
            with open(p, newline="") as fh:
                rows = list(csv.reader(fh))
            head = rows[0]
            dim = head.index("value")
            data = np.array([[float(v) for v in r[:dim + 1]] for r in rows[1:]])
            X, v = data[:, :dim], data[:, dim]
            axes = [np.unique(X[:, k]) for k in range(dim)]
            shape = tuple(len(a) for a in axes)
            origin = np.array([a[0] for a in axes])
            h = _recover_step(axes)
            vals = v.reshape(shape)
        else:
            raise ValueError(f"{p}: unknown format {fmt!r}")
    except OSError as exc:
        raise OSError(f"{p}: {exc.strerror or exc}") from None
    ext = exterior or ExteriorRule.zero(len(origin))
    return GridField(origin, h, vals, ext)


# ---------------------------------------------------------------------------
# manifest


@dataclass
class RunManifest:
    """Record of one run: config digest, version, times and artifacts."""

    config_hash: str
    subcommand: str
    tool_version: str = __version__
    started: str = ""
    finished: str = ""
    artifacts: list[dict[str, Any]] = field(default_factory=list)
    exit_code: int = 0

    @staticmethod
    def now() -> str:
        return datetime.now(timezone.utc).isoformat(timespec="seconds")

    def add(self, path: str | os.PathLike, root: str | os.PathLike) -> None:
        p = Path(path)
        self.artifacts.append({"path": str(p.relative_to(root)), "sha256": sha256_file(p),
                               "bytes": p.stat().st_size})

    def to_json(self) -> dict[str, Any]:
        return {
            "config_hash": self.config_hash,
            "subcommand": self.subcommand,
            "tool_version": self.tool_version,
            "started": self.started,
            "finished": self.finished,
            "exit_code": self.exit_code,
            "artifacts": sorted(self.artifacts, key=lambda a: a["path"]),
        }
