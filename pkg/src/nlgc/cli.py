"""Command line entry point.

``nlgc <subcommand> --config <path> [--out <dir>] [--max-parallel <n>]``

Exit status: 0 when every requested check passes, 2 for unreadable
configs or bad arguments, 3 for invalid configs, 4 when a solve does
not converge and 5 when a check fails.
"""

from __future__ import annotations

import argparse
import csv
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .constraint_solver import (
    Discretization,
    NonConvergence,
    SolverError,
    certify_solution,
    smoothing_sweep,
    solve,
)
from .convex_geometry import diameter, gauge_eval, hausdorff, polar, resolution, support_eval, validate_body
from .diagnostics import (
    Instance,
    complementarity_check,
    decompose,
    default_battery,
    lemma_suite,
    sweep_checks,
)
from .domain_obstacles import ridge_scan
from .io import (
    FLOAT_FMT,
    ConfigParseError,
    ConfigValidationError,
    RunConfig,
    RunManifest,
    config_hash,
    export_field,
    load_config,
    write_json,
)
from .nonlocal_operators import GridField

log = logging.getLogger("nlgc")

EXIT_OK, EXIT_PARSE, EXIT_INVALID, EXIT_NONCONV, EXIT_CHECK = 0, 2, 3, 4, 5


class _Run:
    """Output directory plus the manifest being assembled."""

    def __init__(self, out: Path, rc: RunConfig, sub: str):
        self.out = out
        self.rc = rc
        self.manifest = RunManifest(config_hash(rc), sub, started=RunManifest.now())
        out.mkdir(parents=True, exist_ok=True)

    def emit(self, path: Path) -> Path:
        self.manifest.add(path, self.out)
        return path

    def field(self, u: GridField, name: str, **kw) -> None:
        self.emit(export_field(u, self.out / f"{name}.csv", "csv", **kw))
        self.emit(export_field(u, self.out / f"{name}.json", "json", **kw))

    def json(self, obj, name: str) -> None:
        self.emit(write_json(obj, self.out / name))

    def finish(self, code: int) -> int:
        self.manifest.exit_code = code
        self.manifest.finished = RunManifest.now()
        write_json(self.manifest.to_json(), self.out / "manifest.json")
        return code


def _write_table(path: Path, header: list[str], cols: list[np.ndarray]) -> Path:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in zip(*cols):
            w.writerow([FLOAT_FMT % v for v in row])
    return path


# ---------------------------------------------------------------------------
# subcommands


def cmd_geometry(run: _Run) -> int:
    rc = run.rc
    K = rc.body
    Kp = polar(K)
    if K.dim == 1:
        u = np.array([-1.0, 1.0])
        cols = [u]
        head = ["u"]
    else:
        n = int(rc.geometry["n_dirs"])
        th = 2 * np.pi * np.arange(n) / n
        u = np.column_stack([np.cos(th), np.sin(th)])
        cols = [th, u[:, 0], u[:, 1]]
        head = ["theta", "ux", "uy"]
    g, hs = gauge_eval(K, u), support_eval(K, u)
    run.emit(_write_table(run.out / "gauge_table.csv", head + ["gauge", "support"], cols + [g, hs]))
    gp, hp = gauge_eval(Kp, u), support_eval(Kp, u)
    run.emit(_write_table(run.out / "polar_table.csv", head + ["gauge", "support"], cols + [gp, hp]))
    rep = validate_body(K)
    dist = hausdorff(polar(Kp), K)
    bound = 2 * resolution(K) * diameter(K)
    checks = [
        {"check_id": "geometry/valid", "pass": bool(rep.ok), "margin": 0.0, "messages": rep.messages},
        {"check_id": "geometry/polar_support", "pass": bool(np.allclose(gp, hs, rtol=1e-6, atol=1e-9)),
         "margin": float(np.abs(gp - hs).max())},
        {"check_id": "geometry/bipolar", "pass": bool(dist <= max(bound, 1e-10)), "margin": bound - dist},
    ]
    run.json({"body": rep.__dict__, "hausdorff_bipolar": dist, "checks": checks}, "geometry.json")
    return EXIT_OK if all(c["pass"] for c in checks) else EXIT_CHECK


def cmd_obstacle(run: _Run) -> int:
    rc = run.rc
    cfg = rc.solve_config(check_exterior=False)
    disc = Discretization(cfg)
    run.field(disc.field(disc.rho), "rho")
    run.field(disc.field(-disc.rho_bar), "lower_obstacle")
    ob = rc.obstacle
    rs = ridge_scan(rc.domain, rc.body, rc.phi, disc.x, det_floor=float(ob["det_floor"]),
                    tol_rel=float(ob["tol_rel"]), n_boundary=int(rc.solver["n_boundary"]))
    code = np.zeros(disc.shape)
    code[disc.inside] = rs.code
    run.field(GridField(disc.origin.copy(), disc.h, code, disc.rule), "ridge")
    gap = float((disc.rho + disc.rho_bar).min())
    run.json({
        "n_nodes": int(disc.N),
        "ridge_counts": {"multi_closest": int((rs.code == 1).sum()), "degenerate_Q": int((rs.code == 2).sum())},
        "ridge_points": rs.points.tolist(),
        "ridge_min_dist": rs.min_dist,
        "obstacle_gap_min": gap,
        "checks": [{"check_id": "obstacle/ordering", "pass": gap >= -1e-12, "margin": gap}],
    }, "obstacle.json")
    return EXIT_OK if gap >= -1e-12 else EXIT_CHECK


def cmd_solve(run: _Run) -> int:
    rc = run.rc
    cfg = rc.solve_config()
    tau = rc.solver["holder_tau"]
    try:
        res = solve(cfg, holder_tau=tau)
        code = EXIT_OK
    except NonConvergence as exc:
        log.error("%s", exc)
        res, code = exc.result, EXIT_NONCONV
    tc = rc.solver["tol_contact"]
    dec = decompose(res, tol_contact=tc)
    modes = np.zeros(res.disc.shape)
    modes[res.disc.inside] = np.where(dec.plus, 1, np.where(dec.minus, 2, 0))
    run.field(res.field, "u", extra={"mode": modes})
    recs = certify_solution(res, tol=None)
    recs.append(complementarity_check(res, tc))
    rep = res.report.to_json()
    rep["coincidence"] = dec.counts()
    rep["free_boundary_nodes"] = int(len(dec.free_boundary))
    rep["checks"] = [r.to_json() for r in recs]
    run.json(rep, "report.json")
    if code == EXIT_OK and not all(r.passed for r in recs):
        code = EXIT_CHECK
    return code


def cmd_verify(run: _Run) -> int:
    rc = run.rc
    v = rc.verify
    if v["battery"] == "default":
        insts = default_battery(float(v["h"]))
    else:
        insts = [Instance("config", rc.solve_config())]
    rep = lemma_suite(insts, include_euclidean=bool(v["include_euclidean"]))
    run.json(rep.to_json(), "verify.json")
    for r in rep.records:
        log.info("%s %s", "PASS" if r.passed else "FAIL", r.check_id)
    return EXIT_OK if rep.passed else EXIT_CHECK


def cmd_sweep(run: _Run) -> int:
    rc = run.rc
    if rc.domain.dim != 2:
        raise ConfigValidationError("domain", "the smoothing sweep needs a 2D domain")
    sw = rc.sweep
    cfg = rc.solve_config()
    try:
        sr = smoothing_sweep(cfg, k_max=int(sw["k_max"]), delta0=sw["delta0"], eps0=sw["eps0"],
                             n_samples=int(sw["n_samples"]), tau=float(sw["tau"]))
    except NonConvergence as exc:
        log.error("%s", exc)
        return EXIT_NONCONV
    for lv in sr.levels:
        run.field(lv.result.field, f"u_k{lv.k}")
        run.emit(_write_table(run.out / f"polar_support_k{lv.k}.csv", ["h"], [lv.body.base.data]))
    recs = sweep_checks(sr, tol=cfg.tol)
    out = sr.to_json()
    out["checks"] = [r.to_json() for r in recs]
    run.json(out, "sweep.json")
    return EXIT_OK if all(r.passed for r in recs) else EXIT_CHECK


COMMANDS = {
    "geometry": cmd_geometry,
    "obstacle": cmd_obstacle,
    "solve": cmd_solve,
    "verify": cmd_verify,
    "sweep": cmd_sweep,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="nlgc", description="Nonlocal gradient-constraint toolkit.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("subcommand", choices=sorted(COMMANDS))
    p.add_argument("--config", required=True, help="YAML config file")
    p.add_argument("--out", default=None, help="output directory (default: $NLGC_OUT or the config's 'output')")
    p.add_argument("--max-parallel", type=int, default=None, help="worker threads for operator application")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s", stream=sys.stderr)
    try:
        rc = load_config(args.config)
        if args.max_parallel is not None:
            if args.max_parallel < 1:
                raise ConfigValidationError("max_parallel", "must be >= 1")
            rc.max_parallel = args.max_parallel
    except ConfigParseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except ConfigValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    out = Path(args.out or os.environ.get("NLGC_OUT") or rc.output)
    run = _Run(out, rc, args.subcommand)
    try:
        code = COMMANDS[args.subcommand](run)
    except ConfigValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        code = EXIT_INVALID
    except SolverError as exc:
        msg = str(exc)
        key = msg.split(":", 1)[0] if ":" in msg else "solver"
        print(f"error: {key}: {msg.split(':', 1)[-1].strip()}", file=sys.stderr)
        code = EXIT_INVALID
    return run.finish(code)


if __name__ == "__main__":
    sys.exit(main())
