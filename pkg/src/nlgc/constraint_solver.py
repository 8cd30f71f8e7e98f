"""Discrete double obstacle and gradient-constraint problems.

Unknowns are the grid nodes inside ``U``; every other lattice node holds
the exterior data.  With ``A(u) = -I_h u`` the two discrete problems are

    max{min{A(u), u + rho_bar}, u - rho} = 0        (double obstacle)
    max{A(u), H_h(u) - 1} = 0                       (gradient constraint)

where ``H_h`` is the wide-stencil Lipschitz quotient
``max_j (u_i - u_j) / gamma(x_i - x_j)`` over lattice neighbours ``j`` with
``|x_i - x_j|_inf <= lip_radius * h``.  Any ``gamma``-Lipschitz function
(``rho`` in particular) satisfies ``H_h <= 1`` exactly on the grid.
Both left-hand sides are monotone in the node value and nonincreasing in
the neighbours, so Gauss-Seidel sweeps converge and policy iteration
(semismooth Newton on the selected branch) is well posed.
"""

from __future__ import annotations

import dataclasses
import logging
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from . import kernels
from .convex_geometry import ConvexBody, _support_jet_flat, gauge_eval, polar, smooth_approx
from .domain_obstacles import Domain, ExteriorData, ObstacleProblem, validate_exterior
from .nonlocal_operators import (
    ExteriorRule,
    GridField,
    KernelSpec,
    build_stencil,
    flat_offsets,
)

__all__ = [
    "SolverError",
    "NonConvergence",
    "SolveConfig",
    "Discretization",
    "SolveReport",
    "SolveResult",
    "solve",
    "solve_double_obstacle",
    "solve_gradient_constraint",
    "certify_solution",
    "smoothing_sweep",
]

log = logging.getLogger(__name__)

MODES = ("elastic", "plastic_plus", "plastic_minus")


class SolverError(ValueError):
    """Invalid solver configuration; the message names the key."""


class NonConvergence(RuntimeError):
    """The iteration stopped before reaching the residual tolerance."""

    def __init__(self, msg: str, result: "SolveResult"):
        super().__init__(msg)
        self.result = result


@dataclass
class SolveConfig:
    """Everything needed to set up and solve one discrete instance.

    Parameters
    ----------
    domain, body, phi, kernel
        Problem data.
    h : float
        Grid spacing; the domain must span at least 32 cells.
    formulation : {"double_obstacle", "gradient"}
    method : {"policy_iteration", "gauss_seidel_projection", "jacobi", "pseudo_time"}
        ``"gauss_seidel"`` is accepted as an alias.
    tol : float
        Target for the sup-norm residual.
    max_iters : int
    n_boundary : int
        Boundary samples for the obstacles.
    lip_radius : int
        Stencil radius (in cells) of the Lipschitz quotient; primitive
        directions only.
    max_parallel : int
        Worker threads for operator application.
    backend : str or None
        Force ``"python"`` or ``"cython"`` kernels.
    hamiltonian : {"lipschitz", "upwind"}
        ``"upwind"`` uses ``max_v sum_k |v_k| (u_i - u_{i - sign(v_k) e_k}) / h``
        over ``n_dirs`` extreme points ``v`` of ``K``.
    n_dirs : int
        Extreme points sampled for smooth ``K`` in the upwind form.
    v : numpy.ndarray, optional
        Subsolution at the unknowns, used by :func:`certify_solution`.
    """

    domain: Domain
    body: ConvexBody
    phi: ExteriorData
    kernel: KernelSpec
    h: float
    formulation: str = "double_obstacle"
    method: str = "policy_iteration"
    tol: float = 1e-8
    max_iters: int = 200
    n_boundary: int = 720
    lip_radius: int = 2
    max_parallel: int = 1
    backend: str | None = None
    check_exterior: bool = True
    hamiltonian: str = "lipschitz"
    n_dirs: int = 32
    v: np.ndarray | None = None

    def __post_init__(self):
        if self.method == "gauss_seidel":
            self.method = "gauss_seidel_projection"
        if self.hamiltonian not in ("lipschitz", "upwind"):
            raise SolverError(f"hamiltonian must be 'lipschitz' or 'upwind', got {self.hamiltonian!r}")
        if int(self.max_iters) < 1:
            raise SolverError("max_iters must be at least 1")
        if self.formulation not in ("double_obstacle", "gradient"):
            raise SolverError(f"formulation must be 'double_obstacle' or 'gradient', got {self.formulation!r}")
        if self.method not in ("policy_iteration", "gauss_seidel_projection", "jacobi", "pseudo_time"):
            raise SolverError(f"method: unknown solver {self.method!r}")
        if not self.h > 0:
            raise SolverError("h must be positive")
        if self.domain.min_width / self.h < 32 - 1e-9:
            raise SolverError(
                f"h={self.h} under-resolves the domain: need at least 32 cells across "
                f"(min width {self.domain.min_width})"
            )
        if not self.tol > 0:
            raise SolverError("tol must be positive")
        if not (self.domain.dim == self.body.dim == self.phi.dim):
            raise SolverError("domain, body and phi dimensions differ")


def _extreme_points(body: ConvexBody, n_dirs: int) -> np.ndarray:
    """Points of ``K`` attaining ``gamma°`` (vertices, or sampled for smooth ``K``)."""
    if body.kind == "interval":
        a, b = body.data
        return np.array([[b], [-a]])
    if body.kind in ("square", "polygon"):
        return body._vertices
    th = 2 * np.pi * np.arange(n_dirs) / n_dirs
    u = np.column_stack([np.cos(th), np.sin(th)])
    return _support_jet_flat(body, u).grad


def lipschitz_directions(dim: int, radius: int) -> np.ndarray:
    """Primitive lattice vectors with sup-norm at most ``radius``."""
    if dim == 1:
        return np.array([[1], [-1]])
    r = np.arange(-radius, radius + 1)
    m = np.stack(np.meshgrid(r, r, indexing="ij"), axis=-1).reshape(-1, 2)
    keep = np.gcd(np.abs(m[:, 0]), np.abs(m[:, 1])) == 1
    return m[keep]


def _axis_offsets(V: np.ndarray, ext_shape: tuple) -> np.ndarray:
    """Flat offsets ``-sign(v_k) e_k`` per extreme point and axis."""
    strides = np.cumprod((1,) + tuple(ext_shape[::-1]))[:-1][::-1]
    return (-np.sign(V) * np.asarray(strides)[None]).astype(np.int64)


class Discretization:
    """Grid, stencil, obstacles and index maps for one configuration."""

    def __init__(self, cfg: SolveConfig):
        self.cfg = cfg
        dom = cfg.domain
        h = cfg.h
        lo, hi = dom.bbox()
        n = dom.dim
        cells = np.ceil((hi - lo) / h - 1e-9).astype(int)
        self.origin = lo
        self.shape = tuple(int(c) + 1 for c in cells)
        self.h = h
        self.dim = n
        axes = [lo[k] + h * np.arange(self.shape[k]) for k in range(n)]
        X = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
        self.coords = X
        inside = dom.contains(X if n == 2 else X[..., 0])
        self.inside = inside
        self.idx = np.argwhere(inside).astype(np.int64)
        self.x = X[inside]
        self.N = len(self.x)
        self.stencil = build_stencil(cfg.kernel, n, h, h * (max(self.shape) - 1))
        pad = self.stencil.pad
        self.pad = pad
        self.ext_shape = tuple(s + 2 * pad for s in self.shape)
        self.rule = ExteriorRule.from_data(cfg.phi)
        ext_axes = [lo[k] + h * (np.arange(self.ext_shape[k]) - pad) for k in range(n)]
        XE = np.stack(np.meshgrid(*ext_axes, indexing="ij"), axis=-1).reshape(-1, n)
        self.U0 = cfg.phi.eval_flat(XE)
        self.flat = np.ravel_multi_index(tuple((self.idx + pad).T), self.ext_shape).astype(np.int64)
        self.unk = np.full(self.U0.size, -1, dtype=np.int64)
        self.unk[self.flat] = np.arange(self.N)
        self.offs = flat_offsets(self.stencil.offsets, self.ext_shape)
        self.lp, self.ln = cfg.kernel.slopes()
        self.S_far, self.S_hw = self.rule.far_sum(self.x, self.stencil.R_far)
        self.T = self.stencil.tail
        self.problem = ObstacleProblem(dom, cfg.body, cfg.phi, cfg.n_boundary)
        self.rho = self.problem.minimize(self.x, "rho")[0]
        self.rho_bar = self.problem.minimize(self.x, "rho_bar")[0]
        if np.any(self.rho + self.rho_bar < -1e-12):
            raise SolverError("phi: obstacle ordering -rho_bar <= rho fails on the grid")
        if cfg.hamiltonian == "lipschitz":
            # quotient (u_i - u_j) / gamma(m h) in the kernel's form coef * (u_i - u_j) / h
            m = lipschitz_directions(n, cfg.lip_radius)
            if cfg.lip_radius > pad:
                raise SolverError("lip_radius exceeds the stencil padding")
            self.grad_coef = np.ascontiguousarray(1.0 / gauge_eval(cfg.body, -m if n == 2 else -m[:, 0]))[:, None]
            self.grad_nbr = np.ascontiguousarray(flat_offsets(m, self.ext_shape)[:, None])
        else:
            V = _extreme_points(cfg.body, cfg.n_dirs)
            self.grad_coef = np.ascontiguousarray(np.abs(V))
            self.grad_nbr = np.ascontiguousarray(_axis_offsets(V, self.ext_shape))
        self.be = kernels.get_backend(cfg.backend)

    # -- field helpers -------------------------------------------------------
    def ext(self, u: np.ndarray) -> np.ndarray:
        U = self.U0.copy()
        U[self.flat] = u
        return U

    def field(self, u: np.ndarray) -> GridField:
        vals = self.cfg.phi.eval_flat(self.coords.reshape(-1, self.dim)).reshape(self.shape)
        vals[self.inside] = u
        return GridField(self.origin.copy(), self.h, vals, self.rule)

    def _g(self, r):
        return np.where(r >= 0, self.lp * r, self.ln * r)

    def operator(self, U: np.ndarray) -> np.ndarray:
        """``I_h u`` at the unknowns."""
        near = kernels.apply_nodes(U, self.flat, self.offs, self.stencil.weights, self.lp, self.ln,
                                   self.cfg.max_parallel, be=self.be)
        return near + self.T * self._g(self.S_far - 2 * U[self.flat])

    def jacobian(self, U: np.ndarray) -> np.ndarray:
        """``d(I_h u)/du`` over the unknowns (dense)."""
        J = kernels.jacobian_nodes(U, self.flat, self.offs, self.stencil.weights, self.lp, self.ln,
                                   self.unk, self.N, be=self.be)
        r = self.S_far - 2 * U[self.flat]
        J[np.arange(self.N), np.arange(self.N)] -= 2 * self.T * np.where(r >= 0, self.lp, self.ln)
        return J

    def hamiltonian(self, U: np.ndarray) -> np.ndarray:
        return kernels.upwind_hamiltonian(U, self.flat, self.grad_nbr, self.grad_coef, self.h, be=self.be)

    def residual(self, u: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Residual vector, ``A = -I_h u`` and ``H_h u``."""
        U = self.ext(u)
        A = -self.operator(U)
        H = self.hamiltonian(U)
        if self.cfg.formulation == "double_obstacle":
            F = np.maximum(np.minimum(A, u + self.rho_bar), u - self.rho)
        else:
            F = np.maximum(A, H - 1.0)
        return F, A, H


@dataclass
class SolveReport:
    """Summary of a solve; serialized as the solver JSON report."""

    iterations: int
    residual: float
    mode_counts: dict
    grad_violation_max: float
    history: list
    converged: bool
    method: str
    formulation: str
    n_unknowns: int
    h: float
    backend: str
    holder: list = field(default_factory=list)

    def to_json(self) -> dict[str, Any]:
        return {
            "iterations": self.iterations,
            "residual": self.residual,
            "mode_counts": dict(self.mode_counts),
            "grad_violation_max": self.grad_violation_max,
            "history": list(self.history),
            "converged": self.converged,
            "method": self.method,
            "formulation": self.formulation,
            "n_unknowns": self.n_unknowns,
            "h": self.h,
            "backend": self.backend,
            "holder": list(self.holder),
        }


@dataclass
class SolveResult:
    """Solution values at the unknowns plus diagnostics.

    ``modes`` holds 0 (elastic), 1 (upper contact) or 2 (lower contact)
    per unknown.
    """

    u: np.ndarray
    disc: Discretization
    report: SolveReport
    A: np.ndarray
    H: np.ndarray
    modes: np.ndarray

    @property
    def field(self) -> GridField:
        return self.disc.field(self.u)

    @property
    def x(self) -> np.ndarray:
        return self.disc.x


def _policy_rows(disc: Discretization, u, A, H, U, first: bool):
    """Newton matrix and residual for the branch selected at ``u``."""
    N = disc.N
    F_A = A
    J_A = -disc.jacobian(U)
    if first:
        return J_A, F_A
    J = J_A.copy()
    if disc.cfg.formulation == "double_obstacle":
        # active sets from u - omega A (equivalent projection form); the
        # direct max/min selection is a two-sided game and can cycle
        omega = 1.0 / np.diag(J_A)
        trial = u - omega * A
        up = trial > disc.rho
        low = (trial < -disc.rho_bar) & ~up
        F = np.where(up, u - disc.rho, np.where(low, u + disc.rho_bar, A))
        ident = up | low
        J[ident] = 0.0
        J[ident, np.flatnonzero(ident)] = 1.0
        return J, F
    take_g = H - 1.0 > A
    F = np.where(take_g, H - 1.0, A)
    rows = np.flatnonzero(take_g)
    if len(rows):
        J[rows] = 0.0
        ui = U[disc.flat[rows]]
        nb = disc.flat[rows][:, None, None] + disc.grad_nbr[None]
        vals = (disc.grad_coef[None] * (ui[:, None, None] - U[nb])).sum(axis=2)
        act = np.argmax(vals, axis=1)
        for r, i, v in zip(rows, disc.flat[rows], act):
            J[r, r] += disc.grad_coef[v].sum() / disc.h
            for k in range(disc.grad_nbr.shape[1]):
                j = disc.unk[i + disc.grad_nbr[v, k]]
                if j >= 0:
                    J[r, j] -= disc.grad_coef[v, k] / disc.h
    return J, F


def _classify(disc: Discretization, u: np.ndarray, tol_contact: float) -> np.ndarray:
    m = np.zeros(disc.N, dtype=np.int8)
    m[u + disc.rho_bar <= tol_contact] = 2
    m[disc.rho - u <= tol_contact] = 1
    return m


def _finish(disc, u, it, hist, method, tol) -> SolveResult:
    F, A, H = disc.residual(u)
    res = float(np.abs(F).max()) if disc.N else 0.0
    modes = _classify(disc, u, 10 * tol)
    counts = {name: int((modes == j).sum()) for j, name in enumerate(MODES)}
    gv = float(np.maximum(H - 1.0, 0.0).max()) if disc.N else 0.0
    rep = SolveReport(it, res, counts, gv, [float(v) for v in hist], res <= tol, method,
                      disc.cfg.formulation, disc.N, disc.h, disc.be.BACKEND)
    return SolveResult(u, disc, rep, A, H, modes)


def _initial(disc: Discretization) -> np.ndarray:
    if disc.cfg.formulation == "double_obstacle":
        return np.clip(0.5 * (disc.rho - disc.rho_bar), -disc.rho_bar, disc.rho)
    return np.minimum(0.5 * (disc.rho - disc.rho_bar), disc.rho)


def _solve_policy(disc: Discretization, u: np.ndarray, tol: float, max_iters: int,
                  gs_block: int = 10):
    hist = []
    cfg = disc.cfg
    it = 0
    sweeps = 0
    r_prev = np.inf
    for it in range(1, max_iters + 1):
        U = disc.ext(u)
        A = -disc.operator(U)
        H = disc.hamiltonian(U)
        # the first step solves the unconstrained equation; every iterate is projected
        J, F = _policy_rows(disc, u, A, H, U, first=(it == 1))
        try:
            du = np.linalg.solve(J, -F)
        except np.linalg.LinAlgError:
            # two constrained nodes selecting each other; least-squares step
            du = np.linalg.lstsq(J, -F, rcond=None)[0]
        un = u + du
        if cfg.formulation == "double_obstacle":
            un = np.clip(un, -disc.rho_bar, disc.rho)
        Fn, _, _ = disc.residual(un)
        r = float(np.abs(Fn).max()) if disc.N else 0.0
        if it > 1 and not r < r_prev:
            # policy cycling: reject the step and relax with monotone sweeps
            un, _, h2 = _solve_gs(disc, u, tol, gs_block)
            sweeps += gs_block
            r = h2[-1]
            log.debug("policy step rejected; %d sweeps give %.3e", gs_block, r)
        u = un
        r_prev = r
        hist.append(r)
        log.debug("policy iteration %d residual %.3e", it, r)
        if r <= tol:
            break
    return u, it, hist


def _sweep_args(disc: Discretization):
    mode = {"double_obstacle": 0, "gradient": 1}[disc.cfg.formulation]
    return mode


def _solve_gs(disc: Discretization, u: np.ndarray, tol: float, max_iters: int):
    U = disc.ext(u)
    hist = []
    mode = _sweep_args(disc)
    lo, hi = -disc.rho_bar, disc.rho
    it = 0
    for it in range(1, max_iters + 1):
        kernels.gs_sweep(U, disc.flat, disc.offs, disc.stencil.weights, disc.lp, disc.ln, disc.T,
                         disc.S_far, lo, hi, disc.grad_nbr, disc.grad_coef, disc.h, mode,
                         reverse=(it % 2 == 0), be=disc.be)
        if it % 5 == 0 or it == 1 or it == max_iters:
            F, _, _ = disc.residual(U[disc.flat])
            r = float(np.abs(F).max())
            hist.append(r)
            if r <= tol:
                break
    return U[disc.flat].copy(), it, hist


def _solve_jacobi(disc: Discretization, u: np.ndarray, tol: float, max_iters: int, omega: float = 0.8):
    hist = []
    it = 0
    for it in range(1, max_iters + 1):
        U = disc.ext(u)
        t = kernels.jacobi_targets(U, disc.flat, disc.offs, disc.stencil.weights, disc.lp, disc.ln,
                                   disc.T, disc.S_far, be=disc.be)
        if disc.cfg.formulation == "double_obstacle":
            t = np.clip(t, -disc.rho_bar, disc.rho)
        else:
            nb = U[disc.flat[:, None, None] + disc.grad_nbr[None]]
            tc = ((disc.h + (disc.grad_coef[None] * nb).sum(axis=2)) / disc.grad_coef.sum(axis=1)[None]).min(axis=1)
            t = np.minimum(t, tc)
        u = (1 - omega) * u + omega * t
        F, _, _ = disc.residual(u)
        r = float(np.abs(F).max())
        hist.append(r)
        if r <= tol:
            break
    return u, it, hist


def _solve_pseudo_time(disc: Discretization, u: np.ndarray, tol: float, max_iters: int):
    # explicit monotone step: dt below the inverse diagonal keeps the update monotone
    diag = 2 * (disc.stencil.weights.sum() + disc.T) * max(disc.lp, disc.ln)
    if disc.cfg.formulation == "gradient":
        diag = max(diag, disc.grad_coef.sum(axis=1).max() / disc.h)
    dt = 0.9 / diag
    hist = []
    it = 0
    for it in range(1, max_iters + 1):
        F, _, _ = disc.residual(u)
        r = float(np.abs(F).max())
        hist.append(r)
        if r <= tol:
            break
        u = u - dt * F
        if disc.cfg.formulation == "double_obstacle":
            u = np.clip(u, -disc.rho_bar, disc.rho)
    return u, it, hist


def solve(cfg: SolveConfig, u0: np.ndarray | None = None, disc: Discretization | None = None,
          raise_on_failure: bool = True, holder_tau: float | None = 0.25) -> SolveResult:
    """Solve the configured discrete problem.

    Parameters
    ----------
    cfg : SolveConfig
    u0 : numpy.ndarray, optional
        Initial values at the unknowns (default: midpoint of the
        obstacles, or ``min(midpoint, rho)`` for the gradient form).
    disc : Discretization, optional
        Reuse a prebuilt discretization of the same configuration.
    holder_tau : float or None
        Window for the Hoelder-quotient samples stored in the report
        (``None`` skips them).

    Raises
    ------
    NonConvergence
        If the residual is above ``tol`` after ``max_iters`` (the partial
        result is attached).
    """
    if cfg.check_exterior:
        rep = validate_exterior(cfg.phi, cfg.body, cfg.domain)
        if not rep.ok:
            raise SolverError("phi: " + "; ".join(rep.messages))
    disc = disc or Discretization(cfg)
    u = _initial(disc) if u0 is None else np.asarray(u0, dtype=float).copy()
    solver = {
        "policy_iteration": _solve_policy,
        "gauss_seidel_projection": _solve_gs,
        "jacobi": _solve_jacobi,
        "pseudo_time": _solve_pseudo_time,
    }[cfg.method]
    u, it, hist = solver(disc, u, cfg.tol, cfg.max_iters)
    res = _finish(disc, u, it, hist, cfg.method, cfg.tol)
    if holder_tau is not None:
        from .diagnostics import holder_scan

        tab = holder_scan(res.field, cfg.domain, windows=(holder_tau,), alphas=(0.5, 1.0), modes=res)
        res.report.holder = tab.rows()
    if raise_on_failure and not res.report.converged:
        raise NonConvergence(
            f"{cfg.method} stopped after {it} iterations with residual {res.report.residual:.3e}", res)
    return res


def solve_double_obstacle(cfg: SolveConfig, **kw) -> tuple[GridField, SolveResult]:
    """Solve the double obstacle form; returns the field and the full result."""
    res = solve(dataclasses.replace(cfg, formulation="double_obstacle"), **kw)
    return res.field, res


def solve_gradient_constraint(cfg: SolveConfig, **kw) -> tuple[GridField, SolveResult]:
    """Solve the gradient-constraint form; returns the field and the full result."""
    res = solve(dataclasses.replace(cfg, formulation="gradient"), **kw)
    return res.field, res


# ---------------------------------------------------------------------------
# certification


@dataclass
class CheckRecord:
    """One pass/fail record of the verification report."""

    check_id: str
    paper_ref: str
    passed: bool
    margin: float
    location: list

    def to_json(self) -> dict[str, Any]:
        return {"check_id": self.check_id, "paper_ref": self.paper_ref, "pass": bool(self.passed),
                "margin": float(self.margin), "location": [float(v) for v in self.location]}


def _loc(disc: Discretization, j: int) -> list:
    return [float(v) for v in disc.x[j]] if disc.N else []


def certify_solution(result: SolveResult, v: np.ndarray | None = None, shift: int = 4,
                     grad_tol: float = 0.05, tol: float | None = None) -> list[CheckRecord]:
    """Discrete counterparts of the structural properties of the solution.

    Checks
    ------
    residual
        Residual recomputed from scratch matches the solve-time value.
    sandwich
        ``-rho_bar <= u <= rho`` at every unknown.
    gradient_bound
        ``max (H_h u - 1)^+ <= grad_tol``.
    subsolution_order
        ``v <= u`` for a supplied subsolution ``v`` (skipped otherwise).
    reduced_equation
        ``|max{-I_h u, u - rho}|`` small wherever ``v`` touches ``u`` or
        ``u > -rho_bar``.
    translation
        For the lattice shift ``z = shift * h e_1``, the sup of
        ``u(x + z) - u(x)`` over ``V_1`` does not exceed its sup over the
        complement, and ``u(x + z) - u(x) <= gamma(z)`` everywhere.
    """
    disc = result.disc
    u = result.u
    tol = disc.cfg.tol if tol is None else tol
    if v is None:
        v = disc.cfg.v
    recs: list[CheckRecord] = []
    F, A, H = disc.residual(u)
    r = float(np.abs(F).max()) if disc.N else 0.0
    recs.append(CheckRecord("residual", "discrete equation residual", r <= tol and
                            abs(r - result.report.residual) <= 1e-12,
                            tol - r, _loc(disc, int(np.argmax(np.abs(F)))) if disc.N else []))
    lo = u + disc.rho_bar
    hi = disc.rho - u
    m = float(min(lo.min(), hi.min())) if disc.N else 0.0
    j = int(np.argmin(np.minimum(lo, hi))) if disc.N else 0
    recs.append(CheckRecord("sandwich", "obstacle ordering -rho_bar <= u <= rho", m >= -1e-13, m, _loc(disc, j)))
    gv = np.maximum(H - 1.0, 0.0)
    j = int(np.argmax(gv)) if disc.N else 0
    recs.append(CheckRecord("gradient_bound", "gradient bound gamma_polar(Du) <= 1",
                            float(gv.max()) <= grad_tol, grad_tol - float(gv.max()), _loc(disc, j)))
    touch = np.ones(disc.N, dtype=bool)
    if v is not None:
        v = np.asarray(v, dtype=float)
        Av = -disc.operator(disc.ext(v))
        sv = np.maximum.reduce([Av, v - disc.rho, -disc.rho_bar - v])
        j = int(np.argmax(sv))
        recs.append(CheckRecord("subsolution_hypothesis", "v subsolution: -I v <= 0 and -rho_bar <= v <= rho",
                                float(sv.max()) <= 10 * tol, 10 * tol - float(sv.max()), _loc(disc, j)))
        d = u - v
        j = int(np.argmin(d))
        recs.append(CheckRecord("subsolution_order", "comparison v <= u for a subsolution v",
                                float(d.min()) >= -10 * tol, float(d.min()), _loc(disc, j)))
        touch = (np.abs(d) <= 10 * tol) | (u + disc.rho_bar > 10 * tol)
    red = np.maximum(A, u - disc.rho)
    red_abs = np.where(touch, np.abs(red), 0.0)
    j = int(np.argmax(red_abs)) if disc.N else 0
    rr = float(red_abs.max()) if disc.N else 0.0
    recs.append(CheckRecord("reduced_equation", "reduced equation max{-Iu, u - rho} = 0",
                            rr <= 10 * tol, 10 * tol - rr, _loc(disc, j)))
    recs.append(_translation_check(result, shift))
    return recs


def _translation_check(result: SolveResult, shift: int) -> CheckRecord:
    disc = result.disc
    u = result.u
    U = disc.ext(u).reshape(disc.ext_shape)
    n = disc.dim
    z = np.zeros(n, dtype=int)
    z[0] = shift
    zero = np.zeros(n, dtype=int)
    # window: box plus the shift in every direction
    pad = disc.pad
    lo = [pad - shift] * n
    hi = [pad + s + shift for s in disc.shape]
    sl = tuple(slice(lo[k], hi[k]) for k in range(n))
    slz = tuple(slice(lo[k] + z[k], hi[k] + z[k]) for k in range(n))
    D = U[slz] - U[sl]
    tol = 10 * disc.cfg.tol
    V = np.zeros(disc.ext_shape, dtype=bool)
    V0 = np.zeros(disc.ext_shape, dtype=bool)
    e = np.zeros(disc.N, dtype=bool)
    V.reshape(-1)[disc.flat] = u < disc.rho - tol
    e[:] = u > -disc.rho_bar + tol
    V0.reshape(-1)[disc.flat] = e
    V1 = V[sl] & V0[slz]
    zvec = z * disc.h
    gz = float(kernels_gauge(disc.cfg.body, zvec))
    if V1.any():
        inner = float(D[V1].max())
        outer = float(D[~V1].max())
    else:
        inner, outer = -np.inf, float(D.max())
    margin = min(outer - inner, gz - float(D.max()))
    loc = []
    if V1.any():
        k = np.unravel_index(np.argmax(np.where(V1, D, -np.inf)), D.shape)
        loc = [float(disc.origin[i] + disc.h * (k[i] + lo[i] - pad)) for i in range(n)]
    return CheckRecord("translation", "translation comparison sup_V1 (u(.+z)-u) <= sup off V1 <= gamma(z)",
                       margin >= -tol, margin, loc)


def kernels_gauge(body: ConvexBody, z: np.ndarray) -> float:
    return float(gauge_eval(body, z[None] if body.dim == 2 else z)[0])


# ---------------------------------------------------------------------------
# smoothing sweep


@dataclass
class SweepLevel:
    """Per-level output of :func:`smoothing_sweep`."""

    k: int
    body: ConvexBody
    delta_k: float
    eps_k: float
    rho_err: float
    C_measured: float
    result: SolveResult
    window_I: float


@dataclass
class SweepResult:
    levels: list[SweepLevel]
    C_theory: float
    nesting_margin: list[float]
    diffs: list[float]
    base_rho: np.ndarray

    def to_json(self) -> dict[str, Any]:
        return {
            "C_theory": self.C_theory,
            "nesting_margin": self.nesting_margin,
            "diffs": self.diffs,
            "levels": [
                {"k": lv.k, "delta_k": lv.delta_k, "eps_k": lv.eps_k, "rho_err": lv.rho_err,
                 "C_measured": lv.C_measured, "window_I": lv.window_I,
                 "report": lv.result.report.to_json()}
                for lv in self.levels
            ],
        }


def _radial_gap(K: ConvexBody, Kk: ConvexBody, n_dirs: int = 8192) -> float:
    from .convex_geometry import _gauge_flat

    th = 2 * np.pi * np.arange(n_dirs) / n_dirs
    u = np.column_stack([np.cos(th), np.sin(th)])
    return float(np.abs(1.0 / _gauge_flat(K, u) - 1.0 / _gauge_flat(Kk, u)).max())


def smoothing_sweep(cfg: SolveConfig, k_max: int = 5, delta0: float | None = None,
                    eps0: float | None = None, n_samples: int = 16384, tau: float = 0.25) -> SweepResult:
    """Solve with ``K_k = (K°_k)°`` for ``k = 1..k_max``.

    Records the obstacle error against ``delta_k`` (the largest radial
    gap between ``dK_k`` and ``dK``), successive solution differences and
    ``sup |I_h u_k|`` over nodes at distance ``> tau`` from the boundary.
    """
    Kp = polar(cfg.body)
    levels = []
    hs = []
    base = Discretization(cfg)
    rho = base.rho
    th = 2 * np.pi * np.arange(4096) / 4096
    uu = np.column_stack([np.cos(th), np.sin(th)])
    from .convex_geometry import _gauge_flat

    K1 = None
    prev = None
    diffs = []
    win = cfg.domain.distance(base.x) > tau
    for k in range(1, k_max + 1):
        Kpk = smooth_approx(Kp, k, delta0, eps0, n_samples)
        Kk = ConvexBody.dual(Kpk)
        if K1 is None:
            K1 = Kk
        hs.append(Kpk.data)
        ck = dataclasses.replace(cfg, body=Kk, check_exterior=False)
        res = solve(ck)
        dk = _radial_gap(cfg.body, Kk)
        err = float(np.abs(res.disc.rho - rho).max())
        Cm = err / (dk * cfg.domain.diameter) if dk > 0 else 0.0
        wI = float(np.abs(res.A[win]).max()) if win.any() else 0.0
        levels.append(SweepLevel(k, Kk, dk, Kpk.meta["eps_k"], err, Cm, res, wI))
        if prev is not None:
            diffs.append(float(np.abs(res.u - prev).max()))
        prev = res.u
    C_theory = float((_gauge_flat(cfg.body, uu) * _gauge_flat(K1, uu)).max())
    nest = []
    for a, b in zip(hs[:-1], hs[1:]):
        nest.append(float((a - b).min()) if len(a) == len(b) else np.nan)
    return SweepResult(levels, C_theory, nest, diffs, rho)
