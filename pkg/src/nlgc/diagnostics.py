"""Coincidence sets, discrete Hoelder quotients and the verification harness.

Every check produces a :class:`~nlgc.constraint_solver.CheckRecord`
(``check_id``, ``paper_ref``, ``pass``, ``margin``, ``location``); the
harness aggregates them into a deterministic JSON report.  The Hoelder
scan is a refinement-stability signature, not a proof of regularity.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np
from scipy import ndimage

from .constraint_solver import (
    CheckRecord,
    SolveConfig,
    SolveResult,
    certify_solution,
    solve,
)
from .convex_geometry import ConvexBody, _gauge_flat, _support_jet_flat, polar, smooth_approx
from .domain_obstacles import (
    Domain,
    ExteriorData,
    ObstacleProblem,
    barrier_field,
    characteristic_monotonicity,
    interior_hessian_field,
    ridge_scan,
)
from .nonlocal_operators import ExteriorRule, GridField, KernelSpec, apply_operator, build_stencil

__all__ = [
    "CoincidenceDecomposition",
    "decompose",
    "HolderTable",
    "holder_scan",
    "Instance",
    "default_battery",
    "lemma_suite",
    "SuiteReport",
    "euclidean_battery",
    "barrier_bound_check",
    "sweep_checks",
]


# ---------------------------------------------------------------------------
# coincidence sets


@dataclass
class CoincidenceDecomposition:
    """Masks over the interior nodes and the free-boundary node list.

    ``free_boundary`` holds indices (into the unknowns) of elastic nodes
    with a lattice neighbour in the coincidence set.
    """

    plus: np.ndarray
    minus: np.ndarray
    elastic: np.ndarray
    free_boundary: np.ndarray
    tol_contact: float
    degenerate: bool

    def counts(self) -> dict[str, int]:
        return {"elastic": int(self.elastic.sum()), "plastic_plus": int(self.plus.sum()),
                "plastic_minus": int(self.minus.sum())}


def decompose(u, rho=None, rho_bar=None, tol_contact: float | None = None,
              idx: np.ndarray | None = None) -> CoincidenceDecomposition:
    """Split interior nodes into ``P+``, ``P-`` and ``E``.

    Parameters
    ----------
    u : SolveResult or numpy.ndarray
        A solve result (obstacles, lattice indices and tolerance are taken
        from it) or values at the interior nodes.
    rho, rho_bar : numpy.ndarray, optional
        Obstacles at the same nodes when ``u`` is an array.
    tol_contact : float, optional
        Defaults to ``10 * tol`` of the solve.
    idx : numpy.ndarray, optional
        Lattice indices of the nodes, for free-boundary extraction.
    """
    if isinstance(u, SolveResult):
        d = u.disc
        rho, rho_bar, idx = d.rho, d.rho_bar, d.idx
        tol_contact = 10 * d.cfg.tol if tol_contact is None else tol_contact
        u = u.u
    u = np.asarray(u, dtype=float)
    tol_contact = 0.0 if tol_contact is None else float(tol_contact)
    plus = np.asarray(rho) - u <= tol_contact
    minus = u + np.asarray(rho_bar) <= tol_contact
    el = ~(plus | minus)
    fb = np.zeros(0, dtype=np.int64)
    if idx is not None and len(u):
        idx = np.asarray(idx)
        lo = idx.min(axis=0)
        shape = tuple(idx.max(axis=0) - lo + 1)
        P = np.zeros(shape, dtype=bool)
        P[tuple((idx - lo).T)] = ~el
        near = ndimage.binary_dilation(P, structure=np.ones((3,) * idx.shape[1], dtype=bool))
        fb = np.flatnonzero(el & near[tuple((idx - lo).T)])
    return CoincidenceDecomposition(plus, minus, el, fb, tol_contact, bool((plus & minus).any()))


# ---------------------------------------------------------------------------
# Hoelder quotients


@dataclass
class HolderTable:
    """Empirical ``sup |Du(x) - Du(y)| / |x - y|^alpha`` per window.

    ``seminorm[i, j]`` is for ``windows[i]`` and ``alphas[j]``;
    ``n_pairs`` and ``dist_range`` describe the sampled pairs.
    """

    windows: list
    alphas: tuple
    seminorm: np.ndarray
    linf: np.ndarray
    n_pairs: np.ndarray
    dist_range: list
    notes: list = field(default_factory=list)

    def rows(self) -> list[dict[str, Any]]:
        out = []
        for i, w in enumerate(self.windows):
            for j, a in enumerate(self.alphas):
                out.append({"window": w if isinstance(w, (int, float)) else str(w), "alpha": float(a),
                            "seminorm": float(self.seminorm[i, j]), "n_pairs": int(self.n_pairs[i]),
                            "dist_min": float(self.dist_range[i][0]),
                            "dist_max": float(self.dist_range[i][1]),
                            "linf": float(self.linf[i])})
        return out


def _grid_modes(u: GridField, res: SolveResult | None) -> np.ndarray | None:
    if res is None:
        return None
    m = np.full(u.shape, -1, dtype=np.int8)
    m[tuple(res.disc.idx.T)] = res.modes
    return m


def _gradient(u: GridField, modes: np.ndarray | None) -> np.ndarray:
    """Central differences, one-sided where the mode changes across the stencil."""
    V = u.values
    n = u.dim
    h = u.h
    G = np.full(V.shape + (n,), np.nan)
    for k in range(n):
        fwd = np.full(V.shape, np.nan)
        bwd = np.full(V.shape, np.nan)
        sl_in = [slice(None)] * n
        sl_a = [slice(None)] * n
        sl_in[k] = slice(0, -1)
        sl_a[k] = slice(1, None)
        fwd[tuple(sl_in)] = (V[tuple(sl_a)] - V[tuple(sl_in)]) / h
        bwd[tuple(sl_a)] = (V[tuple(sl_a)] - V[tuple(sl_in)]) / h
        cen = 0.5 * (fwd + bwd)
        if modes is not None:
            mf = np.full(V.shape, -2, dtype=np.int8)
            mb = np.full(V.shape, -2, dtype=np.int8)
            mf[tuple(sl_in)] = modes[tuple(sl_a)]
            mb[tuple(sl_a)] = modes[tuple(sl_in)]
            same_f = mf == modes
            same_b = mb == modes
            cen = np.where(same_f & ~same_b, fwd, np.where(same_b & ~same_f, bwd, cen))
        G[..., k] = cen
    return G


def holder_scan(u: GridField, domain: Domain, windows=(0.25,), alphas=(0.1, 0.3, 0.5, 0.7, 0.9, 1.0),
                modes: SolveResult | None = None, n_random: int = 2000, seed: int = 0) -> HolderTable:
    """Discrete Hoelder quotients of ``D_h u`` over interior windows.

    Parameters
    ----------
    u : GridField
    domain : Domain
    windows : sequence
        Each entry is a distance ``tau`` (window ``d(x, dU) > tau``) or a
        callable mapping node coordinates ``(N, dim)`` to a boolean mask.
    alphas : sequence of float
    modes : SolveResult, optional
        Supplies the mode map; differences are one-sided where the
        central stencil straddles a mode change.
    n_random : int
        Random node pairs added to all adjacent lattice pairs.
    seed : int
        Seed for the random pairs.
    """
    X = u.coords()
    G = _gradient(u, _grid_modes(u, modes))
    pts = X.reshape(-1, u.dim)
    Gf = G.reshape(-1, u.dim)
    Vf = u.values.ravel()
    rng = np.random.default_rng(seed)
    alphas = tuple(float(a) for a in alphas)
    sem = np.full((len(windows), len(alphas)), np.nan)
    linf = np.full(len(windows), np.nan)
    npairs = np.zeros(len(windows), dtype=int)
    dr, notes = [], []
    inside = domain.contains(pts if u.dim == 2 else pts[:, 0])
    dist = np.where(inside, domain.distance(pts if u.dim == 2 else pts[:, 0]), -np.inf)
    for i, w in enumerate(windows):
        if callable(w):
            mask = np.asarray(w(pts), dtype=bool) & inside
        else:
            mask = dist > float(w)
        mask &= np.all(np.isfinite(Gf), axis=1)
        if mask.sum() < 2:
            notes.append(f"window {w!r}: fewer than two nodes, skipped")
            dr.append((np.nan, np.nan))
            continue
        M = mask.reshape(u.shape)
        pairs = []
        steps = [(1,)] if u.dim == 1 else [(1, 0), (0, 1), (1, 1), (1, -1)]
        flat_ids = np.arange(M.size).reshape(u.shape)
        for st in steps:
            sh = np.roll(flat_ids, tuple(-s for s in st), axis=tuple(range(u.dim)))
            ok = M & np.roll(M, tuple(-s for s in st), axis=tuple(range(u.dim)))
            # drop pairs wrapped around the box edge
            for k, s in enumerate(st):
                edge = [slice(None)] * u.dim
                edge[k] = slice(-1, None) if s > 0 else slice(0, 1)
                if s != 0:
                    ok[tuple(edge)] = False
            pairs.append(np.stack([flat_ids[ok], sh[ok]], axis=1))
        ids = np.flatnonzero(mask)
        a = rng.choice(ids, n_random)
        b = rng.choice(ids, n_random)
        keep = a != b
        pairs.append(np.stack([a[keep], b[keep]], axis=1))
        P = np.concatenate(pairs)
        d = np.linalg.norm(pts[P[:, 0]] - pts[P[:, 1]], axis=1)
        g = np.linalg.norm(Gf[P[:, 0]] - Gf[P[:, 1]], axis=1)
        for j, al in enumerate(alphas):
            sem[i, j] = float((g / d**al).max())
        linf[i] = float(np.abs(Vf[mask]).max())
        npairs[i] = len(P)
        dr.append((float(d.min()), float(d.max())))
        if len(P) < 1000:
            notes.append(f"window {w!r}: only {len(P)} pairs")
    return HolderTable(list(windows), alphas, sem, linf, npairs, dr, notes)


# ---------------------------------------------------------------------------
# structural checks on a solved instance


def _rec(cid, ref, ok, margin, loc=()) -> CheckRecord:
    return CheckRecord(cid, ref, bool(ok), float(margin), [float(v) for v in np.ravel(loc)])


def complementarity_check(res: SolveResult, tol: float | None = None) -> CheckRecord:
    """Branch-wise complementarity of the mode map."""
    d = res.disc
    tol = 10 * d.cfg.tol if tol is None else tol
    dec = decompose(res)
    A = res.A
    viol = np.zeros(d.N)
    viol[dec.elastic] = np.abs(A[dec.elastic])
    viol[dec.plus] = np.maximum(A[dec.plus], 0.0)
    viol[dec.minus] = np.maximum(-A[dec.minus], 0.0)
    j = int(np.argmax(viol)) if d.N else 0
    m = float(viol.max()) if d.N else 0.0
    return _rec("complementarity", "branch-wise complementarity on E, P+ and P-", m <= tol, tol - m,
                d.x[j] if d.N else ())


def _box_mask(res: SolveResult, sel: np.ndarray) -> np.ndarray:
    M = np.zeros(res.disc.shape, dtype=bool)
    M[tuple(res.disc.idx[sel].T)] = True
    return M


def plastic_segment_check(res: SolveResult) -> CheckRecord:
    """Nodes along ``[x, y)`` from each upper-contact node to its closest point are in contact."""
    d = res.disc
    dec = decompose(res)
    if not dec.plus.any():
        return _rec("plastic_segment", "segments to the closest point stay in P+", True, 0.0)
    Pp = ndimage.binary_dilation(_box_mask(res, dec.plus), structure=np.ones((3,) * d.dim, dtype=bool))
    xs = d.x[dec.plus]
    _, t = d.problem.minimize(xs, "rho")
    ys = d.cfg.domain.boundary(t).y
    worst, loc = 0, ()
    for x, y in zip(xs, ys):
        L = np.linalg.norm(y - x)
        m = max(int(np.ceil(2 * L / d.h)), 1)
        seg = x[None] + np.linspace(0, 1, m + 1)[:-1, None] * (y - x)[None]
        q = np.rint((seg - d.origin) / d.h).astype(int)
        q = np.clip(q, 0, np.array(d.shape) - 1)
        ins = d.inside[tuple(q.T)]
        bad = int((~Pp[tuple(q[ins].T)]).sum())
        if bad > worst:
            worst, loc = bad, x
    return _rec("plastic_segment", "segments to the closest point stay in P+ (one-cell tolerance)",
                worst == 0, -worst, loc)


def ridge_elastic_check(res: SolveResult, det_floor: float = 1e-6) -> CheckRecord:
    """No singular-set node lies inside the upper contact set (one-cell tolerance)."""
    d = res.disc
    cfg = d.cfg
    dec = decompose(res)
    core = ndimage.binary_erosion(_box_mask(res, dec.plus), structure=np.ones((3,) * d.dim, dtype=bool))
    if d.dim == 1:
        rs = ridge_scan(cfg.domain, cfg.body, cfg.phi, d.x[:2], n_boundary=cfg.n_boundary)
        ridge = np.zeros(d.shape, dtype=bool)
        for p in rs.points:
            ridge[int(np.rint((p[0] - d.origin[0]) / d.h))] = True
    else:
        rs = ridge_scan(cfg.domain, cfg.body, cfg.phi, d.x, det_floor=det_floor, n_boundary=cfg.n_boundary)
        ridge = _box_mask(res, rs.code > 0)
    both = ridge & core
    loc = d.origin + d.h * np.argwhere(both)[0] if both.any() else ()
    return _rec("ridge_elastic", "singular set avoids the interior of P+ (one-cell tolerance)",
                not both.any(), -float(both.sum()), loc)


def equivalence_check(cfg: SolveConfig, tol: float = 5e-2, res_do: SolveResult | None = None) -> tuple[CheckRecord, float]:
    a = res_do or solve(dataclasses.replace(cfg, formulation="double_obstacle"), holder_tau=None)
    b = solve(dataclasses.replace(cfg, formulation="gradient"), holder_tau=None)
    diff = np.abs(a.u - b.u)
    j = int(np.argmax(diff))
    m = float(diff.max())
    return _rec("equivalence", "double obstacle and gradient-constraint solutions agree", m <= tol,
                tol - m, a.disc.x[j]), m


def _elastic_solution(disc, iters: int = 50) -> np.ndarray:
    """Newton iteration for the unconstrained equation ``I_h w = 0``."""
    w = np.zeros(disc.N)
    for _ in range(iters):
        U = disc.ext(w)
        A = -disc.operator(U)
        if float(np.abs(A).max()) <= 1e-13:
            break
        w = w + np.linalg.solve(-disc.jacobian(U), -A)
    return w


def subsolution_candidate(res: SolveResult, tol: float | None = None) -> np.ndarray | None:
    """A discrete subsolution between the obstacles, or ``None``.

    Tries ``-rho_bar`` first, then the unconstrained solution ``w``
    lowered by ``max (w - rho)^+``; lowering interior values only
    decreases ``-I_h``, so the shifted field stays a subsolution.
    """
    d = res.disc
    tol = 10 * d.cfg.tol if tol is None else tol
    v = -d.rho_bar
    if float((-d.operator(d.ext(v))).max()) <= tol:
        return v
    w = _elastic_solution(d)
    v = w - max(float((w - d.rho).max()), 0.0)
    if float((v + d.rho_bar).min()) >= 0.0 and float((-d.operator(d.ext(v))).max()) <= tol:
        return v
    return None


# ---------------------------------------------------------------------------
# harness


@dataclass
class Instance:
    """Named solver configuration for the harness."""

    name: str
    config: SolveConfig


def default_battery(h: float = 1 / 128) -> list[Instance]:
    """Five 1D instances on ``U = (-1, 1)``."""
    U = Domain.interval(-1.0, 1.0)
    return [
        Instance("sym_s07", SolveConfig(U, ConvexBody.interval(1, 1), ExteriorData.radial_quadratic(1, 0.4),
                                        KernelSpec(s=0.7), h)),
        Instance("asym_s05", SolveConfig(U, ConvexBody.interval(1, 2), ExteriorData.radial_quadratic(1, 0.15),
                                         KernelSpec(s=0.5), h)),
        Instance("affine_s03", SolveConfig(U, ConvexBody.interval(1, 1), ExteriorData.affine([0.5], 0.1),
                                           KernelSpec(s=0.3), h)),
        Instance("pucci_plus_s06", SolveConfig(U, ConvexBody.interval(0.5, 1.5),
                                               ExteriorData.radial_quadratic(1, 0.2),
                                               KernelSpec(s=0.6, lam=0.5, Lam=2.0, kind="pucci_plus"), h)),
        Instance("pucci_minus_s08", SolveConfig(U, ConvexBody.interval(1, 1), ExteriorData.constant(1, 0.3),
                                                KernelSpec(s=0.8, lam=0.5, Lam=2.0, kind="pucci_minus"), h)),
    ]


@dataclass
class SuiteReport:
    records: list[CheckRecord]

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.records)

    def to_json(self) -> dict[str, Any]:
        return {"pass": self.passed, "checks": [r.to_json() for r in self.records]}


def instance_checks(inst: Instance, equivalence_tol: float = 5e-2) -> list[CheckRecord]:
    """All solver-level checks for one instance."""
    res = solve(inst.config, holder_tau=None)
    v = subsolution_candidate(res)
    recs = certify_solution(res, v=v)
    recs.append(complementarity_check(res))
    recs.append(plastic_segment_check(res))
    recs.append(ridge_elastic_check(res))
    recs.append(equivalence_check(inst.config, equivalence_tol, res)[0])
    for r in recs:
        r.check_id = f"{inst.name}/{r.check_id}"
    return recs


def lemma_suite(instances: list[Instance] | None = None, include_euclidean: bool = True) -> SuiteReport:
    """Run every check on every instance; deterministic for fixed inputs."""
    instances = default_battery() if instances is None else instances
    recs: list[CheckRecord] = []
    for inst in instances:
        recs.extend(instance_checks(inst))
    if include_euclidean:
        recs.extend(euclidean_battery())
    return SuiteReport(recs)


# ---------------------------------------------------------------------------
# Euclidean closed forms


def euclidean_battery(n_points: int = 200, seed: int = 0) -> list[CheckRecord]:
    """Disk domain, round gauge, zero data: every quantity is explicit.

    ``rho = 1 - |x|``; tangential Hessian eigenvalue ``-1/|x|``; ``det Q =
    |x|``; the ridge is the centre; along a characteristic the tangential
    second derivative is ``-1/(1 - t)``.
    """
    U = Domain.disk()
    K = ConvexBody.ball(1.0)
    phi = ExteriorData.zero(2)
    prob = ObstacleProblem(U, K, phi)
    rng = np.random.default_rng(seed)
    r = np.sqrt(rng.uniform(0.01, 0.9, n_points))
    th = rng.uniform(0, 2 * np.pi, n_points)
    x = np.column_stack([r * np.cos(th), r * np.sin(th)])
    recs = []
    val = prob.minimize(x)[0]
    e = np.abs(val - (1 - r))
    j = int(np.argmax(e))
    recs.append(_rec("euclid/rho", "rho = 1 - |x|", e.max() <= 1e-10, 1e-10 - e.max(), x[j]))
    xh = np.array([[0.5, 0.0], [0.0, -0.5], [0.3, 0.4]])
    ih = interior_hessian_field(prob, xh)
    eig = np.linalg.eigvalsh(0.5 * (ih.hess + np.transpose(ih.hess, (0, 2, 1))))
    e = np.abs(eig[:, 0] + 2.0).max()
    recs.append(_rec("euclid/hessian", "tangential eigenvalue -2 at |x| = 1/2", e <= 1e-6, 1e-6 - e, xh[0]))
    e = np.abs(ih.detQ - 0.5).max()
    recs.append(_rec("euclid/detQ", "det Q = |x|", e <= 1e-6, 1e-6 - e, xh[0]))
    g = np.linspace(-1, 1, 33)
    X = np.stack(np.meshgrid(g, g, indexing="ij"), axis=-1).reshape(-1, 2)
    X = X[np.linalg.norm(X, axis=1) < 0.999]
    rs = ridge_scan(U, K, phi, X)
    flagged = X[rs.code > 0]
    ok = len(flagged) == 1 and np.allclose(flagged[0], 0.0)
    recs.append(_rec("euclid/ridge", "ridge is the centre node", ok, -abs(len(flagged) - 1),
                     flagged[0] if len(flagged) else ()))
    worst = 0.0
    for t0 in (0.0, 0.125, 0.3):
        cr = characteristic_monotonicity(U, K, phi, t0, [[-np.sin(2 * np.pi * t0), np.cos(2 * np.pi * t0)]])
        q = cr.q_formula[:, 0]
        worst = max(worst, float(np.abs(q + 1.0 / (1.0 - cr.t)).max()))
    recs.append(_rec("euclid/characteristic", "q(t) = -1/(1 - t)", worst <= 1e-6, 1e-6 - worst))
    return recs


# ---------------------------------------------------------------------------
# barrier bound


@dataclass
class BarrierBoundRow:
    k: int
    t0: float
    op_max: float
    bound: float
    C_cap: float
    dominance_gap: float


def _second_difference_cap(V: np.ndarray, nodes: np.ndarray, offsets: np.ndarray, h: float,
                           tau: float, far_value: float) -> float:
    """``max delta(x, y) / min(tau^2, |y|^2)`` over nodes and lattice offsets.

    ``V`` is padded so that every ``node +- offset`` is inside; offsets
    beyond the array use the constant far value.
    """
    n = nodes.shape[1]
    best = -np.inf
    ui = V[tuple(nodes.T)]
    step = max(1, 4_000_000 // max(len(nodes), 1))
    for a in range(0, len(offsets), step):
        off = offsets[a:a + step]
        p = nodes[:, None, :] + off[None]
        m = nodes[:, None, :] - off[None]
        vp = V[tuple(np.moveaxis(p, -1, 0))]
        vm = V[tuple(np.moveaxis(m, -1, 0))]
        d = vp + vm - 2 * ui[:, None]
        r2 = (h * np.linalg.norm(off, axis=1)) ** 2
        q = d / np.minimum(tau**2, r2)[None]
        best = max(best, float(q.max()))
    # |y| beyond the lattice: both values equal the far constant
    best = max(best, float((2 * far_value - 2 * ui).max()) / tau**2)
    return best


def _ball_distance(P: np.ndarray, c: np.ndarray, r0: float, x: np.ndarray, stride: int = 64) -> np.ndarray:
    """Gauge distance from ``x`` to the ball ``B(c, r0)``, zero inside.

    With ``P`` sampled densely and in order on the boundary of the polar
    body, ``min_{z in B} gamma(x - z) = max_p <p, x - c> - r0 |p|``.  The
    maximum is located on every ``stride``-th sample and then taken
    over the neighbouring window of the full sampling.
    """
    x = np.atleast_2d(x)
    nP = np.linalg.norm(P, axis=1)
    coarse = np.arange(0, len(P), stride)
    win = np.arange(-2 * stride, 2 * stride + 1)
    out = np.empty(len(x))
    step = max(1, 2_000_000 // len(coarse))
    for i in range(0, len(x), step):
        w = x[i:i + step] - c
        j = np.argmax(w @ P[coarse].T - r0 * nP[coarse][None], axis=1)
        idx = (coarse[j][:, None] + win[None]) % len(P)
        val = np.einsum("ijk,ik->ij", P[idx], w) - r0 * nP[idx]
        out[i:i + step] = val.max(axis=1)
    return np.maximum(out, 0.0)


def barrier_bound_check(k_values=(1, 2, 3), n_points: int = 10, tau: float = 0.25, h: float = 1 / 32,
                        r0: float = 0.5, kernel: KernelSpec | None = None,
                        body: ConvexBody | None = None, phi: ExteriorData | None = None
                        ) -> tuple[list[CheckRecord], list[BarrierBoundRow]]:
    """Operator bound on the truncated exterior-ball barriers.

    For each ``k`` and boundary point ``y0`` of the unit disk, the
    barrier is sampled on the grid, its second-difference cap ``C`` is
    measured over window nodes and lattice offsets, and the upper end of
    the enclosure of ``M+`` applied to it at window nodes is compared to
    ``C_hat tau^{2-2s} / (2 s0)`` with ``C_hat = (Lam + lam) C |S^{n-1}|``
    (scaled for the kernel normalization).
    """
    U = Domain.disk()
    K = body or ConvexBody.square(1.0)
    phi = phi or ExteriorData.zero(2)
    ker = kernel or KernelSpec(s=0.5, lam=0.5, Lam=2.0, kind="pucci_plus")
    if ker.kind != "pucci_plus":
        ker = ker.pucci(+1)
    Kp = polar(K)
    polars = {k: smooth_approx(Kp, k) for k in k_values}
    bodies = {k: ConvexBody.dual(polars[k]) for k in k_values}
    tp = np.linspace(0, 2 * np.pi, 65536, endpoint=False)
    tp = np.column_stack([np.cos(tp), np.sin(tp)])
    K1 = bodies[min(k_values)]
    g = -1.0 + h * np.arange(int(round(2 / h)) + 1)
    X = np.stack(np.meshgrid(g, g, indexing="ij"), axis=-1)
    pts = X.reshape(-1, 2)
    win = (U.distance(pts) > tau).reshape(X.shape[:2])
    wnodes = np.argwhere(win)
    st = build_stencil(ker, 2, h, 2.0)
    sigma = 2 * np.pi
    scale = ker.constant(2) / (1 - ker.s)
    th = np.linspace(0, 2 * np.pi, 4096, endpoint=False)
    ucirc = np.column_stack([np.cos(th), np.sin(th)])
    recs, rows = [], []
    for k in k_values:
        Kk = bodies[k]
        cmin = 0.99 * float(_gauge_flat(Kk, ucirc).min())
        # boundary points of the polar body, for the closed-form zero-data barrier
        P = _support_jet_flat(polars[k], tp).grad
        for t0 in np.arange(n_points) / n_points:
            bf = barrier_field(U, Kk, phi, float(t0), r0, pts, cap_body=K1)
            cap = bf.cap
            c = bf.center
            sup_phi = phi.sup_abs(float(np.abs(c).max()) + r0 + 1.0)
            func = bf.func
            if phi.kind == "zero":
                memo: list = []

                def func(q, c=c, cap=cap, P=P, memo=memo):
                    # the padded grid is requested twice; keep the last call
                    if memo and memo[0].shape == q.shape and np.array_equal(memo[0], q):
                        return memo[1]
                    v = np.minimum(_ball_distance(P, c, r0, q), cap)
                    memo[:] = [np.array(q), v]
                    return v
                # the closed form must reproduce the sampled barrier on the grid
                agree = float(np.abs(func(pts) - bf.values).max())
                if agree > 1e-5:
                    raise RuntimeError(f"barrier closed form disagrees by {agree:.2e}")

            def beyond(r, c=c, cap=cap, cmin=cmin, sup_phi=sup_phi):
                # |z - c|_2 >= r - |c|_inf - r0 on the complement of the box of half-width r
                if cmin * (r - float(np.abs(c).max()) - r0) - sup_phi >= cap:
                    return cap, cap
                return -sup_phi, cap

            ext = ExteriorRule.function(func, 2, bounds=(-sup_phi, cap), center=(0.0, 0.0), beyond=beyond)
            field = GridField(np.array([-1.0, -1.0]), h, bf.values.reshape(X.shape[:2]), ext)
            op = apply_operator(ker, field, win, stencil=st)
            upper = float(op.upper.max())
            Vp = field.extended(st.pad)
            C = _second_difference_cap(Vp, wnodes + st.pad, st.offsets, h, tau, cap)
            C = max(C, 0.0)
            C_hat = (ker.Lam + ker.lam) * C * sigma * scale
            bound = C_hat * tau ** (2 - 2 * ker.s) / (2 * ker.s0)
            j = int(np.argmax(op.upper))
            recs.append(_rec(f"barrier/k{k}/t{t0:.1f}", "M+ barrier <= C_hat tau^(2-2s) / (2 s0) on the window",
                             upper <= bound and bf.cert_dominates <= 1e-10, bound - upper,
                             field.node_coords(op.nodes[j])))
            rows.append(BarrierBoundRow(k, float(t0), upper, bound, C, bf.cert_dominates))
    return recs, rows


# ---------------------------------------------------------------------------
# smoothing sweep


def sweep_checks(sr, tol: float = 1e-8, c_ratio: float = 3.0, i_factor: float = 10.0) -> list[CheckRecord]:
    """Pass/fail records for a :class:`SweepResult`.

    * nesting: every support-function gap ``h_k - h_{k+1}`` is positive;
    * obstacle rate: each measured ``C`` is at most ``C_theory`` and
      ``max C / min C <= c_ratio``;
    * solution differences are nonincreasing in ``k``;
    * window operator values stay below ``i_factor * max(I_1, 10 tol)``.
    """
    recs = []
    nm = min(sr.nesting_margin) if sr.nesting_margin else np.inf
    recs.append(_rec("sweep/nesting", "K°_{k+1} inside int K°_k", nm > 0, nm))
    C = np.array([lv.C_measured for lv in sr.levels])
    Cpos = C[C > 0]
    ratio = float(Cpos.max() / Cpos.min()) if len(Cpos) else 1.0
    recs.append(_rec("sweep/obstacle_rate", "|rho_k - rho| <= C delta_k diam(U)",
                     bool(np.all(C <= sr.C_theory)), float(sr.C_theory - C.max())))
    recs.append(_rec("sweep/rate_stability", "measured C stable in k", ratio <= c_ratio, c_ratio - ratio))
    d = np.asarray(sr.diffs)
    # differences at round-off level count as settled
    floor = 10 * tol
    inc = np.diff(d)
    ok = bool(np.all((inc <= 1e-12) | (d[1:] <= floor))) if len(d) > 1 else True
    recs.append(_rec("sweep/differences", "sup|u_{k+1} - u_k| nonincreasing", ok,
                     float(-inc.max()) if len(inc) else 0.0))
    wI = np.array([lv.window_I for lv in sr.levels])
    cap = i_factor * max(wI[0], 10 * tol)
    recs.append(_rec("sweep/window_operator", "sup |I u_k| on the window bounded in k",
                     bool(wI.max() <= cap), float(cap - wI.max())))
    return recs
