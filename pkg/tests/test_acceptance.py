"""Acceptance criteria 1-12.

Each test records one PASS/FAIL line (printed in the pytest terminal
summary, or directly when this file is run as a script) and asserts
both the criterion and its runtime limit.
"""

from __future__ import annotations

import dataclasses
import sys
import time

import numpy as np
import pytest

from nlgc.constraint_solver import (
    SolveConfig,
    SolverError,
    smoothing_sweep,
    solve,
)
from nlgc.convex_geometry import (
    BodyError,
    ConvexBody,
    diameter,
    gauge_eval,
    gauge_jet,
    hausdorff,
    polar,
    resolution,
    smoothing_sequence,
    support_eval,
)
from nlgc.diagnostics import (
    barrier_bound_check,
    complementarity_check,
    decompose,
    euclidean_battery,
    sweep_checks,
)
from nlgc.domain_obstacles import (
    Domain,
    ExteriorData,
    ObstacleProblem,
    characteristic_monotonicity,
    interior_hessian_field,
    validate_exterior,
)
from nlgc.nonlocal_operators import (
    ExteriorRule,
    GridField,
    KernelSpec,
    apply_operator,
    build_stencil,
    local_limit_probe,
)

RESULTS: list[str] = []


class Criterion:
    """Times a block, records a PASS/FAIL line and asserts both parts."""

    def __init__(self, num: int, title: str, limit: float):
        self.num, self.title, self.limit = num, title, limit
        self.detail = ""
        self.ok = False

    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, et, ev, tb):
        dt = time.perf_counter() - self.t0
        passed = et is None and self.ok and dt <= self.limit
        why = "" if et is None else f" [{et.__name__}: {ev}]"
        line = (f"{'PASS' if passed else 'FAIL'} criterion {self.num:2d}: {self.title} "
                f"({self.detail}; {dt:.1f}s / limit {self.limit:.0f}s){why}")
        RESULTS.append(line)
        if et is None:
            assert self.ok, line
            assert dt <= self.limit, line
        return False


def _bodies():
    return {
        "ball": ConvexBody.ball(1.0),
        "ellipse": ConvexBody.ellipse(1.5, 0.6),
        "square": ConvexBody.square(1.0),
        "pentagon": ConvexBody.regular_polygon(5, 1.0, 0.3),
        "interval": ConvexBody.interval(1.0, 2.0),
    }


def _sampled(body: ConvexBody, m: int = 720) -> ConvexBody:
    th = 2 * np.pi * np.arange(m) / m
    return ConvexBody.support_samples(support_eval(body, np.column_stack([np.cos(th), np.sin(th)])))


# ---------------------------------------------------------------------------


def test_c01_gauge_identities():
    rng = np.random.default_rng(1)
    worst = {}
    with Criterion(1, "gauge identities on five bodies and sampled copies", 10) as c:
        bodies = dict(_bodies())
        for k in ("ball", "ellipse", "pentagon"):
            bodies[k + "_sampled"] = _sampled(bodies[k])
        ok = True
        for name, K in bodies.items():
            n = K.dim
            tol = 1e-6 if name.endswith("_sampled") else 1e-10
            x = rng.normal(size=(10_000, n))
            y = rng.normal(size=(10_000, n))
            t = rng.uniform(0.01, 10, size=10_000)
            X, Y = (x[:, 0], y[:, 0]) if n == 1 else (x, y)
            gx, gy = gauge_eval(K, X), gauge_eval(K, Y)
            sub = float(np.max(gauge_eval(K, X + Y) - gx - gy))
            hom = float(np.max(np.abs(gauge_eval(K, (t[:, None] * x).squeeze() if n == 1 else t[:, None] * x)
                                      - t * gx) / np.maximum(1, t * gx)))
            hy = support_eval(K, Y)
            dots = np.sum(x * y, axis=1)
            cs = float(np.max(dots - gx * hy))
            # equality at the support point of y; the spline gradient of a sampled
            # polygon is only first order near its corner normals, so skip those
            eq = 0.0
            if name != "pentagon_sampled":
                z = gauge_jet(polar(K), Y).grad.reshape(-1, n)
                eq = float(np.max(np.abs(np.sum(z * y, axis=1) / gauge_eval(K, z.squeeze() if n == 1 else z) - hy)
                                  / np.maximum(1, hy)))
            worst[name] = max(sub, hom, cs)
            ok &= worst[name] <= tol
            # mixing the spline support value with the polygon gauge costs O(1/M^2)
            ok &= eq <= (tol if tol < 1e-6 else 10 * (2 * np.pi / 720) ** 2)
            worst[name + "_eq"] = eq
            if name in ("ball", "ellipse"):
                g = gauge_jet(K, x).grad
                dev = float(np.max(np.abs(support_eval(K, g) - 1)))
                worst[name + "_norm"] = dev
                ok &= dev <= 1e-8
        c.ok = bool(ok)
        c.detail = "worst " + ", ".join(f"{k}={v:.1e}" for k, v in worst.items())


def test_c02_bipolarity():
    with Criterion(2, "polar(polar(K)) = K within 2 res diam", 5) as c:
        bodies = dict(_bodies())
        for k in ("ball", "ellipse", "square", "pentagon"):
            bodies[k + "_sampled"] = _sampled(bodies[k])
        margins = {}
        for name, K in bodies.items():
            d = hausdorff(polar(polar(K)), K)
            bound = max(2 * resolution(K) * diameter(K), 1e-10)
            margins[name] = bound - d
        c.ok = all(m >= 0 for m in margins.values())
        c.detail = f"min margin {min(margins.values()):.2e}"


def test_c03_euclidean_battery():
    with Criterion(3, "Euclidean closed forms (rho, D2 rho, det Q, ridge, q(t))", 10) as c:
        recs = euclidean_battery()
        c.ok = all(r.passed for r in recs)
        c.detail = ", ".join(f"{r.check_id.split('/')[-1]}:{'ok' if r.passed else 'bad'}" for r in recs)


def test_c04_hessian_formula():
    with Criterion(4, "interior Hessian formula vs central differences, 128^2 grid", 60) as c:
        U = Domain.disk()
        K = ConvexBody.ellipse(1.0, 0.5)
        prob = ObstacleProblem(U, K, ExteriorData.zero(2))
        n = 128
        g = -1 + (2.0 / n) * np.arange(n + 1)
        pts = np.stack(np.meshgrid(g, g, indexing="ij"), axis=-1).reshape(-1, 2)
        eps = 2.5e-4
        pts = pts[U.distance(pts) > 2 * eps]
        ih = interior_hessian_field(prob, pts)
        keep = ih.detQ >= 0.1
        x, H = pts[keep], ih.hess[keep]
        # central differences with step eps at each node
        sh = eps * np.array([[1, 0], [-1, 0], [0, 1], [0, -1], [1, 1], [1, -1], [-1, 1], [-1, -1]])
        v0, t0 = prob.minimize(x)
        V, T = [], []
        for d in sh:
            v, t = prob.minimize(x + d)
            V.append(v)
            T.append(t)
        V, T = np.array(V), np.array(T)
        fxx = (V[0] + V[1] - 2 * v0) / eps**2
        fyy = (V[2] + V[3] - 2 * v0) / eps**2
        fxy = (V[4] - V[5] - V[6] + V[7]) / (4 * eps**2)
        F = np.stack([np.stack([fxx, fxy], -1), np.stack([fxy, fyy], -1)], -2)
        # stencils that straddle the ridge see a jump in the closest point
        jump = np.abs(np.angle(np.exp(2j * np.pi * (T - t0[None])))).max(axis=0)
        smooth = jump <= 0.05
        rel = (np.linalg.norm(F - H, axis=(1, 2)) / np.maximum(np.linalg.norm(H, axis=(1, 2)), 1e-12))[smooth]
        c.ok = bool(rel.max() <= 1e-3) and len(rel) > 1000
        c.detail = (f"{len(rel)} nodes with det Q >= 0.1, max rel err {rel.max():.2e}, "
                    f"{int((~smooth).sum())} ridge-straddling stencils excluded")


def test_c05_monotonicity():
    with Criterion(5, "D2 rho nonincreasing along characteristics, Riccati oracle", 30) as c:
        th = np.pi * np.arange(8) / 8
        xis = np.column_stack([np.cos(th), np.sin(th)])
        cases = [
            (Domain.disk(), ConvexBody.ellipse(1.0, 0.5), ExteriorData.zero(2)),
            (Domain.disk(), ConvexBody.ball(1.0), ExteriorData.radial_quadratic(2, 0.25)),
            (Domain.ellipse(1.2, 0.8), ConvexBody.ellipse(1.3, 0.7), ExteriorData.zero(2)),
        ]
        inc, dev = -np.inf, 0.0
        for U, K, phi in cases:
            for t0 in np.arange(50) / 50:
                r = characteristic_monotonicity(U, K, phi, float(t0), xis)
                inc = max(inc, r.max_increase)
                dev = max(dev, r.max_rel_dev)
        c.ok = inc <= 1e-8 and dev <= 1e-5
        c.detail = f"max increase {inc:.1e}, Riccati rel dev {dev:.1e}"


def test_c06_operator_consistency():
    with Criterion(6, "s -> 1 limit on a Gaussian and monotone weights", 30) as c:
        f = lambda p: np.exp(-np.sum(p * p, axis=1))  # noqa: E731

        def beyond(r):
            return 0.0, float(np.exp(-r * r))

        rows = local_limit_probe(f, lambda x: -2.0 * f(np.atleast_2d(x))[0], [0.0], s_values=(0.99,),
                                 h=1 / 64, halfwidth=4.0, bounds=(0.0, 1.0), beyond=beyond)
        dev = rows[0].rel_dev
        # exhaustive single-node perturbation on 64 nodes
        n = 64
        h = 1 / n
        rng = np.random.default_rng(0)
        worst = np.inf
        for ker in (KernelSpec(s=0.5), KernelSpec(s=0.3, lam=0.5, Lam=2, kind="pucci_plus"),
                    KernelSpec(s=0.8, lam=0.5, Lam=2, kind="pucci_minus")):
            vals = rng.normal(size=n)
            u = GridField(np.array([0.0]), h, vals, ExteriorRule.zero(1))
            st = build_stencil(ker, 1, h, h * (n - 1))
            base = apply_operator(ker, u, None, st).value
            worst = min(worst, float(st.weights.min()))
            for j in range(n):
                v = vals.copy()
                v[j] += 0.1
                d = apply_operator(ker, u.with_values(v), None, st).value - base
                d[j] = 0.0
                worst = min(worst, float(d.min()) / 0.1)
        c.ok = dev <= 0.05 and worst >= 0
        c.detail = f"s=0.99 rel dev {dev:.3%}, min weight/response {worst:.2e}"


def test_c07_zero_fixed_point():
    with Criterion(7, "phi = 0 solves to u = 0", 5) as c:
        cases = [
            SolveConfig(Domain.interval(), ConvexBody.interval(), ExteriorData.zero(1), KernelSpec(s=0.5), 1 / 64),
            SolveConfig(Domain.interval(), ConvexBody.interval(1, 2), ExteriorData.zero(1),
                        KernelSpec(s=0.3, lam=0.5, Lam=2, kind="pucci_plus"), 1 / 64, formulation="gradient"),
            SolveConfig(Domain.disk(), ConvexBody.square(), ExteriorData.zero(2), KernelSpec(s=0.5), 1 / 16),
        ]
        worst_u = worst_r = 0.0
        its = 0
        for cfg in cases:
            r = solve(cfg, holder_tau=None)
            worst_u = max(worst_u, float(np.abs(r.u).max()))
            worst_r = max(worst_r, r.report.residual)
            its = max(its, r.report.iterations)
        c.ok = worst_u <= 1e-12 and worst_r <= 1e-12 and its <= 2
        c.detail = f"max|u| {worst_u:.1e}, residual {worst_r:.1e}, iterations {its}"


def _c8_cfg(h: float, **kw) -> SolveConfig:
    return SolveConfig(Domain.interval(), ConvexBody.interval(), ExteriorData.radial_quadratic(1, 0.4),
                       KernelSpec(s=0.7), h, **kw)


def test_c08_complementarity():
    with Criterion(8, "1D solver residual, sandwich and gradient certificate", 120) as c:
        out = []
        for h in (1 / 128, 1 / 256):
            r = solve(_c8_cfg(h), holder_tau=None)
            d = r.disc
            sand = bool(np.all(r.u <= d.rho) and np.all(r.u >= -d.rho_bar))
            g = float(np.maximum(r.H - 1, 0).max())
            out.append((r.report.residual, sand, g))
        (res1, s1, g1), (_, s2, g2) = out
        # below the floor the certificate is rounding in u/h, which grows as h shrinks
        floor = 1e-12
        c.ok = res1 <= 1e-8 and s1 and s2 and g1 <= 0.05 and (g2 <= g1 or g2 <= floor)
        c.detail = f"residual {res1:.1e}, sandwich {s1 and s2}, grad cert {g1:.2e} -> {g2:.2e}"


def test_c09_equivalence():
    with Criterion(9, "double obstacle and gradient forms agree under refinement", 600) as c:
        diffs = []
        for h in (1 / 64, 1 / 128, 1 / 256):
            a = solve(_c8_cfg(h), holder_tau=None)
            b = solve(_c8_cfg(h, formulation="gradient"), holder_tau=None)
            diffs.append(float(np.abs(a.u - b.u).max()))
        floor = 1e-10
        ratios = [d2 / d1 if d1 > floor else 0.0 for d1, d2 in zip(diffs[:-1], diffs[1:])]
        # differences at round-off level are converged; the ratio is then not informative
        rat_ok = all(r <= 0.7 or (d2 <= floor) for r, d2 in zip(ratios, diffs[1:]))
        c.ok = diffs[1] <= 5e-2 and rat_ok
        c.detail = "sup diffs " + ", ".join(f"{d:.1e}" for d in diffs)


def test_c10_smoothing_sweep():
    with Criterion(10, "smoothing sweep k = 1..5 with the square gauge", 900) as c:
        K = ConvexBody.square()
        _, cert = smoothing_sequence(polar(K), 5)
        cfg = SolveConfig(Domain.disk(), K, ExteriorData.radial_quadratic(2, 0.25), KernelSpec(s=0.5), 1 / 16)
        sr = smoothing_sweep(cfg, k_max=5)
        recs = sweep_checks(sr, tol=cfg.tol)
        c.ok = cert.ok and all(r.passed for r in recs)
        C = [lv.C_measured for lv in sr.levels]
        c.detail = (f"nesting {min(cert.nesting_margin):.1e}, C {min(C):.2f}..{max(C):.2f} "
                    f"(theory {sr.C_theory:.2f}), diffs " + ", ".join(f"{d:.1e}" for d in sr.diffs)
                    + f", window |I u| <= {max(lv.window_I for lv in sr.levels):.1e}")


def test_c11_barrier_bound():
    with Criterion(11, "barrier operator bound at 10 boundary points, k = 1..3", 300) as c:
        recs, rows = barrier_bound_check()
        c.ok = len(rows) == 30 and all(r.passed for r in recs)
        worst = max(rows, key=lambda r: r.op_max / r.bound)
        c.detail = f"max op/bound {worst.op_max / worst.bound:.3f} (k={worst.k}, t0={worst.t0:.1f})"


def test_c12_negative_controls():
    with Criterion(12, "fault injection, dented samples, steep phi", 5) as c:
        cfg = SolveConfig(Domain.interval(), ConvexBody.interval(), ExteriorData.radial_quadratic(1, 0.4),
                          KernelSpec(s=0.7), 1 / 64)
        r = solve(cfg, holder_tau=None)
        dec = decompose(r)
        j = int(np.flatnonzero(dec.elastic)[len(np.flatnonzero(dec.elastic)) // 2])
        u = r.u.copy()
        u[j] += 1e-3
        A = r.disc.residual(u)[1]
        bad = complementarity_check(dataclasses.replace(r, u=u, A=A))
        hit = (not bad.passed) and np.allclose(bad.location, r.disc.x[j])
        hs = np.ones(720)
        hs[100:110] -= 0.05
        try:
            ConvexBody.support_samples(hs)
            dent = False
        except BodyError:
            dent = True
        steep = ExteriorData.affine([1.5])
        rep = validate_exterior(steep, ConvexBody.interval(), Domain.interval())
        try:
            solve(dataclasses.replace(cfg, phi=steep))
            rejected = False
        except SolverError:
            rejected = True
        c.ok = bool(hit and dent and not rep.ok and rejected)
        c.detail = f"injected node caught {hit}, dent rejected {dent}, steep phi rejected {rejected}"


if __name__ == "__main__":
    tests = [v for k, v in sorted(globals().items()) if k.startswith("test_c")]
    for t in tests:
        try:
            t()
        except AssertionError:
            pass
        except Exception as exc:  # noqa: BLE001
            if not RESULTS or "criterion" not in RESULTS[-1]:
                RESULTS.append(f"FAIL {t.__name__}: {exc}")
        print(RESULTS[-1], flush=True)
    sys.exit(0 if all(r.startswith("PASS") for r in RESULTS) else 1)
