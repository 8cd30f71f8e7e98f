"""Domains, exterior data and the gauge-distance obstacles.

For a domain ``U``, a body ``K`` and exterior data ``phi`` the upper
obstacle is

    rho(x) = min_{y on dU} gamma_K(x - y) + phi(y)

and the lower one ``rho_bar`` is the same construction for ``-K`` and
``-phi``.  Both are extended by the exterior data off ``U`` (``phi`` and
``-phi`` respectively), so that ``-rho_bar <= rho``.

Everything here is vectorized over query points.  The boundary is
sampled on ``n_boundary`` parameters and each minimum is refined by a
golden-section search in the boundary parameter.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Any

import numpy as np
from scipy.integrate import solve_ivp

from .convex_geometry import (
    BodyError,
    ConvexBody,
    _gauge_flat,
    _support_flat,
    _support_jet_flat,
    diameter,
    reflect,
)

__all__ = [
    "DomainError",
    "ObstacleError",
    "Domain",
    "ExteriorData",
    "ObstacleProblem",
    "ExteriorReport",
    "validate_exterior",
    "rho_eval",
    "closest_points",
    "boundary_jet",
    "interior_hessian",
    "ridge_scan",
    "characteristic_monotonicity",
    "barrier_field",
    "domain_from_config",
    "exterior_from_config",
]

GOLDEN = 0.5 * (np.sqrt(5.0) - 1.0)


class DomainError(ValueError):
    """Malformed domain or exterior data."""


class ObstacleError(ValueError):
    """A precondition of an obstacle computation fails at a point."""


# ---------------------------------------------------------------------------
# domains


@dataclass
class BoundaryPoints:
    """Boundary samples: position, inward normal, unit tangent, curvature."""

    t: np.ndarray
    y: np.ndarray
    nu: np.ndarray
    tangent: np.ndarray
    kappa: np.ndarray

    def d2dist(self) -> np.ndarray:
        """Hessian of the distance to the boundary, ``-kappa T T^T``."""
        T = self.tangent
        return -self.kappa[:, None, None] * T[:, :, None] * T[:, None, :]


@dataclass(frozen=True, eq=False)
class Domain:
    """A bounded convex domain with a parametrized boundary.

    ``kind`` is ``interval`` (``data = [a, b]``), ``disk``
    (``[cx, cy, r]``), ``ellipse`` (``[cx, cy, a, b]``) or ``square``
    (``[cx, cy, half]``).  Boundary parameters live in ``[0, 1)``; in 1D
    the two boundary points carry ``t = 0`` (left) and ``t = 1`` (right).
    """

    kind: str
    data: np.ndarray

    @classmethod
    def interval(cls, a: float = -1.0, b: float = 1.0) -> "Domain":
        if not a < b:
            raise DomainError("interval domain needs a < b")
        return cls("interval", np.array([a, b], dtype=float))

    @classmethod
    def disk(cls, radius: float = 1.0, center=(0.0, 0.0)) -> "Domain":
        if not radius > 0:
            raise DomainError("disk radius must be positive")
        return cls("disk", np.array([*center, radius], dtype=float))

    @classmethod
    def ellipse(cls, a: float, b: float, center=(0.0, 0.0)) -> "Domain":
        if not (a > 0 and b > 0):
            raise DomainError("ellipse semi-axes must be positive")
        return cls("ellipse", np.array([*center, a, b], dtype=float))

    @classmethod
    def square(cls, half: float = 1.0, center=(0.0, 0.0)) -> "Domain":
        if not half > 0:
            raise DomainError("square half-width must be positive")
        return cls("square", np.array([*center, half], dtype=float))

    @property
    def dim(self) -> int:
        return 1 if self.kind == "interval" else 2

    @property
    def c2(self) -> bool:
        """Whether the boundary is C^2 (the square is not)."""
        return self.kind != "square"

    @property
    def center(self) -> np.ndarray:
        if self.kind == "interval":
            return np.array([0.5 * (self.data[0] + self.data[1])])
        return self.data[:2]

    def bbox(self) -> tuple[np.ndarray, np.ndarray]:
        """Lower and upper corners of the bounding box."""
        if self.kind == "interval":
            return self.data[:1].copy(), self.data[1:].copy()
        c = self.data[:2]
        if self.kind == "disk":
            r = np.array([self.data[2]] * 2)
        elif self.kind == "ellipse":
            r = self.data[2:4]
        else:
            r = np.array([self.data[2]] * 2)
        return c - r, c + r

    @property
    def diameter(self) -> float:
        lo, hi = self.bbox()
        if self.kind == "square":
            return float(np.linalg.norm(hi - lo))
        return float((hi - lo).max())

    @property
    def min_width(self) -> float:
        lo, hi = self.bbox()
        return float((hi - lo).min())

    def distance(self, x) -> np.ndarray:
        """Euclidean distance to the boundary, positive inside."""
        x = np.asarray(x, dtype=float)
        if self.kind == "interval":
            a, b = self.data
            xx = x.reshape(x.shape[:-1]) if (x.ndim > 1 and x.shape[-1] == 1) else x
            return np.minimum(xx - a, b - xx)
        z = x - self.data[:2]
        if self.kind == "disk":
            return self.data[2] - np.linalg.norm(z, axis=-1)
        if self.kind == "square":
            return self.data[2] - np.abs(z).max(axis=-1)
        # ellipse: nearest boundary sample refined by golden search
        pts = z.reshape(-1, 2)
        a, b = self.data[2:4]
        f = lambda t: np.hypot(pts[:, 0] - a * np.cos(2 * np.pi * t),  # noqa: E731
                               pts[:, 1] - b * np.sin(2 * np.pi * t))
        M = 512
        tt = np.arange(M) / M
        j = np.argmin(np.stack([f(np.full(len(pts), t)) for t in tt], axis=1), axis=1)
        _, d = _golden(f, tt[j] - 1.0 / M, tt[j] + 1.0 / M, 60)
        inside = (pts[:, 0] / a) ** 2 + (pts[:, 1] / b) ** 2 < 1
        return np.where(inside, d, -d).reshape(x.shape[:-1])

    def contains(self, x) -> np.ndarray:
        """Strict interior membership."""
        x = np.asarray(x, dtype=float)
        if self.kind == "interval":
            a, b = self.data
            xx = x.reshape(x.shape[:-1]) if (x.ndim > 1 and x.shape[-1] == 1) else x
            return (xx > a) & (xx < b)
        z = x - self.data[:2]
        if self.kind == "disk":
            return np.einsum("...i,...i->...", z, z) < self.data[2] ** 2
        if self.kind == "square":
            return np.abs(z).max(axis=-1) < self.data[2]
        a, b = self.data[2:4]
        return (z[..., 0] / a) ** 2 + (z[..., 1] / b) ** 2 < 1

    def boundary(self, t) -> BoundaryPoints:
        """Boundary points at parameters ``t``."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        if self.kind == "interval":
            a, b = self.data
            right = t >= 0.5
            y = np.where(right, b, a)[:, None]
            nu = np.where(right, -1.0, 1.0)[:, None]
            return BoundaryPoints(t, y, nu, np.zeros_like(nu), np.zeros(len(t)))
        th = 2 * np.pi * np.mod(t, 1.0)
        c = self.data[:2]
        if self.kind == "disk":
            r = self.data[2]
            u = np.column_stack([np.cos(th), np.sin(th)])
            T = np.column_stack([-u[:, 1], u[:, 0]])
            return BoundaryPoints(t, c + r * u, -u, T, np.full(len(t), 1.0 / r))
        if self.kind == "ellipse":
            a, b = self.data[2:4]
            y = c + np.column_stack([a * np.cos(th), b * np.sin(th)])
            dy = np.column_stack([-a * np.sin(th), b * np.cos(th)])
            sp = np.linalg.norm(dy, axis=1)
            T = dy / sp[:, None]
            nu = np.column_stack([-T[:, 1], T[:, 0]])
            kappa = a * b / sp**3
            return BoundaryPoints(t, y, nu, T, kappa)
        # square: perimeter parametrization starting at the lower-right corner
        s = self.data[2]
        q = 4 * np.mod(t, 1.0)
        side = np.minimum(q.astype(int), 3)
        f = q - side
        corners = np.array([[s, -s], [s, s], [-s, s], [-s, -s], [s, -s]])
        y = c + corners[side] + f[:, None] * (corners[side + 1] - corners[side])
        T = (corners[side + 1] - corners[side]) / (2 * s)
        nu = np.column_stack([-T[:, 1], T[:, 0]])
        return BoundaryPoints(t, y, nu, T, np.zeros(len(t)))

    def to_config(self) -> dict[str, Any]:
        d = self.data
        if self.kind == "interval":
            return {"kind": "interval", "a": float(d[0]), "b": float(d[1])}
        if self.kind == "disk":
            return {"kind": "disk", "radius": float(d[2]), "center": d[:2].tolist()}
        if self.kind == "ellipse":
            return {"kind": "ellipse", "a": float(d[2]), "b": float(d[3]), "center": d[:2].tolist()}
        return {"kind": "square", "half": float(d[2]), "center": d[:2].tolist()}


def domain_from_config(cfg: dict[str, Any]) -> Domain:
    if not isinstance(cfg, dict) or "kind" not in cfg:
        raise DomainError("domain config must be an object with a 'kind' key")
    k = cfg["kind"]
    c = tuple(cfg.get("center", (0.0, 0.0)))
    if k == "interval":
        return Domain.interval(float(cfg.get("a", -1.0)), float(cfg.get("b", 1.0)))
    if k == "disk":
        return Domain.disk(float(cfg.get("radius", 1.0)), c)
    if k == "ellipse":
        return Domain.ellipse(float(cfg["a"]), float(cfg["b"]), c)
    if k == "square":
        return Domain.square(float(cfg.get("half", 1.0)), c)
    raise DomainError(f"unknown domain kind {k!r}")


# ---------------------------------------------------------------------------
# exterior data


def _radial_profile(r1: float, r2: float):
    """Polynomials ``psi(t), psi'(t), psi''(t)`` on ``t in [0, 1]``.

    ``psi(r) = r^2`` for ``r <= r1``; on ``[r1, r2]`` the second
    derivative ``2 (1 - t)(1 - c t)`` brings ``psi'`` continuously to 0 so
    that ``psi`` is C^2 and constant beyond ``r2``.
    """
    P = np.polynomial.Polynomial
    L = r2 - r1
    c = 3.0 + 6.0 * r1 / L
    p = P([1.0, -1.0]) * P([1.0, -c])
    ip = p.integ()
    dpsi = 2 * r1 + 2 * L * ip
    psi = r1 * r1 + L * dpsi.integ()
    return psi, dpsi, 2 * p, L


@dataclass(frozen=True, eq=False)
class ExteriorData:
    """Exterior data ``phi`` on the whole space.

    Kinds
    -----
    ``zero``
    ``constant``
        ``phi = value``.
    ``affine``
        ``phi = <slope, x> + value``.
    ``radial_quadratic``
        ``phi = coef * psi(|x - center|)`` with ``psi(r) = r^2`` for
        ``r <= r_quad``, a C^2 polynomial roll-off, and constant for
        ``r >= r_flat``.
    """

    kind: str
    dim: int
    value: float = 0.0
    slope: tuple = ()
    coef: float = 0.0
    center: tuple = ()
    r_quad: float = 1.2
    r_flat: float = 2.0

    def __post_init__(self):
        if self.kind not in ("zero", "constant", "affine", "radial_quadratic"):
            raise DomainError(f"unknown exterior data kind {self.kind!r}")
        if self.kind == "radial_quadratic" and not (0 < self.r_quad < self.r_flat):
            raise DomainError("radial_quadratic needs 0 < r_quad < r_flat")
        if self.kind == "affine" and len(self.slope) != self.dim:
            raise DomainError("affine slope has the wrong dimension")

    @classmethod
    def zero(cls, dim: int) -> "ExteriorData":
        return cls("zero", dim)

    @classmethod
    def constant(cls, dim: int, value: float) -> "ExteriorData":
        return cls("constant", dim, value=float(value))

    @classmethod
    def affine(cls, slope, value: float = 0.0) -> "ExteriorData":
        sl = tuple(float(v) for v in np.atleast_1d(slope))
        return cls("affine", len(sl), value=float(value), slope=sl)

    @classmethod
    def radial_quadratic(cls, dim: int, coef: float, r_quad: float = 1.2,
                         r_flat: float = 2.0, center=None) -> "ExteriorData":
        c = tuple(float(v) for v in (center if center is not None else [0.0] * dim))
        return cls("radial_quadratic", dim, coef=float(coef), center=c,
                   r_quad=float(r_quad), r_flat=float(r_flat))

    def negated(self) -> "ExteriorData":
        return replace(self, value=-self.value, coef=-self.coef,
                       slope=tuple(-v for v in self.slope))

    # evaluation on (N, dim) arrays
    def _radial(self, x: np.ndarray):
        psi, dpsi, ddpsi, L = _radial_profile(self.r_quad, self.r_flat)
        z = x - np.asarray(self.center)
        r = np.linalg.norm(z, axis=1)
        r1, r2 = self.r_quad, self.r_flat
        t = np.clip((r - r1) / L, 0.0, 1.0)
        inner = r <= r1
        v = np.where(inner, r * r, psi(t))
        dv = np.where(inner, 2 * r, dpsi(t))
        ddv = np.where(inner, 2.0, ddpsi(t))
        dv = np.where(r >= r2, 0.0, dv)
        ddv = np.where(r >= r2, 0.0, ddv)
        return z, r, v, dv, ddv

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        pts = x.reshape(-1, self.dim)
        out = self.eval_flat(pts)
        shape = x.shape if self.dim == 1 and x.shape[-1:] != (1,) else x.shape[:-1]
        return out.reshape(shape)

    def eval_flat(self, x: np.ndarray) -> np.ndarray:
        if self.kind == "zero":
            return np.zeros(len(x))
        if self.kind == "constant":
            return np.full(len(x), self.value)
        if self.kind == "affine":
            return x @ np.asarray(self.slope) + self.value
        return self.coef * self._radial(x)[2]

    def grad_flat(self, x: np.ndarray) -> np.ndarray:
        if self.kind in ("zero", "constant"):
            return np.zeros_like(x)
        if self.kind == "affine":
            return np.broadcast_to(np.asarray(self.slope), x.shape).copy()
        z, r, _, dv, _ = self._radial(x)
        inner = r <= self.r_quad
        safe = np.where(r > 0, r, 1.0)
        g = np.where(inner[:, None], 2 * z, dv[:, None] * z / safe[:, None])
        return self.coef * g

    def hess_flat(self, x: np.ndarray) -> np.ndarray:
        n = self.dim
        if self.kind != "radial_quadratic":
            return np.zeros((len(x), n, n))
        z, r, _, dv, ddv = self._radial(x)
        I = np.eye(n)[None]
        safe = np.where(r > 0, r, 1.0)
        zh = z / safe[:, None]
        P = zh[:, :, None] * zh[:, None, :]
        H = ddv[:, None, None] * P + (dv / safe)[:, None, None] * (I - P)
        inner = r <= self.r_quad
        H = np.where(inner[:, None, None], 2.0 * I, H)
        return self.coef * H

    def sup_abs(self, radius: float = np.inf) -> float:
        """``sup |phi|`` (over ``|x| <= radius`` for unbounded kinds)."""
        if self.kind == "zero":
            return 0.0
        if self.kind == "constant":
            return abs(self.value)
        if self.kind == "affine":
            if not np.isfinite(radius):
                return np.inf
            return float(np.linalg.norm(self.slope) * radius + abs(self.value))
        psi = _radial_profile(self.r_quad, self.r_flat)[0]
        return abs(self.coef) * float(psi(1.0))

    def far_constant(self) -> tuple[float, float] | None:
        """``(R, c)`` with ``phi = c`` for ``|x - center| >= R``, if any."""
        if self.kind == "zero":
            return (0.0, 0.0)
        if self.kind == "constant":
            return (0.0, self.value)
        if self.kind == "radial_quadratic":
            psi = _radial_profile(self.r_quad, self.r_flat)[0]
            return (self.r_flat, self.coef * float(psi(1.0)))
        return None

    def to_config(self) -> dict[str, Any]:
        if self.kind == "zero":
            return {"kind": "zero"}
        if self.kind == "constant":
            return {"kind": "constant", "value": self.value}
        if self.kind == "affine":
            return {"kind": "affine", "slope": list(self.slope), "value": self.value}
        return {"kind": "radial_quadratic", "coef": self.coef, "r_quad": self.r_quad,
                "r_flat": self.r_flat, "center": list(self.center)}


def exterior_from_config(cfg: dict[str, Any] | None, dim: int) -> ExteriorData:
    if cfg is None:
        return ExteriorData.zero(dim)
    k = cfg.get("kind", "zero")
    if k == "zero":
        return ExteriorData.zero(dim)
    if k == "constant":
        return ExteriorData.constant(dim, float(cfg.get("value", 0.0)))
    if k == "affine":
        return ExteriorData.affine(cfg["slope"], float(cfg.get("value", 0.0)))
    if k == "radial_quadratic":
        return ExteriorData.radial_quadratic(dim, float(cfg["coef"]),
                                             float(cfg.get("r_quad", 1.2)),
                                             float(cfg.get("r_flat", 2.0)),
                                             cfg.get("center"))
    raise DomainError(f"unknown exterior data kind {k!r}")


@dataclass
class ExteriorReport:
    """Checks on the exterior data.

    ``lipschitz_max`` is the sampled ``sup gamma°(D phi)``; it must be
    below 1.  ``convex_min_eig`` is the smallest Hessian eigenvalue on a
    band of half-width ``band`` around the boundary.
    """

    ok: bool
    lipschitz_max: float
    convex_min_eig: float
    band: float
    messages: list[str] = field(default_factory=list)


def validate_exterior(phi: ExteriorData, body: ConvexBody, domain: Domain,
                      band: float = 0.1, n: int = 201) -> ExteriorReport:
    """Sampled Lipschitz and near-boundary convexity checks for ``phi``."""
    if phi.dim != body.dim or phi.dim != domain.dim:
        raise DomainError("exterior data, body and domain dimensions differ")
    lo, hi = domain.bbox()
    reach = max(phi.r_flat if phi.kind == "radial_quadratic" else 0.0,
                float(np.abs(lo).max()), float(np.abs(hi).max())) + band + 0.5
    c = domain.center
    axes = [np.linspace(ci - reach, ci + reach, n if phi.dim == 2 else 20 * n) for ci in c]
    if phi.dim == 1:
        pts = axes[0][:, None]
    else:
        g = np.meshgrid(*axes, indexing="ij")
        pts = np.stack([gi.ravel() for gi in g], axis=1)
    grad = phi.grad_flat(pts)
    lip = float(_support_flat(body, grad).max())
    d = domain.distance(pts if phi.dim == 2 else pts[:, 0])
    near = np.abs(d) <= band
    H = phi.hess_flat(pts[near])
    mineig = float(np.linalg.eigvalsh(H).min()) if len(H) else 0.0
    msgs = []
    if lip >= 1.0:
        msgs.append(f"exterior data too steep: sup gamma_polar(D phi) = {lip:.6g} >= 1")
    if mineig < -1e-12:
        msgs.append(f"exterior data not convex near the boundary: min eigenvalue {mineig:.3g}")
    return ExteriorReport(not msgs, lip, mineig, band, msgs)


# ---------------------------------------------------------------------------
# obstacles


def _golden(f, a: np.ndarray, b: np.ndarray, iters: int):
    """Vectorized golden-section minimization of ``f`` on ``[a, b]``."""
    a = np.array(a, dtype=float)
    b = np.array(b, dtype=float)
    c = b - GOLDEN * (b - a)
    d = a + GOLDEN * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(iters):
        left = fc < fd
        b = np.where(left, d, b)
        a = np.where(left, a, c)
        nc = b - GOLDEN * (b - a)
        nd = a + GOLDEN * (b - a)
        # reuse the surviving interior point
        c_new = np.where(left, nc, d)
        d_new = np.where(left, c, nd)
        fnew = f(np.where(left, c_new, d_new))
        fc, fd = np.where(left, fnew, fd), np.where(left, fc, fnew)
        c, d = c_new, d_new
    t = np.where(fc < fd, c, d)
    return t, np.minimum(fc, fd)


@dataclass(frozen=True, eq=False)
class ObstacleProblem:
    """Bundle of ``(U, K, phi)`` with the boundary sampling resolution."""

    domain: Domain
    body: ConvexBody
    phi: ExteriorData
    n_boundary: int = 720

    def __post_init__(self):
        if not (self.domain.dim == self.body.dim == self.phi.dim):
            raise DomainError("domain, body and exterior data dimensions differ")

    def side(self, side: str) -> tuple[ConvexBody, ExteriorData]:
        """``(K, phi)`` for ``rho`` and ``(-K, -phi)`` for ``rho_bar``."""
        if side == "rho":
            return self.body, self.phi
        if side == "rho_bar":
            return reflect(self.body), self.phi.negated()
        raise ValueError("side must be 'rho' or 'rho_bar'")

    def boundary_params(self) -> np.ndarray:
        if self.domain.dim == 1:
            return np.array([0.0, 1.0])
        return np.arange(self.n_boundary) / self.n_boundary

    # objective f(x, t) = gamma(x - y(t)) + phi(y(t))
    def objective(self, x: np.ndarray, t: np.ndarray, side: str = "rho") -> np.ndarray:
        K, ph = self.side(side)
        bp = self.domain.boundary(t)
        return _gauge_flat(K, x - bp.y) + ph.eval_flat(bp.y)

    def sample_objective(self, x: np.ndarray, side: str = "rho") -> np.ndarray:
        """Objective on all boundary samples, shape ``(N, M)``."""
        K, ph = self.side(side)
        bp = self.domain.boundary(self.boundary_params())
        py = ph.eval_flat(bp.y)
        N, M = len(x), len(bp.t)
        out = np.empty((N, M))
        step = max(1, 2_000_000 // M)
        for i in range(0, N, step):
            xi = x[i:i + step]
            z = (xi[:, None, :] - bp.y[None]).reshape(-1, x.shape[1])
            out[i:i + step] = _gauge_flat(K, z).reshape(len(xi), M) + py
        return out

    def minimize(self, x: np.ndarray, side: str = "rho", iters: int = 64):
        """Refined minimum value and boundary parameter for each point."""
        x = np.asarray(x, dtype=float).reshape(-1, self.domain.dim)
        F = self.sample_objective(x, side)
        j = np.argmin(F, axis=1)
        if self.domain.dim == 1:
            return F[np.arange(len(x)), j], self.boundary_params()[j]
        M = F.shape[1]
        t0 = j / M
        # the boundary parameter is periodic: search across the wrap
        vals = []
        for i0 in range(0, len(x), 200_000):
            sl = slice(i0, i0 + 200_000)
            xs = x[sl]
            f = lambda t, xs=xs: self.objective(xs, t, side)  # noqa: E731
            tt, ff = _golden(f, t0[sl] - 1.0 / M, t0[sl] + 1.0 / M, iters)
            vals.append((tt, ff))
        t = np.concatenate([v[0] for v in vals]) if vals else np.zeros(0)
        fv = np.concatenate([v[1] for v in vals]) if vals else np.zeros(0)
        fsample = F[np.arange(len(x)), j]
        better = fv <= fsample
        return np.where(better, fv, fsample), np.mod(np.where(better, t, t0), 1.0)

    def values(self, x, side: str = "rho") -> np.ndarray:
        """Obstacle values, extended by the exterior data off ``U``."""
        x = np.asarray(x, dtype=float)
        pts = x.reshape(-1, self.domain.dim)
        inside = self.domain.contains(pts if self.domain.dim == 2 else pts[:, 0])
        out = np.empty(len(pts))
        ph = self.side(side)[1]
        out[~inside] = ph.eval_flat(pts[~inside])
        if inside.any():
            out[inside] = self.minimize(pts[inside], side)[0]
        shape = x.shape if self.domain.dim == 1 and x.shape[-1:] != (1,) else x.shape[:-1]
        return out.reshape(shape)


def rho_eval(domain: Domain, body: ConvexBody, phi: ExteriorData, x, side: str = "rho",
             n_boundary: int = 720) -> np.ndarray:
    """Evaluate ``rho`` (``side="rho"``) or ``rho_bar`` (``side="rho_bar"``).

    Points outside ``U`` receive ``phi`` (resp. ``-phi``), so that
    ``-rho_bar <= rho`` everywhere.
    """
    return ObstacleProblem(domain, body, phi, n_boundary).values(x, side)


# ---------------------------------------------------------------------------
# closest points


@dataclass
class ClosestPoints:
    """Boundary minimizers of the obstacle objective at one point.

    ``multiple`` flags membership in the singular set where the minimizer
    is not unique; ``degenerate`` marks a continuum of minimizers (for
    example the center of a disk under a round gauge).
    """

    x: np.ndarray
    value: float
    t: np.ndarray
    y: np.ndarray
    multiple: bool
    degenerate: bool


def _near_min_runs(F: np.ndarray, tol_rel: float):
    """Mask of near-minimal samples and the count of cyclic runs."""
    fmin = F.min(axis=1, keepdims=True)
    spread = F.max(axis=1, keepdims=True) - fmin
    scale = np.abs(F).max(axis=1, keepdims=True)
    thr = tol_rel * np.maximum(spread, 1e-300) + 8 * np.finfo(float).eps * np.maximum(scale, 1.0)
    mask = F <= fmin + thr
    starts = mask & ~np.roll(mask, 1, axis=1)
    runs = starts.sum(axis=1)
    full = mask.all(axis=1)
    return mask, runs, full


def closest_points(domain: Domain, body: ConvexBody, phi: ExteriorData, x,
                   side: str = "rho", tol_rel: float = 1e-6, n_boundary: int = 720) -> ClosestPoints:
    """All boundary minimizers at ``x`` up to relative tolerance ``tol_rel``.

    The tolerance is relative to the spread of the objective over the
    boundary.  Each cluster of near-minimal samples is refined separately
    and kept when its refined value is within tolerance of the best.
    """
    prob = ObstacleProblem(domain, body, phi, n_boundary)
    return _closest(prob, np.asarray(x, dtype=float).reshape(domain.dim), side, tol_rel)


def _closest(prob: ObstacleProblem, x: np.ndarray, side: str, tol_rel: float) -> ClosestPoints:
    F = prob.sample_objective(x[None], side)
    tb = prob.boundary_params()
    if prob.domain.dim == 1:
        f = F[0]
        spread = abs(f[1] - f[0])
        scale = max(abs(f).max(), 1.0)
        tie = spread <= tol_rel * scale
        idx = np.array([0, 1]) if tie else np.array([int(np.argmin(f))])
        return ClosestPoints(x, float(f.min()), tb[idx], prob.domain.boundary(tb[idx]).y,
                             bool(tie), False)
    mask, runs, full = _near_min_runs(F, tol_rel)
    m = mask[0]
    M = len(m)
    if full[0]:
        t = np.array([0.0])
        v = float(F.min())
        return ClosestPoints(x, v, t, prob.domain.boundary(t).y, True, True)
    # split the cyclic mask into runs
    start = int(np.flatnonzero(~m)[0])
    order = (np.arange(M) + start) % M
    clusters, cur = [], []
    for j in order:
        if m[j]:
            cur.append(j)
        elif cur:
            clusters.append(cur)
            cur = []
    if cur:
        clusters.append(cur)
    ts, vs = [], []
    for cl in clusters:
        lo = (cl[0] - 1) / M
        hi = (cl[0] + len(cl)) / M
        f = lambda t: prob.objective(np.repeat(x[None], len(np.atleast_1d(t)), 0),  # noqa: E731
                                     np.atleast_1d(t), side)
        tt, ff = _golden(f, np.array([lo]), np.array([hi]), 80)
        ts.append(float(np.mod(tt[0], 1.0)))
        vs.append(float(ff[0]))
    vs = np.array(vs)
    ts = np.array(ts)
    spread = float(F.max() - F.min())
    keep = vs <= vs.min() + tol_rel * spread + 8 * np.finfo(float).eps * max(abs(vs).max(), 1.0)
    t = ts[keep]
    return ClosestPoints(x, float(vs.min()), t, prob.domain.boundary(t).y,
                         bool(keep.sum() > 1), False)


# ---------------------------------------------------------------------------
# boundary jet


@dataclass
class BoundaryJet:
    """Second-order data of the obstacle at boundary points.

    ``lam`` solves ``gamma°(D phi + lam nu) = 1``; ``mu = D phi + lam nu``
    is the gradient of the obstacle at ``y``; ``dgp``/``d2gp`` are the
    gradient and Hessian of ``gamma°`` at ``mu``; ``hess`` is the
    boundary Hessian of the obstacle.
    """

    t: np.ndarray
    y: np.ndarray
    nu: np.ndarray
    phi: np.ndarray
    lam: np.ndarray
    mu: np.ndarray
    dgp: np.ndarray
    d2gp: np.ndarray
    d2gp_defined: np.ndarray
    transversality: np.ndarray
    X: np.ndarray
    hess: np.ndarray


def _boundary_jet(prob: ObstacleProblem, t: np.ndarray, side: str = "rho",
                  transversal_floor: float = 1e-12) -> BoundaryJet:
    K, ph = prob.side(side)
    bp = prob.domain.boundary(t)
    n = prob.domain.dim
    N = len(bp.t)
    Dphi = ph.grad_flat(bp.y)
    D2phi = ph.hess_flat(bp.y)
    nu = bp.nu
    g0 = _support_flat(K, Dphi)
    if np.any(g0 >= 1.0):
        j = int(np.argmax(g0))
        raise ObstacleError(
            f"gamma_polar(D phi) = {g0[j]:.6g} >= 1 at boundary point {bp.y[j]}"
        )
    g = lambda lam: _support_flat(K, Dphi + lam[:, None] * nu) - 1.0  # noqa: E731
    lo = np.zeros(N)
    hi = np.ones(N)
    for _ in range(80):
        pos = g(hi) > 0
        if pos.all():
            break
        lo = np.where(pos, lo, hi)
        hi = np.where(pos, hi, 2 * hi)
    for _ in range(64):
        mid = 0.5 * (lo + hi)
        pos = g(mid) > 0
        hi = np.where(pos, mid, hi)
        lo = np.where(pos, lo, mid)
    lam = 0.5 * (lo + hi)
    for _ in range(3):
        jet = _support_jet_flat(K, Dphi + lam[:, None] * nu)
        dg = np.einsum("ij,ij->i", jet.grad, nu)
        step = np.where(dg > 0, (jet.value - 1.0) / np.where(dg > 0, dg, 1.0), 0.0)
        new = lam - step
        inside = (new >= lo - 1e-15) & (new <= hi + 1e-15)
        lam = np.where(inside, new, lam)
    mu = Dphi + lam[:, None] * nu
    jet = _support_jet_flat(K, mu)
    tr = np.einsum("ij,ij->i", jet.grad, nu)
    if np.any(tr <= transversal_floor):
        j = int(np.argmin(tr))
        raise ObstacleError(f"transversality fails at boundary point {bp.y[j]}: <D gamma_polar, nu> = {tr[j]:.3g}")
    X = jet.grad[:, :, None] * nu[:, None, :] / tr[:, None, None]
    IX = np.eye(n)[None] - X
    A = D2phi + lam[:, None, None] * bp.d2dist()
    hess = np.transpose(IX, (0, 2, 1)) @ A @ IX
    return BoundaryJet(bp.t, bp.y, nu, ph.eval_flat(bp.y), lam, mu, jet.grad, jet.hess,
                       jet.hess_defined, tr, X, hess)


def boundary_jet(domain: Domain, body: ConvexBody, phi: ExteriorData, t,
                 side: str = "rho") -> BoundaryJet:
    """Boundary gradient and Hessian of the obstacle at parameters ``t``.

    Raises
    ------
    ObstacleError
        If ``gamma°(D phi(y)) >= 1`` or transversality fails.
    """
    if domain.dim == 2 and not domain.c2:
        bp = domain.boundary(t)
        q = np.mod(4 * bp.t, 1.0)
        if np.any(np.minimum(q, 1 - q) < 1e-12):
            raise ObstacleError("boundary Hessian is undefined at a corner of the domain")
    return _boundary_jet(ObstacleProblem(domain, body, phi), np.atleast_1d(np.asarray(t, float)), side)


# ---------------------------------------------------------------------------
# interior Hessian and ridge


@dataclass
class InteriorHessian:
    """Interior Hessian of the obstacle along characteristics.

    Attributes
    ----------
    x, value : arrays
        Query points and obstacle values.
    t : array
        Boundary parameter of the (refined) closest point.
    hess : array
        ``D^2 rho(x) = D^2 rho(y) Q^{-1}``.
    W, Q, detQ : arrays
        ``W = -D^2 gamma°(mu) D^2 rho(y)`` and
        ``Q = I - (rho(x) - phi(y)) W``.
    residual : array
        ``|x - y - (rho(x) - phi(y)) D gamma°(mu)|``.
    jet : BoundaryJet
    """

    x: np.ndarray
    value: np.ndarray
    t: np.ndarray
    hess: np.ndarray
    W: np.ndarray
    Q: np.ndarray
    detQ: np.ndarray
    residual: np.ndarray
    jet: BoundaryJet


def interior_hessian_field(prob: ObstacleProblem, x, side: str = "rho") -> InteriorHessian:
    """Vectorized interior Hessian (no ridge checks)."""
    x = np.asarray(x, dtype=float).reshape(-1, prob.domain.dim)
    val, t = prob.minimize(x, side)
    jet = _boundary_jet(prob, t, side)
    n = prob.domain.dim
    W = -jet.d2gp @ jet.hess
    s = val - jet.phi
    Q = np.eye(n)[None] - s[:, None, None] * W
    detQ = np.linalg.det(Q)
    safe = np.where(np.abs(detQ)[:, None, None] > 0, Q, np.eye(n)[None])
    hess = np.transpose(np.linalg.solve(np.transpose(safe, (0, 2, 1)),
                                        np.transpose(jet.hess, (0, 2, 1))), (0, 2, 1))
    res = np.linalg.norm(x - jet.y - s[:, None] * jet.dgp, axis=1)
    return InteriorHessian(x, val, t, hess, W, Q, detQ, res, jet)


def interior_hessian(domain: Domain, body: ConvexBody, phi: ExteriorData, x,
                     side: str = "rho", n_boundary: int = 720, det_floor: float = 1e-10,
                     tol_rel: float = 1e-6) -> InteriorHessian:
    """``D^2 rho(x)`` at a regular interior point.

    Raises
    ------
    ObstacleError
        If ``x`` has several closest points or ``det Q`` is below
        ``det_floor`` (``x`` lies on the ridge).
    """
    prob = ObstacleProblem(domain, body, phi, n_boundary)
    xx = np.asarray(x, dtype=float).reshape(domain.dim)
    if not domain.contains(xx[None] if domain.dim == 2 else xx)[0 if domain.dim == 2 else ()]:
        raise ObstacleError(f"{xx} is not inside the domain")
    cp = _closest(prob, xx, side, tol_rel)
    if cp.multiple:
        raise ObstacleError(f"{xx} has several closest boundary points (singular set)")
    out = interior_hessian_field(prob, xx, side)
    if abs(out.detQ[0]) <= det_floor:
        raise ObstacleError(f"det Q = {out.detQ[0]:.3g} at {xx}: point is on the ridge")
    return out


@dataclass
class RidgeScan:
    """Classification of grid nodes.

    ``code`` is 0 for regular nodes, 1 for nodes with several closest
    points and 2 for nodes with ``det Q <= det_floor``.  ``min_dist`` is
    the smallest distance from a non-regular node to the boundary.
    ``points`` lists exact ridge points found by bisection in 1D.
    """

    x: np.ndarray
    code: np.ndarray
    detQ: np.ndarray
    min_dist: float
    points: np.ndarray


def ridge_scan(domain: Domain, body: ConvexBody, phi: ExteriorData, x, side: str = "rho",
               det_floor: float = 1e-6, tol_rel: float = 1e-6, n_boundary: int = 720) -> RidgeScan:
    """Classify points as regular, multi-closest or degenerate-Q."""
    prob = ObstacleProblem(domain, body, phi, n_boundary)
    x = np.asarray(x, dtype=float).reshape(-1, domain.dim)
    inside = domain.contains(x if domain.dim == 2 else x[:, 0])
    xi = x[inside]
    code = np.zeros(len(x), dtype=np.int8)
    detQ = np.full(len(x), np.nan)
    F = prob.sample_objective(xi, side)
    sub = np.zeros(len(xi), dtype=np.int8)
    if domain.dim == 1:
        spread = np.abs(F[:, 1] - F[:, 0])
        sub[spread <= tol_rel * np.maximum(np.abs(F).max(axis=1), 1.0)] = 1
    else:
        _, runs, full = _near_min_runs(F, tol_rel)
        cand = np.flatnonzero((runs > 1) | full)
        for i in cand:
            if _closest(prob, xi[i], side, tol_rel).multiple:
                sub[i] = 1
    reg = sub == 0
    if reg.any():
        ih = interior_hessian_field(prob, xi[reg], side)
        d = ih.detQ
        dq = np.full(len(xi), np.nan)
        dq[reg] = d
        sub[reg & (dq <= det_floor)] = 2
        detQ[inside] = dq
    code[inside] = sub
    bad = code > 0
    dist = domain.distance(x[bad] if domain.dim == 2 else x[bad, 0])
    pts = np.zeros((0, domain.dim))
    if domain.dim == 1:
        a, b = domain.data
        f = lambda s: (prob.objective(np.full((1, 1), s), np.array([0.0]), side)  # noqa: E731
                       - prob.objective(np.full((1, 1), s), np.array([1.0]), side))[0]
        lo, hi = a, b
        if f(lo) * f(hi) < 0:
            for _ in range(200):
                mid = 0.5 * (lo + hi)
                if f(mid) * f(lo) > 0:
                    lo = mid
                else:
                    hi = mid
            pts = np.array([[0.5 * (lo + hi)]])
    return RidgeScan(x, code, detQ, float(dist.min()) if len(dist) else np.inf, pts)


# ---------------------------------------------------------------------------
# characteristics


@dataclass
class CharacteristicReport:
    """Second derivatives along one characteristic ``x(t) = y + t D gamma°(mu)``.

    ``q_formula[i, j]`` is ``xi_j^T D^2 rho(x(t_i)) xi_j`` from the closed
    form; ``q_riccati`` integrates ``S' = -S D^2 gamma°(mu) S`` from the
    boundary Hessian.  ``stop`` names what ended the segment.
    """

    t: np.ndarray
    q_formula: np.ndarray
    q_riccati: np.ndarray
    max_increase: float
    max_rel_dev: float
    t_end: float
    stop: str

    def monotone(self, slack: float = 1e-8) -> bool:
        return self.max_increase <= slack


def _characteristic_end(prob: ObstacleProblem, jet: BoundaryJet, W: np.ndarray, side: str,
                        det_stop: float, tol: float = 1e-10) -> tuple[float, str]:
    dom = prob.domain
    y, v = jet.y[0], jet.dgp[0]
    inside = lambda s: bool(dom.contains((y + s * v)[None] if dom.dim == 2 else y + s * v)[0])  # noqa: E731
    hi = 1.0
    while inside(hi) and hi < 1e6:
        hi *= 2
    lo = 0.0
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if inside(mid):
            lo = mid
        else:
            hi = mid
    t_exit, stop = lo, "exit"
    # loss of the closest point
    ts = np.linspace(0, t_exit, 401)[1:]
    pts = y[None] + ts[:, None] * v[None]
    rho = prob.minimize(pts, side)[0]
    lin = ts + jet.phi[0]
    bad = np.flatnonzero(rho < lin - tol * np.maximum(1.0, np.abs(lin)))
    if len(bad):
        lo = ts[bad[0] - 1] if bad[0] > 0 else 0.0
        hi = ts[bad[0]]
        # multisection: 64 points per minimize call instead of one bisection step
        for _ in range(6):
            ss = np.linspace(lo, hi, 66)[1:-1]
            r = prob.minimize(y[None] + ss[:, None] * v[None], side)[0]
            off = np.flatnonzero(r < ss + jet.phi[0] - tol * np.maximum(1.0, np.abs(ss)))
            if len(off):
                hi = ss[off[0]]
                lo = ss[off[0] - 1] if off[0] > 0 else lo
            else:
                lo = ss[-1]
        t_exit, stop = lo, "ridge"
    # det(I - t W) reaching the stop level
    n = dom.dim
    dets = np.linalg.det(np.eye(n)[None] - np.linspace(0, t_exit, 2001)[:, None, None] * W[None])
    low = np.flatnonzero(dets <= det_stop)
    if len(low):
        t_exit = np.linspace(0, t_exit, 2001)[max(low[0] - 1, 0)]
        f = lambda s: np.linalg.det(np.eye(n) - s * W) - det_stop  # noqa: E731
        lo, hi = t_exit, t_exit + (t_exit / 2000 if t_exit > 0 else 1e-3)
        if f(hi) <= 0:
            for _ in range(60):
                mid = 0.5 * (lo + hi)
                if f(mid) > 0:
                    lo = mid
                else:
                    hi = mid
        t_exit, stop = lo, "detQ"
    return t_exit * (1 - 1e-9), stop


def characteristic_monotonicity(domain: Domain, body: ConvexBody, phi: ExteriorData, t0: float,
                                xis, n_samples: int = 200, det_stop: float = 1e-2,
                                side: str = "rho", n_boundary: int = 720) -> CharacteristicReport:
    """Sample ``D^2_{xi xi} rho`` along the characteristic from ``y(t0)``.

    The segment ends at the first of: leaving ``U``, ``y`` ceasing to be
    the closest point, or ``det Q`` dropping to ``det_stop``.
    """
    prob = ObstacleProblem(domain, body, phi, n_boundary)
    jet = _boundary_jet(prob, np.array([float(t0)]), side)
    n = domain.dim
    G = jet.d2gp[0]
    S0 = jet.hess[0]
    W = -G @ S0
    t_end, stop = _characteristic_end(prob, jet, W, side, det_stop)
    ts = np.linspace(0.0, t_end, n_samples)
    xis = np.atleast_2d(np.asarray(xis, dtype=float))
    Qinv = np.linalg.inv(np.eye(n)[None] - ts[:, None, None] * W[None])
    S = S0[None] @ Qinv
    qf = np.einsum("kj,tjl,kl->tk", xis, S, xis)

    def rhs(_, s):
        Sm = s.reshape(n, n)
        return (-Sm @ G @ Sm).ravel()

    sol = solve_ivp(rhs, (0.0, t_end), S0.ravel(), method="DOP853", t_eval=ts,
                    rtol=1e-12, atol=1e-14)
    Sr = sol.y.T.reshape(-1, n, n)
    qr = np.einsum("kj,tjl,kl->tk", xis, Sr, xis)
    inc = float(np.max(np.diff(qf, axis=0))) if n_samples > 1 else 0.0
    scale = max(np.abs(S0).max(), 1e-12)
    dev = float(np.max(np.abs(qf - qr) / np.maximum(np.abs(qf), scale)))
    return CharacteristicReport(ts, qf, qr, inc, dev, t_end, stop)


# ---------------------------------------------------------------------------
# barrier


@dataclass
class BarrierField:
    """Gauge distance to an exterior tangent ball, truncated.

    ``values`` are at the query points; ``func`` evaluates anywhere.
    ``cert_dominates`` is ``max(rho_k - barrier)`` over query points in
    ``U`` (should be <= 0 up to rounding) and ``cert_contact`` the
    largest gap ``|barrier - rho_k|`` along the characteristic from
    ``y0``.
    """

    center: np.ndarray
    radius: float
    cap: float
    values: np.ndarray
    func: Any
    cert_dominates: float
    cert_contact: float


def barrier_field(domain: Domain, body_k: ConvexBody, phi: ExteriorData, t0: float, r0: float,
                  x, cap_body: ConvexBody | None = None, n_ball: int = 720,
                  n_boundary: int = 720, refine: bool = True) -> BarrierField:
    """Barrier ``min_{z on dB} gamma_k(x - z) + phi(z)`` (``phi`` on ``B``).

    ``B`` is the ball of radius ``r0`` tangent to ``dU`` from outside at
    ``y(t0)``.  Values are truncated at ``diam(U) max gamma_1 + sup|phi|``,
    where ``gamma_1`` is the gauge of ``cap_body`` (defaults to
    ``body_k``); the cap never binds on ``U``.
    """
    if domain.dim == 2 and not domain.c2:
        q = np.mod(4 * float(t0), 1.0)
        if min(q, 1 - q) < 1e-12:
            raise ObstacleError("no tangent ball: the boundary has a corner at y0")
    prob = ObstacleProblem(domain, body_k, phi, n_boundary)
    bp = domain.boundary(np.array([float(t0)]))
    y0, nu0 = bp.y[0], bp.nu[0]
    c = y0 - r0 * nu0
    n = domain.dim
    # tangency: the ball meets the closed domain only at y0
    if n == 2:
        tb = domain.boundary(np.arange(4096) / 4096)
        dd = np.linalg.norm(tb.y - c, axis=1) - r0
        if dd.min() < -1e-9 * r0:
            raise ObstacleError("ball is not exterior to the domain")
    cb = cap_body or body_k
    if n == 1:
        gmax = float(max(_gauge_flat(cb, np.array([[1.0], [-1.0]]))))
    else:
        u = np.column_stack([np.cos(np.linspace(0, 2 * np.pi, 4096, endpoint=False)),
                             np.sin(np.linspace(0, 2 * np.pi, 4096, endpoint=False))])
        gmax = float(_gauge_flat(cb, u).max())
    lo, hi = domain.bbox()
    cap = domain.diameter * gmax + phi.sup_abs(np.linalg.norm(np.abs(lo) + np.abs(hi)) + 2 * r0)

    def func(pts):
        pts = np.asarray(pts, dtype=float).reshape(-1, n)
        out = np.empty(len(pts))
        inB = np.linalg.norm(pts - c, axis=1) < r0
        out[inB] = phi.eval_flat(pts[inB])
        q = pts[~inB]
        if n == 1:
            zs = np.array([[c[0] - r0], [c[0] + r0]])
            vals = np.stack([_gauge_flat(body_k, q - z) + phi.eval_flat(z[None]) for z in zs], 1)
            raw = vals.min(axis=1)
        else:
            M = n_ball
            th = 2 * np.pi * np.arange(M) / M
            Z = c + r0 * np.column_stack([np.cos(th), np.sin(th)])
            pz = phi.eval_flat(Z)
            raw = np.empty(len(q))
            arg = np.empty(len(q), dtype=int)
            step = max(1, 2_000_000 // M)
            for i in range(0, len(q), step):
                qi = q[i:i + step]
                F = _gauge_flat(body_k, (qi[:, None, :] - Z[None]).reshape(-1, 2)).reshape(len(qi), M) + pz
                arg[i:i + step] = np.argmin(F, axis=1)
                raw[i:i + step] = F[np.arange(len(qi)), arg[i:i + step]]
            if refine and len(q):
                def f(s):
                    z = c + r0 * np.column_stack([np.cos(2 * np.pi * s), np.sin(2 * np.pi * s)])
                    return _gauge_flat(body_k, q - z) + phi.eval_flat(z)
                _, fr = _golden(f, (arg - 1.0) / M, (arg + 1.0) / M, 50)
                raw = np.minimum(raw, fr)
        out[~inB] = np.minimum(raw, cap)
        return out

    xq = np.asarray(x, dtype=float).reshape(-1, n)
    vals = func(xq)
    inside = domain.contains(xq if n == 2 else xq[:, 0])
    rk = prob.minimize(xq[inside])[0] if inside.any() else np.zeros(0)
    dom_gap = float((rk - vals[inside]).max()) if inside.any() else -np.inf
    # contact along the characteristic from y0
    jet = _boundary_jet(prob, np.array([float(t0)]))
    v = jet.dgp[0]
    W = -jet.d2gp[0] @ jet.hess[0]
    t_end, _ = _characteristic_end(prob, jet, W, "rho", 1e-2)
    ss = np.linspace(0, t_end, 41)[1:]
    cp = y0[None] + ss[:, None] * v[None]
    contact = float(np.abs(func(cp) - prob.minimize(cp)[0]).max())
    return BarrierField(c, float(r0), float(cap), vals, func, dom_gap, contact)
