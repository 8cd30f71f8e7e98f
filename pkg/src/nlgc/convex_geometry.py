"""Convex bodies, gauges, support functions and polarity.

A body ``K`` is a compact convex set with 0 in its interior.  Its gauge
``gamma_K(x) = inf{t > 0 : x in t K}`` equals the support function of the
polar body, so every gauge query is answered as a support query on the
polar and vice versa.

Representations
---------------
analytic
    ``interval`` (1D, ``[-a, b]``), ``ball``, ``ellipse`` (axis aligned),
    ``square`` and ``polygon`` (vertex lists).  Values are exact.
sampled
    ``support_samples`` stores ``h_K`` on ``M`` equispaced directions and is
    read as the polygon ``{y : <u_j, y> <= h_j}``.  Gauge values are exact
    for that polygon; derivatives come from periodic finite differences of
    ``h`` in the angle.
dual
    A view whose gauge is the support function of a base body.  Used for
    the smoothed bodies ``K_k`` so that no second sampling error enters.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Any

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.ndimage import maximum_filter1d, minimum_filter1d

__all__ = [
    "BodyError",
    "ConvexBody",
    "GaugeJet",
    "BodyReport",
    "gauge_eval",
    "support_eval",
    "gauge_jet",
    "polar",
    "validate_body",
    "smooth_approx",
    "smoothing_sequence",
    "hausdorff",
    "reflect",
    "body_from_config",
    "body_to_config",
]


class BodyError(ValueError):
    """Raised for malformed or non-convex body data."""


KINDS = ("interval", "ball", "ellipse", "square", "polygon", "support_samples", "dual")


def _angles(m: int) -> np.ndarray:
    return 2.0 * np.pi * np.arange(m) / m


def _unit(theta: np.ndarray) -> np.ndarray:
    return np.stack([np.cos(theta), np.sin(theta)], axis=-1)


class _VPolygon:
    """Support function of the hull of CCW vertices in convex position.

    ``ang[i]`` is the outward normal angle of the edge from ``v[i]`` to
    ``v[i+1]``; the maximizing vertex for a direction is found by binary
    search on these angles.  Passing the angles explicitly keeps the
    lookup monotone when rounding makes a nearly straight chain of
    vertices slightly non-convex.
    """

    def __init__(self, verts: np.ndarray, ang: np.ndarray | None = None):
        v = np.asarray(verts, dtype=float)
        if ang is None:
            e = np.roll(v, -1, axis=0) - v
            ang = np.arctan2(-e[:, 0], e[:, 1])
        ang = np.unwrap(np.asarray(ang, dtype=float))
        if ang[-1] < ang[0]:
            raise BodyError("polygon vertices must be listed counter-clockwise")
        self.v = v
        self.ang = ang
        self.n = len(v)

    def argmax(self, x: np.ndarray) -> np.ndarray:
        a0 = self.ang[0]
        th = a0 + np.mod(np.arctan2(x[..., 1], x[..., 0]) - a0, 2 * np.pi)
        e = np.searchsorted(self.ang, th, side="right") - 1
        return (e + 1) % self.n

    def __call__(self, x: np.ndarray) -> np.ndarray:
        idx = self.argmax(x)
        best = np.full(x.shape[:-1], -np.inf)
        # neighbours guard against rounding at normal-angle ties
        for d in (-1, 0, 1):
            c = self.v[(idx + d) % self.n]
            best = np.maximum(best, x[..., 0] * c[..., 0] + x[..., 1] * c[..., 1])
        return best

    def jet(self, x: np.ndarray, rtol: float = 1e-12):
        """Value, gradient and smoothness flag (ties are non-smooth)."""
        idx = self.argmax(x)
        vals = []
        for d in (-1, 0, 1):
            c = self.v[(idx + d) % self.n]
            vals.append(x[..., 0] * c[..., 0] + x[..., 1] * c[..., 1])
        vals = np.stack(vals, axis=-1)
        best = vals.max(axis=-1)
        scale = np.linalg.norm(x, axis=-1) * np.abs(self.v).max()
        tie = vals >= best[..., None] - rtol * np.maximum(scale[..., None], 1e-300)
        cnt = tie.sum(axis=-1)
        grad = np.zeros(x.shape)
        for j, d in enumerate((-1, 0, 1)):
            grad += tie[..., j, None] * self.v[(idx + d) % self.n]
        grad /= cnt[..., None]
        return best, grad, cnt == 1


@dataclass(frozen=True, eq=False)
class ConvexBody:
    """A convex body with the origin in its interior.

    Use the classmethod constructors rather than the raw initializer.

    Attributes
    ----------
    kind : str
        One of ``interval``, ``ball``, ``ellipse``, ``square``, ``polygon``,
        ``support_samples`` or ``dual``.
    dim : int
        Ambient dimension (1 or 2).
    data : numpy.ndarray
        Kind specific parameters: ``[a, b]`` for the interval ``[-a, b]``,
        ``[r]``, ``[a, b]`` semi-axes, ``[half]``, vertex array, or sample
        values of the support function.
    base : ConvexBody or None
        For ``dual`` views, the body whose support function is the gauge.
    meta : dict
        Free-form provenance (smoothing level, margins, ...).
    """

    kind: str
    dim: int
    data: np.ndarray
    base: "ConvexBody | None" = None
    meta: dict = field(default_factory=dict, compare=False)

    # -- constructors ---------------------------------------------------
    @classmethod
    def interval(cls, a: float = 1.0, b: float = 1.0) -> "ConvexBody":
        """The segment ``[-a, b]`` with ``a, b > 0``."""
        if not (a > 0 and b > 0 and np.isfinite(a) and np.isfinite(b)):
            raise BodyError("interval endpoints must satisfy -a < 0 < b")
        return cls("interval", 1, np.array([a, b], dtype=float))

    @classmethod
    def ball(cls, r: float = 1.0) -> "ConvexBody":
        if not (r > 0 and np.isfinite(r)):
            raise BodyError("ball radius must be positive")
        return cls("ball", 2, np.array([r], dtype=float))

    @classmethod
    def ellipse(cls, a: float, b: float) -> "ConvexBody":
        """Axis-aligned ellipse with semi-axes ``a`` (x) and ``b`` (y)."""
        if not (a > 0 and b > 0):
            raise BodyError("ellipse semi-axes must be positive")
        return cls("ellipse", 2, np.array([a, b], dtype=float))

    @classmethod
    def square(cls, half: float = 1.0) -> "ConvexBody":
        if not half > 0:
            raise BodyError("square half-width must be positive")
        return cls("square", 2, np.array([half], dtype=float))

    @classmethod
    def polygon(cls, vertices, validate: bool = True) -> "ConvexBody":
        """Polygon from vertices listed counter-clockwise."""
        v = np.asarray(vertices, dtype=float)
        if v.ndim != 2 or v.shape[1] != 2 or len(v) < 3:
            raise BodyError("polygon needs an (m, 2) vertex array with m >= 3")
        body = cls("polygon", 2, v)
        if validate:
            rep = validate_body(body)
            if not rep.ok:
                raise BodyError("invalid polygon: " + "; ".join(rep.messages))
        return body

    @classmethod
    def regular_polygon(cls, m: int, r: float = 1.0, phase: float = 0.0) -> "ConvexBody":
        th = phase + _angles(m)
        return cls.polygon(r * _unit(th))

    @classmethod
    def support_samples(cls, h, validate: bool = True, meta: dict | None = None) -> "ConvexBody":
        """Body given by support values on ``M`` equispaced directions."""
        hv = np.asarray(h, dtype=float).ravel()
        if len(hv) < 8:
            raise BodyError("support_samples needs at least 8 directions")
        body = cls("support_samples", 2, hv, meta=dict(meta or {}))
        if validate:
            rep = validate_body(body)
            if not rep.ok:
                raise BodyError("invalid support samples: " + "; ".join(rep.messages))
        return body

    @classmethod
    def dual(cls, base: "ConvexBody") -> "ConvexBody":
        """The polar of ``base``, represented without resampling."""
        if base.kind == "dual":
            return base.base
        return cls("dual", base.dim, np.zeros(0), base=base, meta=dict(base.meta))

    # -- cached internals -----------------------------------------------
    @cached_property
    def n_samples(self) -> int:
        return len(self.data) if self.kind == "support_samples" else 0

    @cached_property
    def _vertices(self) -> np.ndarray:
        """CCW vertices for polygonal kinds."""
        if self.kind == "square":
            c = self.data[0]
            return np.array([[c, -c], [c, c], [-c, c], [-c, -c]])
        if self.kind == "polygon":
            return self.data
        if self.kind == "support_samples":
            h = self.data
            th = _angles(len(h))
            h1, t1 = np.roll(h, -1), np.roll(th, -1)
            den = np.sin(t1 - th)
            x = (h * np.sin(t1) - h1 * np.sin(th)) / den
            y = (h1 * np.cos(th) - h * np.cos(t1)) / den
            return np.column_stack([x, y])
        raise AttributeError(self.kind)

    @cached_property
    def _facets(self) -> tuple[np.ndarray, np.ndarray]:
        """Unit outward normals and offsets of the polygon edges."""
        v = self._vertices
        e = np.roll(v, -1, axis=0) - v
        nrm = np.column_stack([e[:, 1], -e[:, 0]])
        nrm /= np.linalg.norm(nrm, axis=1)[:, None]
        return nrm, np.einsum("ij,ij->i", nrm, v)

    @cached_property
    def _support_poly(self) -> _VPolygon:
        if self.kind == "support_samples":
            return _VPolygon(self._vertices, np.roll(_angles(len(self.data)), -1))
        return _VPolygon(self._vertices)

    @cached_property
    def _gauge_poly(self) -> _VPolygon:
        if self.kind == "support_samples":
            u = _unit(_angles(len(self.data)))
            v = self._vertices
            return _VPolygon(u / self.data[:, None], np.arctan2(v[:, 1], v[:, 0]))
        nrm, c = self._facets
        return _VPolygon(nrm / c[:, None])

    @cached_property
    def _polar(self) -> "ConvexBody":
        return _make_polar(self)

    @cached_property
    def _sample_spline(self):
        """Periodic splines of h, h' and h'' in the angle."""
        h = self.data
        m = len(h)
        d = 2.0 * np.pi / m
        r = lambda k: np.roll(h, -k)  # noqa: E731  h_{j+k}
        dh = (-r(2) + 8 * r(1) - 8 * r(-1) + r(-2)) / (12 * d)
        d2h = (-r(2) + 16 * r(1) - 30 * h + 16 * r(-1) - r(-2)) / (12 * d * d)
        th = np.append(_angles(m), 2 * np.pi)
        mk = lambda f: CubicSpline(th, np.append(f, f[0]), bc_type="periodic")  # noqa: E731
        return mk(h), mk(dh), mk(d2h)

    @cached_property
    def valid(self) -> bool:
        if self.kind in ("polygon", "support_samples"):
            return validate_body(self).ok
        if self.kind == "dual":
            return self.base.valid
        return True

    def __repr__(self) -> str:
        if self.kind == "support_samples":
            return f"ConvexBody(support_samples, M={len(self.data)})"
        if self.kind == "dual":
            return f"ConvexBody(dual of {self.base!r})"
        return f"ConvexBody({self.kind}, {np.array2string(self.data, precision=4)})"


# ---------------------------------------------------------------------------
# evaluation


def _points(x, dim: int) -> tuple[np.ndarray, tuple]:
    x = np.asarray(x, dtype=float)
    if dim == 1:
        if x.ndim >= 1 and x.shape[-1] == 1 and x.ndim > 1:
            shape = x.shape[:-1]
        else:
            shape = x.shape
        return x.reshape(-1, 1), shape
    if x.shape[-1] != 2:
        raise BodyError(f"expected points with last axis 2, got shape {x.shape}")
    return x.reshape(-1, 2), x.shape[:-1]


def _check(body: ConvexBody) -> None:
    if not body.valid:
        raise BodyError(f"{body!r} failed validation")


def _support_flat(body: ConvexBody, x: np.ndarray) -> np.ndarray:
    k = body.kind
    if k == "interval":
        a, b = body.data
        return np.maximum(b * x[:, 0], -a * x[:, 0])
    if k == "ball":
        return body.data[0] * np.linalg.norm(x, axis=1)
    if k == "ellipse":
        a, b = body.data
        return np.hypot(a * x[:, 0], b * x[:, 1])
    if k in ("square", "polygon", "support_samples"):
        return body._support_poly(x)
    if k == "dual":
        return _gauge_flat(body.base, x)
    raise BodyError(f"unknown body kind {k!r}")


def _gauge_flat(body: ConvexBody, x: np.ndarray) -> np.ndarray:
    k = body.kind
    if k == "interval":
        a, b = body.data
        return np.maximum(x[:, 0] / b, -x[:, 0] / a)
    if k == "ball":
        return np.linalg.norm(x, axis=1) / body.data[0]
    if k == "ellipse":
        a, b = body.data
        return np.hypot(x[:, 0] / a, x[:, 1] / b)
    if k == "square":
        return np.abs(x).max(axis=1) / body.data[0]
    if k in ("polygon", "support_samples"):
        return body._gauge_poly(x)
    if k == "dual":
        return _support_flat(body.base, x)
    raise BodyError(f"unknown body kind {k!r}")


def gauge_eval(body: ConvexBody, x) -> np.ndarray:
    """Gauge ``gamma_K`` at points ``x``.

    Parameters
    ----------
    body : ConvexBody
    x : array_like
        Shape ``(..., 2)`` in 2D, any shape in 1D.

    Returns
    -------
    numpy.ndarray
        Values with the leading shape of ``x``.

    Raises
    ------
    BodyError
        If the body fails validation.
    """
    _check(body)
    p, shape = _points(x, body.dim)
    return _gauge_flat(body, p).reshape(shape)


def support_eval(body: ConvexBody, x) -> np.ndarray:
    """Support function ``h_K``, equal to the gauge of the polar body."""
    _check(body)
    p, shape = _points(x, body.dim)
    return _support_flat(body, p).reshape(shape)


@dataclass
class GaugeJet:
    """Value, gradient and Hessian of a gauge or support function.

    ``hess_defined`` is False where the function is not twice
    differentiable (polygon ties, the origin); ``grad`` is then an
    element of the subdifferential.
    """

    value: np.ndarray
    grad: np.ndarray
    hess: np.ndarray
    hess_defined: np.ndarray


def _support_jet_flat(body: ConvexBody, x: np.ndarray) -> GaugeJet:
    n = body.dim
    N = len(x)
    k = body.kind
    hess = np.zeros((N, n, n))
    ok = np.ones(N, dtype=bool)
    if k == "interval":
        a, b = body.data
        t = x[:, 0]
        val = np.maximum(b * t, -a * t)
        g = np.where(t > 0, b, np.where(t < 0, -a, 0.5 * (b - a)))
        ok = t != 0
        return GaugeJet(val, g[:, None], hess, ok)
    if k in ("ball", "ellipse"):
        B = np.diag(np.broadcast_to(body.data, (2,)) ** 2)
        Bx = x @ B
        val = np.sqrt(np.einsum("ij,ij->i", x, Bx))
        safe = np.where(val > 0, val, 1.0)
        g = Bx / safe[:, None]
        hess = (B[None] - g[:, :, None] * g[:, None, :]) / safe[:, None, None]
        ok = val > 0
        return GaugeJet(val, g, hess, ok)
    if k in ("square", "polygon"):
        val, g, ok = body._support_poly.jet(x)
        return GaugeJet(val, g, hess, ok)
    if k == "support_samples":
        r = np.linalg.norm(x, axis=1)
        th = np.mod(np.arctan2(x[:, 1], x[:, 0]), 2 * np.pi)
        sp, sd, sdd = body._sample_spline
        p, dp, ddp = sp(th), sd(th), sdd(th)
        er, et = _unit(th), _unit(th + np.pi / 2)
        g = p[:, None] * er + dp[:, None] * et
        safe = np.where(r > 0, r, 1.0)
        hess = ((p + ddp) / safe)[:, None, None] * et[:, :, None] * et[:, None, :]
        return GaugeJet(r * p, g, hess, r > 0)
    if k == "dual":
        return _support_jet_flat(body.base._polar, x)
    raise BodyError(f"unknown body kind {k!r}")


def gauge_jet(body: ConvexBody, x, which: str = "gauge") -> GaugeJet:
    """First and second derivatives of ``gamma_K`` or ``h_K``.

    Parameters
    ----------
    body : ConvexBody
    x : array_like
        Points, shape ``(..., n)`` (any shape in 1D).
    which : {"gauge", "support"}
        ``"support"`` differentiates ``gamma_{K°} = h_K``.

    Returns
    -------
    GaugeJet
        Arrays shaped ``(...)``, ``(..., n)`` and ``(..., n, n)``.

    Notes
    -----
    The gradient is 0-homogeneous and the Hessian (-1)-homogeneous; at
    the origin only a subgradient is returned.
    """
    _check(body)
    p, shape = _points(x, body.dim)
    if which == "gauge":
        target = body._polar if body.kind != "dual" else body.base
        jet = _support_jet_flat(target, p)
    elif which == "support":
        jet = _support_jet_flat(body, p)
    else:
        raise ValueError("which must be 'gauge' or 'support'")
    n = body.dim
    return GaugeJet(
        jet.value.reshape(shape),
        jet.grad.reshape(shape + (n,)),
        jet.hess.reshape(shape + (n, n)),
        jet.hess_defined.reshape(shape),
    )


# ---------------------------------------------------------------------------
# polarity


def _make_polar(body: ConvexBody) -> ConvexBody:
    k = body.kind
    if k == "interval":
        a, b = body.data
        return ConvexBody.interval(1.0 / b, 1.0 / a)
    if k == "ball":
        return ConvexBody.ball(1.0 / body.data[0])
    if k == "ellipse":
        return ConvexBody.ellipse(1.0 / body.data[0], 1.0 / body.data[1])
    if k in ("square", "polygon"):
        nrm, c = body._facets
        return ConvexBody.polygon(nrm / c[:, None], validate=False)
    if k == "support_samples":
        u = _unit(_angles(len(body.data)))
        return ConvexBody.support_samples(body._gauge_poly(u), validate=False)
    if k == "dual":
        return body.base
    raise BodyError(f"unknown body kind {k!r}")


def polar(body: ConvexBody) -> ConvexBody:
    """The polar body ``K° = {y : <x, y> <= 1 for x in K}``.

    Analytic kinds map to analytic kinds (ball ``r`` to ball ``1/r``,
    polygons through their facet normals); sampled bodies map to sampled
    bodies by evaluating the gauge on the same direction grid.
    """
    _check(body)
    return body._polar


def reflect(body: ConvexBody) -> ConvexBody:
    """The body ``-K``; its gauge is ``x -> gamma_K(-x)``."""
    k = body.kind
    if k == "interval":
        return ConvexBody.interval(body.data[1], body.data[0])
    if k in ("ball", "ellipse", "square"):
        return body
    if k == "polygon":
        return ConvexBody.polygon(-body.data, validate=False)
    if k == "support_samples":
        m = len(body.data)
        if m % 2:
            raise BodyError("reflection needs an even number of directions")
        return ConvexBody.support_samples(np.roll(body.data, -m // 2), validate=False,
                                          meta=body.meta)
    if k == "dual":
        return ConvexBody.dual(reflect(body.base))
    raise BodyError(f"unknown body kind {k!r}")


# ---------------------------------------------------------------------------
# validation


@dataclass
class BodyReport:
    """Outcome of :func:`validate_body`.

    Attributes
    ----------
    ok : bool
        True when the data describe a convex body with 0 in the interior.
    inner_radius, outer_radius : float
        Radii ``c <= |x| <= C`` of balls about 0 inside / containing ``K``.
    strictly_convex : bool
        False when the boundary contains a segment.
    smooth : bool
        False when the boundary has corners.
    min_curvature_radius, max_curvature_radius : float
        Range of the boundary radius of curvature (``h + h''``); ``0`` at
        corners and ``inf`` on flat pieces.
    messages : list of str
        Reasons for failure, empty when ``ok``.
    """

    ok: bool
    inner_radius: float
    outer_radius: float
    strictly_convex: bool
    smooth: bool
    min_curvature_radius: float
    max_curvature_radius: float
    messages: list[str] = field(default_factory=list)


def _sample_radii(h: np.ndarray) -> np.ndarray:
    """Discrete ``h + h''`` that is exact for circles of any radius."""
    d = 2 * np.pi / len(h)
    c = np.cos(d)
    return (np.roll(h, -1) + np.roll(h, 1) - 2 * c * h) / (2 - 2 * c)


def validate_body(body: ConvexBody, tol: float = 1e-12) -> BodyReport:
    """Check convexity, interior origin and regularity of a body.

    Sampled bodies are convex exactly when every discrete radius of
    curvature ``(h_{j+1} + h_{j-1} - 2 cos(d) h_j) / (2 - 2 cos(d))`` is
    non-negative; this is the condition that no constraint of the sample
    polygon is cut off by its neighbours.
    """
    k = body.kind
    msgs: list[str] = []
    if k == "interval":
        a, b = body.data
        return BodyReport(True, min(a, b), max(a, b), True, True, 0.0, np.inf)
    if k == "ball":
        r = body.data[0]
        return BodyReport(True, r, r, True, True, r, r)
    if k == "ellipse":
        a, b = body.data
        lo, hi = min(a, b), max(a, b)
        return BodyReport(True, lo, hi, True, True, lo * lo / hi, hi * hi / lo)
    if k == "square":
        c = body.data[0]
        return BodyReport(True, c, c * np.sqrt(2), False, False, 0.0, np.inf)
    if k == "polygon":
        v = body.data
        if not np.all(np.isfinite(v)):
            return BodyReport(False, 0, 0, False, False, 0, 0, ["non-finite vertex"])
        e = np.roll(v, -1, axis=0) - v
        en = np.roll(e, -1, axis=0)
        cross = e[:, 0] * en[:, 1] - e[:, 1] * en[:, 0]
        scale = np.abs(v).max() ** 2
        if np.any(cross <= tol * scale):
            msgs.append("vertices are not in strictly convex counter-clockwise position")
        turn = np.arctan2(cross, np.einsum("ij,ij->i", e, en))
        if abs(turn.sum() - 2 * np.pi) > 1e-8:
            msgs.append("polygon winds more than once")
        if msgs:
            return BodyReport(False, 0.0, 0.0, False, False, 0.0, np.inf, msgs)
        _, c = body._facets
        if np.any(c <= tol * np.sqrt(scale)):
            msgs.append("origin is not interior")
        r_out = float(np.linalg.norm(v, axis=1).max())
        return BodyReport(not msgs, float(max(c.min(), 0.0)), r_out, False, False,
                          0.0, np.inf, msgs)
    if k == "support_samples":
        h = body.data
        if not np.all(np.isfinite(h)):
            return BodyReport(False, 0, 0, False, False, 0, 0, ["non-finite sample"])
        if h.min() <= 0:
            msgs.append(f"origin is not interior (min h = {h.min():.3g})")
        rad = _sample_radii(h)
        scale = np.abs(h).max()
        bad = np.flatnonzero(rad < -tol * max(scale, 1.0) * len(h))
        if len(bad):
            j = int(bad[np.argmin(rad[bad])])
            msgs.append(
                f"non-convex samples: discrete curvature radius {rad[j]:.3g} < 0 "
                f"at direction index {j}"
            )
        if msgs:
            return BodyReport(False, float(h.min()), float(h.max()), False, False,
                              float(rad.min()), float(rad.max()), msgs)
        d = 2 * np.pi / len(h)
        r_out = float(np.linalg.norm(body._vertices, axis=1).max())
        rmin, rmax = float(rad.min()), float(rad.max())
        smooth = rmin > 1e-9 * scale
        # a discrete edge longer than 5% of the body reads as a flat piece
        strict = rmax * d <= 0.05 * r_out
        return BodyReport(True, float(h.min()), r_out, strict, smooth, rmin, rmax)
    if k == "dual":
        rep = validate_body(body.base, tol)
        if not rep.ok:
            return rep
        # polarity swaps corners and flat pieces
        return BodyReport(True, 1.0 / rep.outer_radius, 1.0 / rep.inner_radius,
                          rep.smooth, rep.strictly_convex, np.nan, np.nan)
    raise BodyError(f"unknown body kind {k!r}")


# ---------------------------------------------------------------------------
# distances and smoothing


def _directions(n_dirs: int) -> np.ndarray:
    return _unit(_angles(n_dirs))


def hausdorff(A: ConvexBody, B: ConvexBody, n_dirs: int = 8192) -> float:
    """Hausdorff distance as the sup-norm of the support difference."""
    if A.dim != B.dim:
        raise BodyError("bodies have different dimensions")
    if A.dim == 1:
        u = np.array([[1.0], [-1.0]])
    else:
        u = _directions(n_dirs)
    return float(np.abs(_support_flat(A, u) - _support_flat(B, u)).max())


def diameter(body: ConvexBody, n_dirs: int = 4096) -> float:
    """Largest width ``max_u h(u) + h(-u)``."""
    if body.dim == 1:
        return float(_support_flat(body, np.array([[1.0], [-1.0]])).sum())
    u = _directions(n_dirs)
    return float((_support_flat(body, u) + _support_flat(body, -u)).max())


def resolution(body: ConvexBody) -> float:
    """Angular resolution of the representation (0 for analytic kinds)."""
    if body.kind == "support_samples":
        return 2 * np.pi / len(body.data)
    if body.kind == "dual":
        return resolution(body.base)
    return 0.0


def _bump_weights(width: float, d: float) -> np.ndarray:
    """Normalized C^2 bump ``(1 - (t/w)^2)^3`` sampled at spacing ``d``."""
    m = int(np.floor(width / d))
    t = np.arange(-m, m + 1) * d / width
    w = (1 - t * t) ** 3
    return w / w.sum()


def smooth_approx(
    body: ConvexBody,
    k: int,
    delta0: float | None = None,
    eps0: float | None = None,
    n_samples: int = 16384,
) -> ConvexBody:
    """Smooth, strictly convex outer approximation of ``body`` at level ``k``.

    The support function is averaged over an angular window of half-width
    ``delta_k / (4 R)`` (``delta_k = delta0 2^-k``, ``R = max h``) and then
    raised by ``eps_k = osc_k + eps0 2^-k`` where ``osc_k`` is the measured
    oscillation of ``h`` over the window.  Averaging commutes with the
    discrete curvature operator, so the result has curvature radius at
    least ``eps_k`` everywhere.

    Parameters
    ----------
    body : ConvexBody
        The body to approximate (in the intended use, ``K°``).
    k : int
        Level, ``k >= 1``.
    delta0, eps0 : float, optional
        Width and margin scales.  ``eps0 > delta0`` gives strict nesting of
        consecutive levels.  Defaults ``R/2`` and ``R``.
    n_samples : int
        Number of directions of the output.

    Returns
    -------
    ConvexBody
        ``support_samples`` body (an interval in 1D) with ``meta`` holding
        ``k``, ``delta_k``, ``eps_k``, ``width`` and ``osc``.

    Raises
    ------
    BodyError
        If the smoothing window spans fewer than three samples.
    """
    if k < 1:
        raise BodyError("smoothing level must be >= 1")
    if body.dim == 1:
        a, b = body.data
        e0 = eps0 if eps0 is not None else max(a, b)
        eps = e0 * 2.0**-k
        out = ConvexBody.interval(a + eps, b + eps)
        out.meta.update(k=k, delta_k=0.0, eps_k=eps, width=0.0, osc=0.0)
        return out
    u = _directions(n_samples)
    h = _support_flat(body, u)
    R = float(h.max())
    d0 = 0.5 * R if delta0 is None else float(delta0)
    e0 = R if eps0 is None else float(eps0)
    delta = d0 * 2.0**-k
    width = delta / (4 * R)
    d = 2 * np.pi / n_samples
    if width < 3 * d:
        raise BodyError(
            f"smoothing window {width:.3g} rad at k={k} is under-resolved by "
            f"{n_samples} directions; increase n_samples"
        )
    w = _bump_weights(width, d)
    m = (len(w) - 1) // 2
    # circular convolution through the FFT
    ker = np.zeros(n_samples)
    ker[: m + 1] = w[m:]
    ker[-m:] = w[:m]
    hs = np.fft.irfft(np.fft.rfft(h) * np.fft.rfft(ker), n=n_samples)
    osc = float(
        (maximum_filter1d(h, 2 * m + 1, mode="wrap") - minimum_filter1d(h, 2 * m + 1, mode="wrap")).max()
    )
    eps = osc + e0 * 2.0**-k
    out = ConvexBody.support_samples(hs + eps, validate=False,
                                     meta=dict(k=k, delta_k=delta, eps_k=eps, width=width, osc=osc))
    rep = validate_body(out)
    if not rep.ok:
        raise BodyError("smoothing produced an invalid body: " + "; ".join(rep.messages))
    return out


@dataclass
class SmoothingCertificate:
    """Numerical certificate for a sequence ``K°_1, ..., K°_kmax``.

    ``nesting_margin[k]`` is ``min_j (h_k - h_{k+1})`` over the direction
    grid; positive values certify ``K°_{k+1}`` inside the interior of
    ``K°_k``.  ``contains_margin[k]`` is ``min (h_k - h_{K°})``.
    """

    levels: list[int]
    hausdorff: list[float]
    bound: list[float]
    nesting_margin: list[float]
    contains_margin: list[float]
    min_curvature_radius: list[float]

    @property
    def ok(self) -> bool:
        return (
            all(m > 0 for m in self.nesting_margin)
            and all(m > 0 for m in self.contains_margin)
            and all(hd <= b * (1 + 1e-9) for hd, b in zip(self.hausdorff, self.bound))
        )


def smoothing_sequence(
    body: ConvexBody,
    k_max: int,
    delta0: float | None = None,
    eps0: float | None = None,
    n_samples: int = 16384,
) -> tuple[list[ConvexBody], SmoothingCertificate]:
    """Levels ``1..k_max`` of :func:`smooth_approx` with a certificate."""
    seq = [smooth_approx(body, k, delta0, eps0, n_samples) for k in range(1, k_max + 1)]
    if body.dim == 1:
        u = np.array([[1.0], [-1.0]])
    else:
        u = _directions(n_samples)
    h0 = _support_flat(body, u)
    hs = [_support_flat(b, u) for b in seq]
    haus = [hausdorff(b, body) for b in seq]
    if body.dim == 1:
        bound = [b.meta["eps_k"] for b in seq]
    else:
        R = float(h0.max())
        d0 = 0.5 * R if delta0 is None else delta0
        e0 = R if eps0 is None else eps0
        bound = [(d0 + e0) * 2.0**-k for k in range(1, k_max + 1)]
    nest = [float((hs[i] - hs[i + 1]).min()) for i in range(k_max - 1)]
    cont = [float((hk - h0).min()) for hk in hs]
    curv = [validate_body(b).min_curvature_radius for b in seq]
    return seq, SmoothingCertificate(list(range(1, k_max + 1)), haus, bound, nest, cont, curv)


# ---------------------------------------------------------------------------
# config round trip


def body_from_config(cfg: dict[str, Any]) -> ConvexBody:
    """Build a body from a config literal such as ``{"kind": "square"}``."""
    if not isinstance(cfg, dict) or "kind" not in cfg:
        raise BodyError("body config must be an object with a 'kind' key")
    k = cfg["kind"]
    try:
        if k == "interval":
            return ConvexBody.interval(float(cfg.get("a", 1.0)), float(cfg.get("b", 1.0)))
        if k == "ball":
            return ConvexBody.ball(float(cfg.get("r", 1.0)))
        if k == "ellipse":
            return ConvexBody.ellipse(float(cfg["a"]), float(cfg["b"]))
        if k == "square":
            return ConvexBody.square(float(cfg.get("half", 1.0)))
        if k == "polygon":
            if "vertices" in cfg:
                return ConvexBody.polygon(cfg["vertices"])
            return ConvexBody.regular_polygon(int(cfg["n"]), float(cfg.get("r", 1.0)),
                                              float(cfg.get("phase", 0.0)))
        if k == "support_samples":
            return ConvexBody.support_samples(cfg["h"])
    except KeyError as exc:
        raise BodyError(f"body config missing key {exc}") from None
    raise BodyError(f"unknown body kind {k!r}")


def body_to_config(body: ConvexBody) -> dict[str, Any]:
    k = body.kind
    if k == "interval":
        return {"kind": k, "a": float(body.data[0]), "b": float(body.data[1])}
    if k == "ball":
        return {"kind": k, "r": float(body.data[0])}
    if k == "ellipse":
        return {"kind": k, "a": float(body.data[0]), "b": float(body.data[1])}
    if k == "square":
        return {"kind": k, "half": float(body.data[0])}
    if k == "polygon":
        return {"kind": k, "vertices": body.data.tolist()}
    if k == "support_samples":
        return {"kind": k, "h": body.data.tolist()}
    raise BodyError(f"cannot serialize {k!r} bodies")
