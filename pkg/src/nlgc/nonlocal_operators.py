"""Monotone quadrature for nonlocal elliptic operators.

The operators act on second differences
``delta u(x, y) = u(x + y) + u(x - y) - 2 u(x)`` against kernels comparable
to ``(1 - s) |y|^{-n-2s}``:

    I u(x) = sum_m w_m g(delta u(x, h m)) + T g(S_far(x) - 2 u(x))

with positive weights ``w_m`` over half of the lattice ``|m|_inf <= M``,
``g(r) = lp r^+ - ln r^-`` (``lp = ln = 1`` for linear kernels, ``(Lambda,
lambda)`` for the maximal Pucci operator and ``(lambda, Lambda)`` for the
minimal one) and a far-field mass ``T``.  Positivity of every weight makes
the scheme monotone.

Weights
-------
1D
    ``u`` is replaced by its piecewise-linear interpolant on each cell
    ``[j h, (j+1) h]``, ``j >= 1``, and by the quadratic
    ``(y/h)^2 delta u(h)`` on ``[0, h]``.
2D
    Cell integrals of the kernel over ``h (m + [-1/2, 1/2]^2)``; the
    central cell contributes through the axis second differences.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable

import numpy as np
from scipy.special import gamma as Gamma

from . import kernels
from .domain_obstacles import ExteriorData

__all__ = [
    "KernelError",
    "KernelSpec",
    "ExteriorRule",
    "GridField",
    "Stencil",
    "build_stencil",
    "apply_operator",
    "OperatorResult",
    "second_difference",
    "ellipticity_check",
    "local_limit_probe",
    "local_constant",
]

KINDS = ("frac_laplacian", "pucci_plus", "pucci_minus", "custom_L0")


class KernelError(ValueError):
    """Invalid kernel parameters; the message names the offending key."""


@dataclass(frozen=True)
class KernelSpec:
    """Kernel class and operator kind.

    Parameters
    ----------
    s : float
        Order, ``s0 < s < 1``.
    s0 : float
        Lower bound on the order used in uniform estimates.
    lam, Lam : float
        Ellipticity constants ``0 < lam <= Lam``.
    kind : str
        ``frac_laplacian``, ``pucci_plus``, ``pucci_minus`` or
        ``custom_L0``.
    R_inf : float or None
        Half-width of the quadrature lattice; must cover the grid box.
    normalization : str
        ``one_minus_s`` (kernel ``(1 - s) |y|^{-n-2s}``) or ``standard``
        (``c_{n,s} / 2`` so that the operator is ``-(-Laplace)^s``).
    theta : callable or None
        For ``custom_L0``: ``theta(y)`` in ``[lam, Lam]`` multiplying the
        base kernel.
    """

    s: float
    s0: float | None = None
    lam: float = 1.0
    Lam: float = 1.0
    kind: str = "frac_laplacian"
    R_inf: float | None = None
    normalization: str = "one_minus_s"
    theta: Callable | None = field(default=None, compare=False)

    def __post_init__(self):
        s0 = self.s / 2 if self.s0 is None else self.s0
        object.__setattr__(self, "s0", float(s0))
        if not (0 < self.s < 1):
            raise KernelError(f"s must lie in (0, 1), got {self.s}")
        if not (0 < self.s0 < self.s):
            raise KernelError(f"s0 must satisfy 0 < s0 < s, got s0={self.s0}, s={self.s}")
        if not self.lam > 0:
            raise KernelError(f"lambda must be positive, got {self.lam}")
        if not self.lam <= self.Lam:
            raise KernelError(f"lambda must not exceed Lambda, got lambda={self.lam} > Lambda={self.Lam}")
        if self.kind not in KINDS:
            raise KernelError(f"kind must be one of {KINDS}, got {self.kind!r}")
        if self.normalization not in ("one_minus_s", "standard"):
            raise KernelError(f"normalization must be 'one_minus_s' or 'standard', got {self.normalization!r}")
        if self.kind == "custom_L0" and self.theta is None:
            raise KernelError("theta is required for kind custom_L0")
        if self.R_inf is not None and not self.R_inf > 0:
            raise KernelError(f"R_inf must be positive, got {self.R_inf}")

    def constant(self, n: int) -> float:
        """Kernel prefactor ``(1 - s)`` or ``c_{n,s} / 2``."""
        s = self.s
        if self.normalization == "one_minus_s":
            return 1.0 - s
        c = 4.0**s * Gamma(n / 2 + s) / (np.pi ** (n / 2) * abs(Gamma(-s)))
        return 0.5 * c

    def slopes(self) -> tuple[float, float]:
        """``(lp, ln)`` of the second-difference nonlinearity."""
        if self.kind == "pucci_plus":
            return self.Lam, self.lam
        if self.kind == "pucci_minus":
            return self.lam, self.Lam
        return 1.0, 1.0

    def pucci(self, sign: int) -> "KernelSpec":
        return KernelSpec(self.s, self.s0, self.lam, self.Lam,
                          "pucci_plus" if sign > 0 else "pucci_minus",
                          self.R_inf, self.normalization)


def local_constant(n: int) -> float:
    """Limit ``c_n = |S^{n-1}| / (2n)`` of the ``(1 - s)`` normalized operator."""
    sigma = 2 * np.pi ** (n / 2) / Gamma(n / 2)
    return sigma / (2 * n)


# ---------------------------------------------------------------------------
# exterior rules


@dataclass(frozen=True, eq=False)
class ExteriorRule:
    """Values of a field off its grid box and far-field summaries.

    ``kind`` is ``zero``, ``constant``, ``affine`` (exact far fields) or
    ``callable``.  For callables, ``bounds`` are global bounds and
    ``beyond(r)`` returns ``(lo, hi)`` valid at points with
    ``|z - center|_inf >= r``; this lets flat or decaying data produce
    exact or tight far-field sums.
    """

    func: Callable[[np.ndarray], np.ndarray]
    dim: int
    kind: str = "callable"
    const: float = 0.0
    slope: tuple = ()
    center: tuple = ()
    bounds: tuple = (-np.inf, np.inf)
    beyond: Callable[[float], tuple] | None = None

    @classmethod
    def zero(cls, dim: int) -> "ExteriorRule":
        return cls(lambda p: np.zeros(len(p)), dim, "zero", bounds=(0.0, 0.0))

    @classmethod
    def from_data(cls, phi: ExteriorData) -> "ExteriorRule":
        if phi.kind == "zero":
            return cls.zero(phi.dim)
        if phi.kind == "constant":
            v = phi.value
            return cls(lambda p: np.full(len(p), v), phi.dim, "constant", const=v, bounds=(v, v))
        if phi.kind == "affine":
            return cls(phi.eval_flat, phi.dim, "affine", const=phi.value, slope=phi.slope)
        R, v = phi.far_constant()
        sup = phi.sup_abs()
        lo, hi = (0.0, sup) if phi.coef >= 0 else (-sup, 0.0)

        def beyond(r, R=R, v=v, lo=lo, hi=hi):
            return (v, v) if r >= R else (lo, hi)

        return cls(phi.eval_flat, phi.dim, "callable", center=phi.center, bounds=(lo, hi),
                   beyond=beyond)

    @classmethod
    def function(cls, func, dim: int, bounds=(-np.inf, np.inf), center=None, beyond=None) -> "ExteriorRule":
        c = tuple(center) if center is not None else (0.0,) * dim
        return cls(func, dim, "callable", center=c, bounds=tuple(bounds), beyond=beyond)

    def __call__(self, p: np.ndarray) -> np.ndarray:
        return self.func(np.asarray(p, dtype=float).reshape(-1, self.dim))

    def far_sum(self, x: np.ndarray, R: float) -> tuple[np.ndarray, np.ndarray]:
        """Representative ``u(x+y) + u(x-y)`` over ``|y|_inf > R``.

        Returns the midpoint of the enclosing interval and its half-width.
        """
        N = len(x)
        if self.kind == "zero":
            return np.zeros(N), np.zeros(N)
        if self.kind == "constant":
            return np.full(N, 2 * self.const), np.zeros(N)
        if self.kind == "affine":
            return 2 * (x @ np.asarray(self.slope) + self.const), np.zeros(N)
        lo = np.full(N, self.bounds[0], dtype=float)
        hi = np.full(N, self.bounds[1], dtype=float)
        if self.beyond is not None:
            c = np.asarray(self.center if self.center else (0.0,) * self.dim)
            reach = R - np.abs(x - c).max(axis=1)
            for j in range(N):
                a, b = self.beyond(float(reach[j]))
                lo[j], hi[j] = max(lo[j], a), min(hi[j], b)
        if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
            raise KernelError("R_inf: far field of unbounded exterior data has no exact rule")
        return lo + hi, hi - lo


def _subtract_rules(a: ExteriorRule, b: ExteriorRule) -> ExteriorRule:
    if a.kind in ("zero", "constant", "affine") and b.kind in ("zero", "constant", "affine"):
        sa = np.asarray(a.slope) if a.slope else np.zeros(a.dim)
        sb = np.asarray(b.slope) if b.slope else np.zeros(b.dim)
        sl = tuple(sa - sb)
        c = a.const - b.const
        return ExteriorRule(lambda p: p @ np.asarray(sl) + c, a.dim, "affine", const=c, slope=sl)
    lo = a.bounds[0] - b.bounds[1]
    hi = a.bounds[1] - b.bounds[0]
    beyond = None
    if a.beyond is not None and b.beyond is not None and a.center == b.center:
        def beyond(r):
            la, ha = a.beyond(r)
            lb, hb = b.beyond(r)
            return la - hb, ha - lb
    return ExteriorRule(lambda p: a.func(p) - b.func(p), a.dim, "callable", center=a.center,
                        bounds=(lo, hi), beyond=beyond)


# ---------------------------------------------------------------------------
# grid fields


@dataclass(eq=False)
class GridField:
    """Node values on a uniform box grid plus an exterior rule.

    Attributes
    ----------
    origin : numpy.ndarray
        Coordinates of node ``(0, ..., 0)``.
    h : float
        Grid spacing.
    values : numpy.ndarray
        Shape ``(n0,)`` or ``(n0, n1)``; authoritative on the whole box.
    exterior : ExteriorRule
        Values off the box.
    """

    origin: np.ndarray
    h: float
    values: np.ndarray
    exterior: ExteriorRule

    def __post_init__(self):
        self.origin = np.atleast_1d(np.asarray(self.origin, dtype=float))
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != len(self.origin):
            raise ValueError("values and origin dimensions differ")

    @property
    def dim(self) -> int:
        return len(self.origin)

    @property
    def shape(self) -> tuple:
        return self.values.shape

    def coords(self) -> np.ndarray:
        """Node coordinates, shape ``shape + (dim,)``."""
        axes = [self.origin[k] + self.h * np.arange(n) for k, n in enumerate(self.shape)]
        g = np.meshgrid(*axes, indexing="ij")
        return np.stack(g, axis=-1)

    def node_coords(self, idx: np.ndarray) -> np.ndarray:
        return self.origin + self.h * np.asarray(idx, dtype=float).reshape(-1, self.dim)

    def extended(self, pad: int) -> np.ndarray:
        """Values on the box grown by ``pad`` nodes per side."""
        shape = tuple(n + 2 * pad for n in self.shape)
        axes = [self.origin[k] + self.h * (np.arange(n) - pad) for k, n in enumerate(shape)]
        g = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, self.dim)
        inner = np.zeros(shape, dtype=bool)
        inner[tuple(slice(pad, pad + n) for n in self.shape)] = True
        out = np.empty(shape)
        out[inner] = self.values.ravel()
        flat_in = inner.ravel()
        out.reshape(-1)[~flat_in] = self.exterior(g[~flat_in])
        return out

    def value_at(self, pts) -> tuple[np.ndarray, np.ndarray]:
        """Values at arbitrary points and a flag for interpolated ones."""
        p = np.asarray(pts, dtype=float).reshape(-1, self.dim)
        q = (p - self.origin) / self.h
        n = np.array(self.shape)
        inbox = np.all((q >= -1e-9) & (q <= n - 1 + 1e-9), axis=1)
        out = np.empty(len(p))
        interp = np.zeros(len(p), dtype=bool)
        out[~inbox] = self.exterior(p[~inbox])
        qi = q[inbox]
        r = np.rint(qi)
        on = np.all(np.abs(qi - r) <= 1e-9, axis=1)
        idx = np.where(inbox)[0]
        ri = r[on].astype(int)
        out[idx[on]] = self.values[tuple(ri.T)]
        off = idx[~on]
        if len(off):
            qo = np.clip(q[off], 0, n - 1)
            base = np.minimum(np.floor(qo).astype(int), n - 2)
            f = qo - base
            acc = np.zeros(len(off))
            for corner in np.ndindex(*(2,) * self.dim):
                c = np.array(corner)
                wgt = np.prod(np.where(c == 1, f, 1 - f), axis=1)
                acc += wgt * self.values[tuple((base + c).T)]
            out[off] = acc
            interp[off] = True
        return out, interp

    def with_values(self, values: np.ndarray) -> "GridField":
        return GridField(self.origin.copy(), self.h, np.asarray(values, float).reshape(self.shape),
                         self.exterior)

    def __sub__(self, other: "GridField") -> "GridField":
        if other.shape != self.shape or other.h != self.h or np.any(other.origin != self.origin):
            raise ValueError("fields live on different grids")
        return GridField(self.origin.copy(), self.h, self.values - other.values,
                         _subtract_rules(self.exterior, other.exterior))


# ---------------------------------------------------------------------------
# stencils


@dataclass(frozen=True, eq=False)
class Stencil:
    """Half-lattice offsets, combined positive weights and far mass.

    ``R_far`` is the ``inf``-norm radius beyond which the far-field rule
    applies; ``pad`` the number of lattice cells needed around the box.
    """

    dim: int
    h: float
    pad: int
    offsets: np.ndarray
    weights: np.ndarray
    tail: float
    R_far: float


def _gl(n: int):
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1), 0.5 * w


def _hat_weights_1d(M: int, s: float) -> tuple[np.ndarray, float]:
    """Unit-spacing 1D weights (before the kernel constant) and far mass."""
    x, wq = _gl(12)
    j = np.arange(1, M)[:, None]  # cells [j, j+1]
    z = j + x[None]
    f = z ** (-1 - 2 * s)
    rise = (f * x[None]) @ wq  # hat of node j+1 rising on [j, j+1]
    fall = (f * (1 - x[None])) @ wq  # hat of node j falling on [j, j+1]
    w = np.zeros(M)
    w[0] = 1.0 / (2 - 2 * s)
    w[:-1] += fall
    w[1:] += rise
    tail = M ** (-2 * s) / (2 * s)
    return 2 * w, 2 * tail


def _cell_weights_2d(M: int, s: float):
    """Unit-spacing 2D half-lattice offsets, weights and far mass."""
    rng = np.arange(-M, M + 1)
    mi, mj = np.meshgrid(rng, rng, indexing="ij")
    m = np.stack([mi.ravel(), mj.ravel()], axis=1)
    half = (m[:, 0] > 0) | ((m[:, 0] == 0) & (m[:, 1] > 0))
    m = m[half]
    x, wq = _gl(8)
    px = (x - 0.5)
    qx, qy = np.meshgrid(px, px, indexing="ij")
    qw = np.outer(wq, wq).ravel()
    qx, qy = qx.ravel(), qy.ravel()
    W = np.empty(len(m))
    near = np.abs(m).max(axis=1) <= 2
    far = ~near
    for sl, sub in ((far, 1), (near, 8)):
        mm = m[sl]
        acc = np.zeros(len(mm))
        for a in range(sub):
            for b in range(sub):
                ox = -0.5 + (a + 0.5) / sub
                oy = -0.5 + (b + 0.5) / sub
                yx = mm[:, 0, None] + ox + qx[None] / sub
                yy = mm[:, 1, None] + oy + qy[None] / sub
                r2 = yx * yx + yy * yy
                acc += (r2 ** (-1 - s)) @ qw / sub**2
        W[sl] = acc
    W *= 2  # the pair m, -m
    # central cell: int_{[-1/2,1/2]^2} y_1^2 |y|^{-2-2s} dy
    th, tw = np.polynomial.legendre.leggauss(64)
    th = (th + 1) * np.pi / 8  # [0, pi/4], eight symmetric copies
    tw = tw * np.pi / 8
    rq = 0.5 / np.cos(th)
    c0 = 8 * np.sum(tw * rq ** (2 - 2 * s)) / (2 * (2 - 2 * s))
    for e in ([1, 0], [0, 1]):
        W[np.all(m == e, axis=1)] += c0
    # far mass outside the square of half-width M + 1/2
    ang = 8 * np.sum(tw * np.cos(th) ** (2 * s))
    tail = (M + 0.5) ** (-2 * s) / (2 * s) * ang
    return m, W, tail


@lru_cache(maxsize=64)
def _unit_stencil(dim: int, M: int, s: float):
    if dim == 1:
        w, tail = _hat_weights_1d(M, s)
        return np.arange(1, M + 1)[:, None], w, tail
    return _cell_weights_2d(M, s)


def build_stencil(kernel: KernelSpec, dim: int, h: float, box_extent: float | None = None) -> Stencil:
    """Stencil for ``kernel`` on spacing ``h``.

    Parameters
    ----------
    kernel : KernelSpec
    dim : int
    h : float
    box_extent : float, optional
        Largest side of the grid box.  The lattice half-width ``R_inf``
        must be at least this, so that every pair of box nodes is coupled
        through the near-field sum.  Default ``R_inf`` is ``8 * extent``
        in 1D and ``1.5 * extent`` in 2D.

    Raises
    ------
    KernelError
        If ``R_inf`` is smaller than the box extent.
    """
    if box_extent is None:
        box_extent = 0.0
    R = kernel.R_inf
    if R is None:
        R = (8.0 if dim == 1 else 1.5) * box_extent if box_extent > 0 else 4.0
    if R < box_extent * (1 - 1e-12):
        raise KernelError(f"R_inf={R} is smaller than the grid box extent {box_extent}")
    M = int(np.ceil(R / h - 1e-9))
    m, w, tail = _unit_stencil(dim, M, float(kernel.s))
    C = kernel.constant(dim)
    scale = C * h ** (-2 * kernel.s)
    w = w * scale
    if kernel.kind == "custom_L0":
        th = np.asarray(kernel.theta(m * h), dtype=float).reshape(-1)
        if np.any(th < kernel.lam - 1e-12) or np.any(th > kernel.Lam + 1e-12):
            raise KernelError("theta: values leave [lambda, Lambda]")
        w = w * th
        # the far field keeps the base kernel scaled by the largest theta
    R_far = (M if dim == 1 else M + 0.5) * h
    return Stencil(dim, h, M, m.astype(np.int64), w, tail * scale, R_far)


def flat_offsets(offsets: np.ndarray, ext_shape: tuple) -> np.ndarray:
    """Flat index shifts of lattice offsets on a C-ordered array."""
    strides = np.cumprod((1,) + tuple(ext_shape[::-1]))[:-1][::-1]
    return (offsets @ np.asarray(strides)).astype(np.int64)


# ---------------------------------------------------------------------------
# application


@dataclass
class OperatorResult:
    """Operator values at nodes with an enclosure half-width ``err``."""

    nodes: np.ndarray
    value: np.ndarray
    err: np.ndarray

    @property
    def lower(self) -> np.ndarray:
        return self.value - self.err

    @property
    def upper(self) -> np.ndarray:
        return self.value + self.err


def _node_index(u: GridField, nodes) -> np.ndarray:
    if nodes is None:
        return np.array(list(np.ndindex(*u.shape)), dtype=np.int64).reshape(-1, u.dim)
    nodes = np.asarray(nodes)
    if nodes.dtype == bool:
        return np.argwhere(nodes).astype(np.int64)
    return nodes.astype(np.int64).reshape(-1, u.dim)


def apply_operator(kernel: KernelSpec, u: GridField, nodes=None, stencil: Stencil | None = None,
                   max_parallel: int = 1, backend=None) -> OperatorResult:
    """Evaluate the discrete operator at grid nodes.

    Parameters
    ----------
    kernel : KernelSpec
    u : GridField
    nodes : array_like, optional
        Integer node indices ``(N, dim)`` or a boolean mask; all box nodes
        by default.
    stencil : Stencil, optional
        Reuse a prebuilt stencil.

    Returns
    -------
    OperatorResult
        ``err`` bounds the far-field uncertainty; the near field is
        exact for the interpolated field.
    """
    idx = _node_index(u, nodes)
    st = stencil or build_stencil(kernel, u.dim, u.h, u.h * (max(u.shape) - 1))
    if st.h != u.h:
        raise KernelError("stencil spacing differs from the grid spacing")
    U = u.extended(st.pad)
    flat = np.ravel_multi_index(tuple((idx + st.pad).T), U.shape).astype(np.int64)
    offs = flat_offsets(st.offsets, U.shape)
    lp, ln = kernel.slopes()
    near = kernels.apply_nodes(U.ravel(), flat, offs, st.weights, lp, ln, max_parallel,
                               be=kernels.get_backend(backend))
    x = u.node_coords(idx)
    S, hw = u.exterior.far_sum(x, st.R_far)
    ui = U.ravel()[flat]
    r = S - 2 * ui
    g = np.where(r >= 0, lp * r, ln * r)
    if kernel.kind == "custom_L0":
        # theta is only known to lie in [lambda, Lambda] on the far field
        mid, rad = 0.5 * (kernel.Lam + kernel.lam), 0.5 * (kernel.Lam - kernel.lam)
        val = near + st.tail * mid * g
        err = st.tail * (rad * np.abs(g) + kernel.Lam * hw)
    else:
        val = near + st.tail * g
        err = st.tail * max(lp, ln) * hw
    return OperatorResult(idx, val, err)


def second_difference(u: GridField, x, y) -> tuple[float, bool]:
    """``u(x + y) + u(x - y) - 2 u(x)`` and whether interpolation was used."""
    x = np.asarray(x, dtype=float).reshape(u.dim)
    y = np.asarray(y, dtype=float).reshape(u.dim)
    v, flag = u.value_at(np.stack([x + y, x - y, x]))
    return float(v[0] + v[1] - 2 * v[2]), bool(flag.any())


@dataclass
class EllipticityReport:
    """Margins of ``M^-(u - v) <= I u - I v <= M^+(u - v)`` at nodes."""

    lower_margin: float
    upper_margin: float
    tol: float

    @property
    def ok(self) -> bool:
        return self.lower_margin >= -self.tol and self.upper_margin >= -self.tol


def ellipticity_check(kernel: KernelSpec, u: GridField, v: GridField, nodes=None,
                      tol: float = 1e-9) -> EllipticityReport:
    """Check the Pucci sandwich of ``I u - I v`` at the given nodes."""
    st = build_stencil(kernel, u.dim, u.h, u.h * (max(u.shape) - 1))
    Iu = apply_operator(kernel, u, nodes, st)
    Iv = apply_operator(kernel, v, nodes, st)
    w = u - v
    Mp = apply_operator(kernel.pucci(+1), w, nodes, st)
    Mm = apply_operator(kernel.pucci(-1), w, nodes, st)
    d = Iu.value - Iv.value
    slack = Iu.err + Iv.err
    lower = float(np.min(d - Mm.value + slack + Mm.err))
    upper = float(np.min(Mp.value - d + slack + Mp.err))
    scale = max(1.0, float(np.abs(d).max()))
    return EllipticityReport(lower, upper, tol * scale)


@dataclass
class LocalLimitRow:
    s: float
    value: float
    limit: float
    rel_dev: float
    err: float


def local_limit_probe(u_func: Callable, lap_func: Callable, x0, s_values=(0.6, 0.9, 0.99),
                      h: float = 1 / 64, halfwidth: float = 4.0, dim: int | None = None,
                      bounds=(0.0, 1.0), beyond=None, R_inf: float | None = None) -> list[LocalLimitRow]:
    """Compare the operator with ``c_n Laplace u`` as ``s -> 1``.

    ``u_func`` maps ``(N, n)`` points to values; ``lap_func`` gives the
    Laplacian at ``x0``.  The field is sampled on a box of half-width
    ``halfwidth`` around ``x0`` and continued by ``u_func`` itself.
    """
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    n = dim or len(x0)
    k = int(round(halfwidth / h))
    origin = x0 - k * h
    axes = [origin[i] + h * np.arange(2 * k + 1) for i in range(n)]
    g = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
    vals = u_func(g.reshape(-1, n)).reshape(g.shape[:-1])
    rule = ExteriorRule.function(u_func, n, bounds=bounds, center=x0, beyond=beyond)
    field_ = GridField(origin, h, vals, rule)
    node = np.array([[k] * n])
    target = local_constant(n) * float(lap_func(x0))
    rows = []
    for s in s_values:
        ks = KernelSpec(s=s, R_inf=R_inf or 2 * halfwidth * (4 if n == 1 else 1.5))
        res = apply_operator(ks, field_, node)
        v = float(res.value[0])
        rows.append(LocalLimitRow(s, v, target, abs(v - target) / abs(target), float(res.err[0])))
    return rows
