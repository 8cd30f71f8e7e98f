"""Reference numpy implementations of the hot loops.

All routines work on a flat array ``U`` holding a field on an extended
lattice.  A node ``i`` sees the symmetric pairs ``U[i + d]`` and
``U[i - d]`` for each flat offset ``d`` with combined weight ``w``; the
nonlinearity is ``g(r) = lp * r`` for ``r >= 0`` and ``ln * r`` otherwise.
"""

from __future__ import annotations

import numpy as np

BACKEND = "python"


def _g(r, lp, ln):
    return np.where(r >= 0, lp * r, ln * r)


def apply_nodes(U, nodes, offs, w, lp, ln, out):
    """``out[a] = sum_k w_k g(U[i+d_k] + U[i-d_k] - 2 U[i])`` for ``i = nodes[a]``."""
    step = max(1, 4_000_000 // max(len(offs), 1))
    for a0 in range(0, len(nodes), step):
        idx = nodes[a0:a0 + step]
        ui = U[idx]
        r = U[idx[:, None] + offs[None]] + U[idx[:, None] - offs[None]] - 2 * ui[:, None]
        out[a0:a0 + step] = _g(r, lp, ln) @ w
    return out


def jacobian_nodes(U, nodes, offs, w, lp, ln, unk, J):
    """Accumulate ``d(I u)/d u`` into ``J[a, unk[j]]`` (``unk = -1`` skips)."""
    n_unk = J.shape[1]
    for a, i in enumerate(nodes):
        r = U[i + offs] + U[i - offs] - 2 * U[i]
        c = w * np.where(r >= 0, lp, ln)
        cols = np.concatenate([unk[i + offs], unk[i - offs]])
        vals = np.concatenate([c, c])
        keep = cols >= 0
        J[a] += np.bincount(cols[keep], weights=vals[keep], minlength=n_unk)
        if unk[i] >= 0:
            J[a, unk[i]] -= 2 * c.sum()
    return J


def node_root(S, w, lp, ln, T, ST, t0):
    """Root in ``t`` of ``sum_k w_k g(S_k - 2t) + T g(ST - 2t)``.

    The function is nonincreasing and piecewise linear; safeguarded
    Newton steps land on the root after visiting a few pieces.
    """
    lo = 0.5 * min(S.min(), ST) if len(S) else 0.5 * ST
    hi = 0.5 * max(S.max(), ST) if len(S) else 0.5 * ST
    if hi - lo <= 0:
        return lo
    t = min(max(t0, lo), hi)
    for _ in range(200):
        r = S - 2 * t
        rt = ST - 2 * t
        f = w @ _g(r, lp, ln) + T * (lp * rt if rt >= 0 else ln * rt)
        if f == 0:
            return t
        if f > 0:
            lo = t
        else:
            hi = t
        df = -2.0 * (w @ np.where(r >= 0, lp, ln) + T * (lp if rt >= 0 else ln))
        tn = t - f / df if df < 0 else 0.5 * (lo + hi)
        if not (lo < tn < hi):
            tn = 0.5 * (lo + hi)
        if abs(tn - t) <= 1e-16 * max(1.0, abs(t)) or hi - lo <= 1e-16 * max(1.0, abs(t)):
            return tn
        t = tn
    return t


def gs_sweep(U, nodes, offs, w, lp, ln, T, ST, lo, hi, grad_nbr, grad_coef, h, mode, reverse):
    """One Gauss-Seidel sweep; returns the largest update.

    ``mode`` 0 clamps the elliptic root to ``[lo, hi]`` (double obstacle);
    mode 1 takes its minimum with the gradient-constraint roots built
    from ``grad_nbr`` (flat neighbour offsets, shape ``(nv, n)``) and
    ``grad_coef`` (``|v_k|``); mode 2 is the unconstrained equation.
    """
    order = range(len(nodes) - 1, -1, -1) if reverse else range(len(nodes))
    big = 0.0
    for a in order:
        i = nodes[a]
        S = U[i + offs] + U[i - offs]
        t = node_root(S, w, lp, ln, T, ST[a], U[i])
        if mode == 0:
            t = min(max(t, lo[a]), hi[a])
        elif mode == 1:
            den = grad_coef.sum(axis=1)
            tc = (h + (grad_coef * U[i + grad_nbr]).sum(axis=1)) / den
            t = min(t, tc.min())
        big = max(big, abs(t - U[i]))
        U[i] = t
    return big


def jacobi_targets(U, nodes, offs, w, lp, ln, T, ST, out):
    """Elliptic node roots from a frozen copy of ``U``."""
    for a, i in enumerate(nodes):
        S = U[i + offs] + U[i - offs]
        out[a] = node_root(S, w, lp, ln, T, ST[a], U[i])
    return out


def upwind_hamiltonian(U, nodes, grad_nbr, grad_coef, h, out):
    """``max_v sum_k |v_k| (U[i] - U[i + nbr_vk]) / h``."""
    ui = U[nodes]
    vals = (grad_coef[None] * (ui[:, None, None] - U[nodes[:, None, None] + grad_nbr[None]])).sum(axis=2) / h
    out[:] = vals.max(axis=1)
    return out
