"""Backend selection for the hot loops.

The compiled extension is used when it imports; otherwise, or when
``NLGC_PURE_PYTHON=1`` is set, the numpy reference implementation is used.
Both produce identical results up to floating-point summation order.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import _pykernels

_c = None
if os.environ.get("NLGC_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _ckernels as _c
    except ImportError:  # extension not built
        _c = None

backend = _c if _c is not None else _pykernels
BACKEND = backend.BACKEND


def get_backend(name: str | None = None):
    """Return the module for ``"cython"``, ``"python"`` or the default."""
    if name is None:
        return backend
    if name == "python":
        return _pykernels
    if name == "cython":
        if _c is None:
            raise RuntimeError("compiled kernels are not available")
        return _c
    raise ValueError(f"unknown backend {name!r}")


def _i64(a) -> np.ndarray:
    return np.ascontiguousarray(a, dtype=np.int64)


def _f64(a) -> np.ndarray:
    return np.ascontiguousarray(a, dtype=np.float64)


def apply_nodes(U, nodes, offs, w, lp, ln, max_parallel: int = 1, be=None) -> np.ndarray:
    """Near-field sum at ``nodes``; see ``_pykernels.apply_nodes``.

    With ``max_parallel > 1`` the nodes are split into contiguous chunks
    evaluated on a thread pool (the compiled loop releases the GIL).  Each
    node is computed independently, so results do not depend on the
    number of workers.
    """
    be = be or backend
    U, nodes, offs, w = _f64(U), _i64(nodes), _i64(offs), _f64(w)
    out = np.empty(len(nodes))
    if max_parallel <= 1 or len(nodes) < 2 * max_parallel:
        be.apply_nodes(U, nodes, offs, w, float(lp), float(ln), out)
        return out
    bounds = np.linspace(0, len(nodes), max_parallel + 1).astype(int)

    def run(j):
        sl = slice(bounds[j], bounds[j + 1])
        o = np.empty(bounds[j + 1] - bounds[j])
        be.apply_nodes(U, np.ascontiguousarray(nodes[sl]), offs, w, float(lp), float(ln), o)
        out[sl] = o

    with ThreadPoolExecutor(max_parallel) as ex:
        list(ex.map(run, range(max_parallel)))
    return out


def jacobian_nodes(U, nodes, offs, w, lp, ln, unk, n_unk: int, be=None) -> np.ndarray:
    be = be or backend
    J = np.zeros((len(nodes), n_unk))
    be.jacobian_nodes(_f64(U), _i64(nodes), _i64(offs), _f64(w), float(lp), float(ln), _i64(unk), J)
    return J


def gs_sweep(U, nodes, offs, w, lp, ln, T, ST, lo, hi, grad_nbr, grad_coef, h, mode, reverse,
             be=None) -> float:
    be = be or backend
    return float(be.gs_sweep(U, _i64(nodes), _i64(offs), _f64(w), float(lp), float(ln), float(T),
                             _f64(ST), _f64(lo), _f64(hi), _i64(grad_nbr), _f64(grad_coef),
                             float(h), int(mode), bool(reverse)))


def jacobi_targets(U, nodes, offs, w, lp, ln, T, ST, be=None) -> np.ndarray:
    be = be or backend
    out = np.empty(len(nodes))
    be.jacobi_targets(_f64(U), _i64(nodes), _i64(offs), _f64(w), float(lp), float(ln), float(T),
                      _f64(ST), out)
    return out


def upwind_hamiltonian(U, nodes, grad_nbr, grad_coef, h, be=None) -> np.ndarray:
    be = be or backend
    out = np.empty(len(nodes))
    be.upwind_hamiltonian(_f64(U), _i64(nodes), _i64(grad_nbr), _f64(grad_coef), float(h), out)
    return out
