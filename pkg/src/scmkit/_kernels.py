"""Numeric hot loops, in two interchangeable backends.

``numba`` compiles the loops with ``@njit``; ``numpy`` is a pure-numpy path
with the same algorithms. Set ``SCMKIT_DISABLE_NUMBA=1`` to force the numpy
path (it is also used when numba is not importable). Both expose:

    project_simplex(y) -> w
    fista(G, h, bb, L, w0, tol, max_iter) -> (w, iterations, gap, rel_change)
    grid_argmin(A, b, J, n) -> (counts, objective)

``fista`` minimizes ``w'Gw - 2h'w + bb`` over the probability simplex with
function-value restarts. The objective is a sum of squares, so both the
Frank-Wolfe duality gap and the objective itself bound the distance to the
optimum; iteration stops once the smaller of the two is at most ``tol``. ``grid_argmin`` scans every simplex point with coordinates in
multiples of ``1/n``, in descending lexicographic order of the weight vector,
keeping the first strict minimum of ``||b - A w||^2``.
"""

from __future__ import annotations

import contextlib
import os
from functools import lru_cache
from types import SimpleNamespace

import numpy as np

try:
    import numba
except ImportError:  # pragma: no cover
    numba = None

NUMBA_AVAILABLE = numba is not None


def _env_disabled() -> bool:
    return os.environ.get("SCMKIT_DISABLE_NUMBA", "").strip().lower() not in ("", "0", "false", "no")


# ---------------------------------------------------------------- numpy path

def _project_simplex_np(y):
    u = np.sort(y)[::-1]
    css = np.cumsum(u) - 1.0
    ind = np.arange(1, y.shape[0] + 1)
    cond = u - css / ind > 0
    rho = ind[cond][-1]
    theta = css[rho - 1] / rho
    return np.maximum(y - theta, 0.0)


def _fista_np(G, h, bb, L, w0, tol, max_iter):
    x = w0.copy()
    y = x.copy()
    t = 1.0
    Gx = G @ x
    fx = x @ Gx - 2.0 * (h @ x) + bb
    g = 2.0 * (Gx - h)
    gap = g @ x - g.min()
    rel = np.inf
    it = 0
    plain = True
    step = 2.0 / L
    while it < max_iter and gap > tol and fx > tol:
        it += 1
        xn = _project_simplex_np(y - step * (G @ y - h))
        Gxn = G @ xn
        fn = xn @ Gxn - 2.0 * (h @ xn) + bb
        if fn > fx:
            if plain:
                break
            t = 1.0
            y = x.copy()
            plain = True
            continue
        rel = abs(fx - fn) / max(1.0, abs(fn))
        tn = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
        y = xn + ((t - 1.0) / tn) * (xn - x)
        plain = t == 1.0
        x, fx, Gx, t = xn, fn, Gxn, tn
        g = 2.0 * (Gx - h)
        gap = g @ x - g.min()
    return x, it, gap, rel


@lru_cache(maxsize=32)
def _grid_np(J, n):
    """All compositions of n into J parts, descending lexicographic order."""
    if J == 1:
        return np.array([[n]], dtype=np.int32)
    parts = []
    for first in range(n, -1, -1):
        rest = _grid_np(J - 1, n - first)
        head = np.full((rest.shape[0], 1), first, dtype=np.int32)
        parts.append(np.hstack([head, rest]))
    out = np.vstack(parts)
    out.flags.writeable = False
    return out


def _grid_argmin_np(A, b, J, n):
    grid = _grid_np(J, n)
    best = np.inf
    best_i = -1
    chunk = 1 << 16
    for s in range(0, grid.shape[0], chunk):
        W = grid[s:s + chunk].astype(np.float64) / n
        R = b[:, None] - A @ W.T
        obj = np.einsum("ij,ij->j", R, R)
        i = int(np.argmin(obj))
        if obj[i] < best:
            best = float(obj[i])
            best_i = s + i
    return grid[best_i].astype(np.int64), best


NUMPY = SimpleNamespace(
    name="numpy",
    project_simplex=_project_simplex_np,
    fista=_fista_np,
    grid_argmin=_grid_argmin_np,
)


# ---------------------------------------------------------------- numba path

def _project_simplex_loop(y):
    n = y.shape[0]
    u = np.sort(y)[::-1]
    css = 0.0
    theta = 0.0
    for i in range(n):
        css += u[i]
        th = (css - 1.0) / (i + 1)
        if u[i] - th > 0.0:
            theta = th
    out = np.empty(n)
    for i in range(n):
        d = y[i] - theta
        out[i] = d if d > 0.0 else 0.0
    return out


def _quad(G, h, bb, x, Gx):
    J = x.shape[0]
    for i in range(J):
        s = 0.0
        for j in range(J):
            s += G[i, j] * x[j]
        Gx[i] = s
    f = bb
    for i in range(J):
        f += x[i] * Gx[i] - 2.0 * h[i] * x[i]
    return f


def _fw_gap(Gx, h, x):
    J = x.shape[0]
    gx = 0.0
    gmin = np.inf
    for i in range(J):
        g = 2.0 * (Gx[i] - h[i])
        gx += g * x[i]
        if g < gmin:
            gmin = g
    return gx - gmin


if NUMBA_AVAILABLE:
    _njit = numba.njit(cache=True, nogil=True)
    _project_nb = _njit(_project_simplex_loop)
    _quad_nb = _njit(_quad)
    _fw_gap_nb = _njit(_fw_gap)

    @numba.njit(cache=True, nogil=True)
    def _fista_nb(G, h, bb, L, w0, tol, max_iter):
        J = w0.shape[0]
        x = w0.copy()
        y = x.copy()
        Gx = np.empty(J)
        Gy = np.empty(J)
        Gxn = np.empty(J)
        z = np.empty(J)
        t = 1.0
        fx = _quad_nb(G, h, bb, x, Gx)
        gap = _fw_gap_nb(Gx, h, x)
        rel = np.inf
        it = 0
        plain = True
        step = 2.0 / L
        while it < max_iter and gap > tol and fx > tol:
            it += 1
            for i in range(J):
                s = 0.0
                for j in range(J):
                    s += G[i, j] * y[j]
                Gy[i] = s
            for i in range(J):
                z[i] = y[i] - step * (Gy[i] - h[i])
            xn = _project_nb(z)
            fn = _quad_nb(G, h, bb, xn, Gxn)
            if fn > fx:
                if plain:
                    break
                t = 1.0
                for i in range(J):
                    y[i] = x[i]
                plain = True
                continue
            rel = abs(fx - fn) / max(1.0, abs(fn))
            tn = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
            beta = (t - 1.0) / tn
            for i in range(J):
                y[i] = xn[i] + beta * (xn[i] - x[i])
                x[i] = xn[i]
                Gx[i] = Gxn[i]
            plain = t == 1.0
            fx = fn
            t = tn
            gap = _fw_gap_nb(Gx, h, x)
        return x, it, gap, rel

    @numba.njit(cache=True, nogil=True)
    def _grid_argmin_nb(A, b, J, n):
        K = A.shape[0]
        c = np.zeros(J, dtype=np.int64)
        c[0] = n
        best = np.inf
        best_c = c.copy()
        inv = 1.0 / n
        while True:
            obj = 0.0
            for k in range(K):
                s = 0.0
                for j in range(J):
                    s += A[k, j] * c[j]
                r = b[k] - s * inv
                obj += r * r
            if obj < best:
                best = obj
                best_c[:] = c
            # next composition in descending lexicographic order
            last = c[J - 1]
            c[J - 1] = 0
            i = J - 2
            while i >= 0 and c[i] == 0:
                i -= 1
            if i < 0:
                break
            c[i] -= 1
            c[i + 1] = last + 1
        return best_c, best

    NUMBA = SimpleNamespace(
        name="numba",
        project_simplex=_project_nb,
        fista=_fista_nb,
        grid_argmin=_grid_argmin_nb,
    )
else:  # pragma: no cover
    NUMBA = None


_active = NUMPY if (NUMBA is None or _env_disabled()) else NUMBA


def active():
    return _active


def backend(name: str):
    if name == "numpy":
        return NUMPY
    if name == "numba":
        if NUMBA is None:
            raise RuntimeError("numba is not installed")
        return NUMBA
    raise ValueError(f"unknown backend {name!r}")


def set_backend(name: str) -> None:
    global _active
    _active = backend(name)


@contextlib.contextmanager
def use_backend(name: str):
    global _active
    prev = _active
    _active = backend(name)
    try:
        yield _active
    finally:
        _active = prev
