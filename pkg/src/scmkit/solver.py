"""Donor-weight and predictor-weight estimation.

The inner problem picks donor weights ``w`` on the probability simplex that
minimize ``sum_k v_k (X1_k - (X0 w)_k)^2``. The outer problem (``nested``
strategy) picks predictor weights ``v`` so that the implied ``w`` tracks the
treated unit's pre-period outcomes as closely as possible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from . import _kernels
from .errors import NoConvergence, NonFiniteInput, SpecError, TooManyDonors
from .panel import Panel
from .rng import SplitMix64
from .study import PredictorBlock, StudySpec, build_matrices, resolve_spec

DEFAULT_TOL = 1e-10
DEFAULT_MAX_ITER = 100_000
REPORT_THRESHOLD = 1e-4
MAX_ORACLE_DONORS = 6
N_RANDOM_STARTS = 8
VERTEX_MASS = 0.99
# inner solves inside the v search only need to rank candidate v's
SEARCH_TOL = 1e-9
SEARCH_MAX_ITER = 3000
SEARCH_STAGE = 100


def inner_objective(X1, X0, v, w) -> float:
    r = np.asarray(X1) - np.asarray(X0) @ np.asarray(w)
    return float(np.sum(np.asarray(v) * r * r))


def _as_inputs(X1, X0, v):
    X1 = np.ascontiguousarray(X1, dtype=np.float64)
    X0 = np.ascontiguousarray(X0, dtype=np.float64)
    v = np.ascontiguousarray(v, dtype=np.float64)
    if X0.ndim != 2 or X1.shape != (X0.shape[0],) or v.shape != X1.shape:
        raise ValueError(f"shape mismatch: X1 {X1.shape}, X0 {X0.shape}, v {v.shape}")
    if not (np.isfinite(X1).all() and np.isfinite(X0).all() and np.isfinite(v).all()):
        raise NonFiniteInput("NonFiniteInput: solver inputs contain NaN or inf")
    if (v < 0).any():
        raise ValueError("predictor weights must be non-negative")
    return X1, X0, v


def _quadratic(X1, X0, v):
    # Shifting every column and X1 by the same vector leaves X1 - X0 w
    # unchanged on the simplex; centring keeps the Lipschitz bound tight.
    sv = np.sqrt(v)
    c = X0.mean(axis=1)
    A = sv[:, None] * (X0 - c[:, None])
    b = sv * (X1 - c)
    G = np.ascontiguousarray(A.T @ A)
    h = A.T @ b
    return A, b, G, h, float(b @ b)


def _quad_value(G, h, bb, w) -> float:
    return float(w @ G @ w - 2.0 * (h @ w) + bb)


def _fw_gap(G, h, w) -> float:
    g = 2.0 * (G @ w - h)
    return float(g @ w - g.min())


def _active_set(G, h, w, tol: float, max_rounds: int):
    """Exact finish for the simplex QP, started from a feasible ``w``.

    Each round solves the equality-constrained problem on the current
    support. Negative entries trigger a step back to the feasible boundary
    and a drop; once the support solution is feasible, the coordinate with
    the most negative gradient enters. Stops when the Frank-Wolfe gap is at
    most ``tol``.
    """
    w = w.copy()
    mask = w > 0.0
    for _ in range(max_rounds):
        idx = np.flatnonzero(mask)
        n = idx.size
        M = np.zeros((n + 1, n + 1))
        M[:n, :n] = 2.0 * G[np.ix_(idx, idx)]
        M[:n, n] = 1.0
        M[n, :n] = 1.0
        z = np.linalg.lstsq(M, np.append(2.0 * h[idx], 1.0), rcond=None)[0][:n]
        if not np.isfinite(z).all():
            break
        cur = w[idx]
        neg = z < 0.0
        if neg.any():
            ratio = cur[neg] / (cur[neg] - z[neg])
            alpha = float(ratio.min())
            step = cur + alpha * (z - cur)
            step[np.flatnonzero(neg)[np.argmin(ratio)]] = 0.0
            step[step < 0.0] = 0.0
            w[idx] = step
            mask[idx[step <= 0.0]] = False
            w /= w.sum()
            continue
        w[idx] = z
        w /= w.sum()
        g = 2.0 * (G @ w - h)
        j = int(np.argmin(g))
        if g @ w - g[j] <= tol or mask[j]:
            break
        mask[j] = True
    return w


STAGE_ITER = 500


def _solve_qp(G, h, bb, start, tol: float, max_iter: int, polish: bool = True,
              stage: int = STAGE_ITER):
    """FISTA in stages, each followed by an exact active-set finish.

    Returns ``(w, iterations, gap, rel_change)``.
    """
    J = start.shape[0]
    L = 2.0 * float(np.trace(G))
    if L <= 0.0:
        # objective does not depend on w: first vertex, per the tie-break rule
        w = np.zeros(J)
        w[0] = 1.0
        return w, 0, 0.0, 0.0
    fista = _kernels.active().fista
    w, total = start, 0
    while True:
        n = min(stage, max_iter - total)
        w, it, gap, rel = fista(G, h, bb, L, w, tol, n)
        w = np.asarray(w)
        total += it
        f = _quad_value(G, h, bb, w)
        if polish:
            cand = _active_set(G, h, w, tol, 4 * J + 10)
            fc = _quad_value(G, h, bb, cand)
            if fc <= f + 1e-15 * max(1.0, abs(f)):
                w, f, gap = cand, fc, _fw_gap(G, h, cand)
        if gap <= tol or f <= tol or it < n or total >= max_iter:
            return w, total, gap, rel


def solve_inner(X1, X0, v, tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER,
                w0=None, polish: bool = True) -> np.ndarray:
    """Donor weights minimizing the v-weighted predictor discrepancy.

    Accelerated projected gradient (FISTA with restarts) on the simplex, step
    ``1/L`` with ``L`` twice the squared Frobenius norm of the weighted,
    centred donor matrix, stopped on a Frank-Wolfe gap <= ``tol``. With
    ``polish`` each stage of gradient steps is followed by an exact
    active-set finish, which matters when ``v`` makes the problem badly
    conditioned. Starts from equal weights unless ``w0`` is given. Fully
    deterministic.
    """
    X1, X0, v = _as_inputs(X1, X0, v)
    J = X0.shape[1]
    if J < 1:
        raise ValueError("need at least one donor")
    _, _, G, h, bb = _quadratic(X1, X0, v)
    start = np.full(J, 1.0 / J) if w0 is None else _kernels.NUMPY.project_simplex(
        np.asarray(w0, dtype=np.float64))
    w, it, gap, rel = _solve_qp(G, h, bb, start, tol, max_iter, polish)
    if it >= max_iter and gap > tol and rel > tol:
        raise NoConvergence(it, rel)
    w = np.where(w < 0.0, 0.0, w)
    return w / w.sum()


def simplex_grid(J: int, resolution: float) -> np.ndarray:
    """Grid points in the order the brute-force oracle visits them."""
    n = _grid_steps(resolution)
    return _kernels._grid_np(J, n) / n


def _grid_steps(resolution: float) -> int:
    n = int(round(1.0 / resolution))
    if n < 1 or abs(n * resolution - 1.0) > 1e-9:
        raise ValueError(f"resolution {resolution} does not divide 1 evenly")
    return n


def brute_force_inner(X1, X0, v, resolution: float = 0.02) -> np.ndarray:
    """Exhaustive oracle over the simplex grid with the given spacing.

    Ties go to the first point visited, i.e. the lexicographically largest
    weight vector (mass on earlier donors wins).
    """
    X1, X0, v = _as_inputs(X1, X0, v)
    J = X0.shape[1]
    if J > MAX_ORACLE_DONORS:
        raise TooManyDonors(J, MAX_ORACLE_DONORS)
    n = _grid_steps(resolution)
    sv = np.sqrt(v)
    A = np.ascontiguousarray(sv[:, None] * X0)
    b = sv * X1
    counts, _ = _kernels.active().grid_argmin(A, b, J, n)
    return np.asarray(counts, dtype=np.float64) / n


def softmax(theta) -> np.ndarray:
    z = np.asarray(theta, dtype=np.float64)
    e = np.exp(z - z.max())
    return e / e.sum()


def outcome_mspe(block: PredictorBlock, w) -> float:
    r = block.Z1 - block.Z0 @ w
    return float(np.mean(r * r))


def v_starts(K: int, seed: int) -> list[np.ndarray]:
    """Starting points for the v search, in evaluation order.

    Equal weights, then each near-vertex (``VERTEX_MASS`` on one predictor),
    then ``N_RANDOM_STARTS`` flat-Dirichlet draws from ``seed``.
    """
    starts = [np.full(K, 1.0 / K)]
    rest = (1.0 - VERTEX_MASS) / (K - 1)
    for k in range(K):
        v = np.full(K, rest)
        v[k] = VERTEX_MASS
        starts.append(v)
    gen = SplitMix64(seed).spawn(0x5EED)
    for _ in range(N_RANDOM_STARTS):
        starts.append(gen.dirichlet_flat(K))
    return starts


def optimize_v(block: PredictorBlock, seed: int = 0, max_evals: int | None = None,
               tol: float = SEARCH_TOL) -> np.ndarray:
    """Predictor weights minimizing pre-period outcome MSPE.

    Nelder-Mead on softmax logits from every start in :func:`v_starts`; the
    lowest MSPE wins, earlier starts winning ties. The search objective is the
    MSPE relative to the treated outcome sum of squares, so rescaling outcomes
    does not change the search path.
    """
    K = block.K
    if K == 1:
        return np.ones(1)
    X1, X0, _ = _as_inputs(block.X1, block.X0, np.full(K, 1.0 / K))
    Z1 = np.ascontiguousarray(block.Z1, dtype=np.float64)
    Z0 = np.ascontiguousarray(block.Z0, dtype=np.float64)
    norm = float(Z1 @ Z1) or 1.0
    if max_evals is None:
        max_evals = 100 * K
    J = X0.shape[1]
    c = X0.mean(axis=1)
    D0 = X0 - c[:, None]
    d1 = X1 - c
    start = np.full(J, 1.0 / J)
    cache: dict[bytes, float] = {}

    def loss(theta):
        key = np.asarray(theta).tobytes()
        if key not in cache:
            v = softmax(theta)
            A = np.sqrt(v)[:, None] * D0
            G = np.ascontiguousarray(A.T @ A)
            h = (v * d1) @ D0
            w = _solve_qp(G, h, float(v @ (d1 * d1)), start, tol, SEARCH_MAX_ITER,
                          stage=SEARCH_STAGE)[0]
            r = Z1 - Z0 @ w
            cache[key] = float(r @ r) / norm
        return cache[key]

    best_theta, best_f = None, math.inf
    for v0 in v_starts(K, seed):
        theta0 = np.log(v0)
        simplex = np.vstack([theta0, theta0 + np.eye(K)])
        res = minimize(loss, theta0, method="Nelder-Mead",
                       options={"initial_simplex": simplex, "maxfev": max_evals,
                                "xatol": 1e-6, "fatol": 1e-14})
        f = loss(res.x)
        if f < best_f:
            best_theta, best_f = np.asarray(res.x), f
        if best_f == 0.0:
            break
    return softmax(best_theta)


def sparsify(w, threshold: float = REPORT_THRESHOLD) -> np.ndarray:
    """Zero weights below ``threshold`` and renormalize."""
    w = np.where(np.asarray(w) < threshold, 0.0, w)
    return w / w.sum()


@dataclass(frozen=True, eq=False)
class SynthFit:
    spec: StudySpec
    block: PredictorBlock
    v: np.ndarray
    w: np.ndarray
    w_raw: np.ndarray
    pre_mspe: float
    pre_rmspe: float
    inner_objective: float

    @property
    def donors(self) -> tuple[str, ...]:
        return self.spec.donors

    def weights(self) -> dict[str, float]:
        return {d: float(x) for d, x in zip(self.donors, self.w)}

    def weight_table(self) -> list[tuple[str, float]]:
        """All donors, descending by weight then donor id."""
        return sorted(self.weights().items(), key=lambda kv: (-kv[1], kv[0]))

    def positive_weights(self) -> list[tuple[str, float]]:
        return [(d, x) for d, x in self.weight_table() if x > 0.0]

    def v_weights(self) -> dict[str, float]:
        return {lab: float(x) for lab, x in zip(self.block.labels, self.v)}


def fit(spec: StudySpec, panel: Panel, v_strategy: str | None = None) -> SynthFit:
    spec = resolve_spec(spec, panel)
    strategy = v_strategy or spec.v_strategy
    block = build_matrices(spec, panel)
    if strategy == "equal":
        v = np.full(block.K, 1.0 / block.K)
    elif strategy == "nested":
        v = optimize_v(block, spec.seed)
    else:
        raise SpecError(f"unknown v_strategy {strategy!r}")
    w_raw = solve_inner(block.X1, block.X0, v)
    w = sparsify(w_raw)
    mspe = outcome_mspe(block, w)
    return SynthFit(
        spec=spec,
        block=block,
        v=v,
        w=w,
        w_raw=w_raw,
        pre_mspe=mspe,
        pre_rmspe=math.sqrt(mspe),
        inner_objective=inner_objective(block.X1, block.X0, v, w),
    )
