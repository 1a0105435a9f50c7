"""Convex-combination weights over a belief grid via the value-minimizing LP.

For a target belief b and grid values v, solves

    min  v . beta   s.t.  sum_k beta_k g^k = b,  beta >= 0

(the row ``sum beta = 1`` is implied because every grid point and the target
sum to one).  Because the grid contains all simplex corners, the corner
decomposition ``beta[corner_i] = b_i`` is a basic feasible starting point, so
a primal simplex with Bland's rule runs without a phase 1 and returns a
deterministic optimal vertex.

Two exact reductions make this fast at scale:

* columns whose support is not contained in the target's support must have
  zero weight (non-negativity), so they are dropped up front;
* zero coordinates of the target drop their reconstruction rows.
"""

from __future__ import annotations

import hashlib

import numpy as np

from .grids import GridSet

RECON_TOL = 1e-9


class GridContractError(RuntimeError):
    """The grid violated its contract (e.g. missing corners) and the
    interpolation LP became infeasible."""


def _corner_indices(grid: GridSet) -> np.ndarray:
    cached = getattr(grid, "_corner_idx", None)
    if cached is None:
        cached = grid.corner_indices()
        object.__setattr__(grid, "_corner_idx", cached)
    return cached


def _bland_simplex(A: np.ndarray, c: np.ndarray, b: np.ndarray, basis0: np.ndarray,
                   max_iter: int | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Primal simplex from a feasible identity basis.

    Dantzig pricing (ties to the lowest index) for speed; a permanent switch
    to Bland's entering rule after a degenerate stall guarantees
    termination.  Both rules are deterministic, so the returned vertex is
    reproducible.  ``A[:, basis0]`` must be the identity and ``b >= 0``.
    """
    m, n = A.shape
    basis = basis0.copy()
    binv = np.eye(m)
    x = b.astype(float).copy()
    tol = 1e-9 * max(1.0, float(np.abs(c).max(initial=0.0)))
    if max_iter is None:
        max_iter = 50 * (m + n) + 200
    bland = False
    stall = 0
    stall_limit = 4 * m + 20
    last_obj = float(c[basis] @ x)
    for it in range(max_iter):
        y = c[basis] @ binv
        reduced = c - y @ A
        reduced[basis] = 0.0
        cand = np.flatnonzero(reduced < -tol)
        if cand.size == 0:
            return basis, x
        j = cand[0] if bland else cand[np.argmin(reduced[cand])]
        d = binv @ A[:, j]
        pos = np.flatnonzero(d > 1e-11)
        if pos.size == 0:
            raise GridContractError("interpolation LP unbounded; grid malformed")
        ratios = x[pos] / d[pos]
        theta = ratios.min()
        tied = pos[np.flatnonzero(ratios <= theta + 1e-12)]
        r = tied[np.argmin(basis[tied])]      # Bland: lowest basis index leaves
        x = x - theta * d
        x[r] = theta
        np.clip(x, 0.0, None, out=x)
        piv = d[r]
        binv[r] /= piv
        others = np.arange(m) != r
        binv[others] -= np.outer(d[others], binv[r])
        basis[r] = j
        obj = float(c[basis] @ x)
        if obj >= last_obj - 1e-12:           # degenerate pivot
            stall += 1
            if stall >= stall_limit:
                bland = True
        else:
            stall = 0
        last_obj = obj
        if (it + 1) % 128 == 0:               # keep the inverse honest
            binv = np.linalg.inv(A[:, basis])
            x = np.clip(binv @ b, 0.0, None)
    raise GridContractError("interpolation simplex failed to terminate")


def interpolation_weights(grid: GridSet, values, target) -> np.ndarray:
    """Optimal convex-combination weights of ``target`` over the grid.

    Minimizes ``sum_k values[k] * beta[k]`` subject to exact reconstruction.
    The result is a basic solution: at most ``n_states`` weights are nonzero.
    """
    values = np.asarray(values, dtype=float)
    target = np.asarray(target, dtype=float)
    pts = grid.points
    n_points, n_states = pts.shape
    if values.shape != (n_points,):
        raise ValueError(f"values shape {values.shape} != ({n_points},)")
    if target.shape != (n_states,):
        raise ValueError(f"target length {target.shape} != {n_states}")

    supp = np.flatnonzero(target > 0.0)
    corner_idx = _corner_indices(grid)
    if supp.size == 1:
        beta = np.zeros(n_points)
        beta[corner_idx[supp[0]]] = 1.0
        return beta

    off = np.setdiff1d(np.arange(n_states), supp, assume_unique=True)
    if off.size:
        cand = np.flatnonzero(pts[:, off].max(axis=1) <= 0.0)
    else:
        cand = np.arange(n_points)
    A = pts[np.ix_(cand, supp)].T.copy()       # (|supp|, |cand|)
    b = target[supp]
    c = values[cand]

    # positions of the support corners inside the candidate list
    corner_pos = np.searchsorted(cand, corner_idx[supp])
    basis, x = _bland_simplex(A, c, b, corner_pos)

    beta = np.zeros(n_points)
    beta[cand[basis]] = x
    recon = beta @ pts
    if np.max(np.abs(recon - target)) > RECON_TOL:
        raise GridContractError(
            "interpolation weights failed to reconstruct the target belief"
        )
    return beta


def interpolated_value(grid: GridSet, values, target) -> float:
    """Objective of the weight LP: the grid-value estimate at ``target``."""
    beta = interpolation_weights(grid, values, target)
    return float(beta @ np.asarray(values, dtype=float))


def _values_fingerprint(values: np.ndarray) -> str:
    return hashlib.sha256(np.round(values, 12).tobytes()).hexdigest()[:16]


class WeightCache:
    """Memo for repeated weight queries against one (grid, value table) pair.

    Keys are beliefs rounded to 1e-12.  Safe under the CPython memory model:
    entries are immutable and inserted atomically (last writer wins), which
    is the single-writer-per-key contract callers rely on.
    """

    def __init__(self, grid: GridSet, values):
        self.grid = grid
        self.values = np.asarray(values, dtype=float)
        self.grid_fingerprint = grid.fingerprint
        self.values_fingerprint = _values_fingerprint(self.values)
        self._store: dict[bytes, np.ndarray] = {}
        self.hits = 0
        self.misses = 0

    def weights(self, target) -> np.ndarray:
        key = np.round(np.asarray(target, dtype=float), 12).tobytes()
        beta = self._store.get(key)
        if beta is None:
            self.misses += 1
            beta = interpolation_weights(self.grid, self.values, target)
            beta.flags.writeable = False
            self._store[key] = beta
        else:
            self.hits += 1
        return beta

    def __len__(self) -> int:
        return len(self._store)
