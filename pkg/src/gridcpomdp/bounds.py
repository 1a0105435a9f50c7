"""Unconstrained grid-based value bounds.

UB: the convexified backup of the grid recursion (shared code path with the
transition-tensor builder), evaluated off-grid through the weight LP.

LB: one alpha-vector per grid point per epoch/sweep, built by exact DP
backup, pruned by pointwise dominance and an LP witness check.  The max-dot
value over the pruned set lower-bounds the optimum everywhere.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from .dynamics import GridDynamics, finite_horizon_dynamics, infinite_horizon_dynamics
from .grids import GridSet
from .interpolation import interpolated_value
from .lp import LinearProgram, solve_lp
from .model import PomdpModel

WITNESS_TOL = 1e-9


@dataclass(frozen=True)
class AlphaVector:
    coeffs: np.ndarray
    action: int | None = None


def ub_values(
    model: PomdpModel,
    grid: GridSet,
    horizon: int | None = None,
    epsilon: float | None = None,
) -> GridDynamics:
    """Upper-bound value tables with greedy actions; exactly the recursion
    that builds the transition tensors (one code path, by construction)."""
    if (horizon is None) == (epsilon is None):
        raise ValueError("pass exactly one of horizon (finite) or epsilon (infinite)")
    if horizon is not None:
        return finite_horizon_dynamics(model, grid, horizon)
    return infinite_horizon_dynamics(model, grid, epsilon)


def ub_value_at(dyn: GridDynamics, grid: GridSet, belief, t: int = 0) -> float:
    """UB at an arbitrary belief: the weight-LP objective against vhat."""
    table = dyn.vhat[t] if dyn.kind == "finite" else dyn.vhat
    return interpolated_value(grid, table, belief)


def _pointwise_prune(vectors: np.ndarray) -> np.ndarray:
    """Eagle's reduction: drop duplicates and pointwise-dominated rows.

    Returns indices of survivors in original order (first of exact ties).
    """
    n = vectors.shape[0]
    # dedupe first so domination below can be strict-or-earlier
    _, first = np.unique(np.round(vectors, 12), axis=0, return_index=True)
    idx = np.sort(first)
    vecs = vectors[idx]
    m = len(idx)
    ge = np.all(vecs[:, None, :] >= vecs[None, :, :] - 1e-12, axis=2)
    np.fill_diagonal(ge, False)
    dominated = ge.any(axis=0)
    return idx[~dominated]


def _upper_envelope_2d(vectors: np.ndarray) -> np.ndarray:
    """Exact prune for 2-state problems: keep the upper envelope of the
    value lines over b0 in [0, 1].  Returns survivor indices."""
    slope = vectors[:, 0] - vectors[:, 1]
    intercept = vectors[:, 1]
    order = np.lexsort((intercept, slope))
    lines = []      # (slope, intercept, index), strictly increasing slope
    for i in order:
        s, c = slope[i], intercept[i]
        if lines and abs(lines[-1][0] - s) <= 1e-12:
            if c <= lines[-1][1] + 1e-12:
                continue
            lines.pop()
        while lines:
            if len(lines) == 1:
                s0, c0, _ = lines[0]
                # drop a single line never above the new one on [0, 1]
                if c0 <= c + 1e-12 and c0 + s0 <= c + s + 1e-12:
                    lines.pop()
                break
            s1, c1, _ = lines[-2]
            s2, c2, _ = lines[-1]
            # intersection of the last kept line with the new one
            x_new = (c2 - c) / (s - s2)
            x_prev = (c1 - c2) / (s2 - s1)
            if x_new <= x_prev + 1e-12:
                lines.pop()
            else:
                break
        lines.append((s, c, i))
    # discard lines whose active range falls outside [0, 1]
    keep = []
    for pos, (s, c, i) in enumerate(lines):
        lo = 0.0 if pos == 0 else (lines[pos - 1][1] - c) / (s - lines[pos - 1][0])
        hi = 1.0 if pos == len(lines) - 1 else (c - lines[pos + 1][1]) / (
            lines[pos + 1][0] - s
        )
        if lo <= 1.0 + 1e-12 and hi >= -1e-12 and lo <= hi + 1e-12:
            keep.append(i)
    return np.array(sorted(keep), dtype=int)


def _witness_prune(vectors: np.ndarray) -> np.ndarray:
    """LP dominance check: keep a vector iff some belief strictly prefers it."""
    n, n_states = vectors.shape
    if n <= 1:
        return np.arange(n)
    keep = []
    for i in range(n):
        others = [j for j in range(n) if j != i]
        lp = LinearProgram(name="witness", sense="max")
        for s in range(n_states):
            lp.add_variable(f"b{s}", lb=0.0, ub=1.0)
        lp.add_variable("d", lb=-np.inf, ub=np.inf)
        lp.set_objective({"d": 1.0}, sense="max")
        lp.add_constraint({f"b{s}": 1.0 for s in range(n_states)}, "=", 1.0, name="simplex")
        for j in others:
            diff = vectors[i] - vectors[j]
            terms = {f"b{s}": float(diff[s]) for s in range(n_states)}
            terms["d"] = -1.0
            lp.add_constraint(terms, ">=", 0.0, name=f"dom_{j}")
        sol = solve_lp(lp, backend="embedded")
        if sol.status == "optimal" and sol.objective > WITNESS_TOL:
            keep.append(i)
    return np.array(keep, dtype=int) if keep else np.array([0], dtype=int)


def prune_alpha_set(alphas: list[AlphaVector]) -> list[AlphaVector]:
    """Value-preserving reduction: Eagle's pointwise step, then the LP
    witness check (the exact 1-d envelope stands in for both when S = 2)."""
    vectors = np.array([a.coeffs for a in alphas])
    if vectors.shape[1] == 2:
        idx = _pointwise_prune(vectors)
        idx = idx[_upper_envelope_2d(vectors[idx])]
        return [alphas[i] for i in idx]
    idx = _pointwise_prune(vectors)
    if idx.size > 1:
        idx = idx[_witness_prune(vectors[idx])]
    return [alphas[i] for i in idx]


def _alpha_backup(
    model: PomdpModel,
    grid: GridSet,
    gamma_next: list[AlphaVector],
    discount: float,
) -> list[AlphaVector]:
    """One grid-seeded exact DP backup.

    For each grid point and action, pick per observation the best next-epoch
    alpha at the updated belief (lowest index on ties; index 0 when the
    observation has zero probability), combine linearly, then keep the
    maximizing action's vector for that grid point.
    """
    n_s, n_a, n_o = model.n_states, model.n_actions, model.n_observations
    next_mat = np.array([a.coeffs for a in gamma_next])       # (n_next, S)
    # M[a, o][i, j] = p_ij^a z_jo^a
    m_ao = model.trans[:, None, :, :] * model.obs.transpose(0, 2, 1)[:, :, None, :]
    pred = np.einsum("ks,asj->akj", grid.points, model.trans)  # (A, K, S)
    out: list[AlphaVector] = []
    seen = set()
    for k in range(len(grid)):
        g = grid.points[k]
        best_val, best_alpha, best_action = -np.inf, None, None
        for a in range(n_a):
            alpha = model.reward[a].astype(float).copy()
            for o in range(n_o):
                unnorm = pred[a, k] * model.obs[a, :, o]
                p_o = unnorm.sum()
                if p_o > 0.0:
                    scores = next_mat @ (unnorm / p_o)
                    j = int(np.argmax(scores))             # lowest index on ties
                else:
                    j = 0
                alpha += discount * (m_ao[a, o] @ next_mat[j])
            val = float(g @ alpha)
            if val > best_val + 1e-12:
                best_val, best_alpha, best_action = val, alpha, a
        key = tuple(np.round(best_alpha, 12))
        if key not in seen:
            seen.add(key)
            out.append(AlphaVector(coeffs=best_alpha, action=best_action))
    return out


def lb_alpha_vectors(
    model: PomdpModel,
    grid: GridSet,
    horizon: int | None = None,
    epsilon: float | None = None,
    max_sweeps: int = 10_000,
    terminal_alphas=None,
):
    """Grid-seeded alpha-vector sets.

    Finite: a list of pruned sets per epoch (index horizon-1 is the terminal
    set, by default the single per-state terminal-reward vector;
    ``terminal_alphas`` overrides it, e.g. with the reward rows for the
    greedy-exit convention).  Infinite: a single pruned set, iterated until
    the values at the grid points move less than ``epsilon`` in sup norm.
    """
    if (horizon is None) == (epsilon is None):
        raise ValueError("pass exactly one of horizon (finite) or epsilon (infinite)")
    if horizon is not None:
        sets = [None] * horizon
        if terminal_alphas is None:
            terminal_alphas = [model.terminal_reward]
        sets[horizon - 1] = [
            AlphaVector(np.asarray(v, dtype=float), None) for v in terminal_alphas
        ]
        for t in range(horizon - 2, -1, -1):
            backed = _alpha_backup(model, grid, sets[t + 1], 1.0)
            sets[t] = prune_alpha_set(backed)
        return sets
    if not 0.0 <= model.discount < 1.0:
        raise ValueError("infinite horizon needs discount < 1")
    gamma = [AlphaVector(np.zeros(model.n_states), None)]
    vals = np.zeros(len(grid))
    for _ in range(max_sweeps):
        gamma = prune_alpha_set(_alpha_backup(model, grid, gamma, model.discount))
        new_vals = lb_values_at(gamma, grid.points)
        residual = float(np.max(np.abs(new_vals - vals)))
        vals = new_vals
        if residual <= epsilon:
            return gamma
    raise RuntimeError(f"alpha-vector iteration did not converge in {max_sweeps} sweeps")


def lb_values_at(gamma: list[AlphaVector], beliefs) -> np.ndarray:
    """Max-dot evaluation of an alpha set at one or many beliefs."""
    mat = np.array([a.coeffs for a in gamma])
    b = np.atleast_2d(np.asarray(beliefs, dtype=float))
    return (b @ mat.T).max(axis=1)


@dataclass
class BoundReport:
    lb: np.ndarray
    ub: np.ndarray
    gap_percent: np.ndarray         # only where lb > 0
    included: np.ndarray            # bool mask of beliefs with lb > 0
    seed: int | None = None
    aggregates: dict = field(default_factory=dict)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf)
        w.writerow(["belief_index", "lb", "ub", "gap_percent", "included"])
        gi = 0
        for i, (lo, hi, inc) in enumerate(zip(self.lb, self.ub, self.included)):
            gap = self.gap_percent[gi] if inc else ""
            if inc:
                gi += 1
            w.writerow([i, repr(float(lo)), repr(float(hi)), gap, int(inc)])
        w.writerow([])
        w.writerow(["aggregate", "value"])
        for key, val in self.aggregates.items():
            w.writerow([key, val])
        return buf.getvalue()


def sample_beliefs(n: int, n_states: int, seed: int) -> np.ndarray:
    """Seeded uniform (Dirichlet(1,..,1)) samples over the belief simplex."""
    rng = np.random.default_rng(seed)
    return rng.dirichlet(np.ones(n_states), size=n)


def evaluate_gap(
    lb_set: list[AlphaVector],
    ub_dyn: GridDynamics,
    grid: GridSet,
    eval_beliefs,
    seed: int | None = None,
) -> BoundReport:
    """Per-belief LB-UB gaps (percent) with the four table aggregates.

    Beliefs with non-positive LB are excluded from the ratio (division by
    LB) but still reported with their raw bounds.
    """
    beliefs = np.atleast_2d(np.asarray(eval_beliefs, dtype=float))
    lb = lb_values_at(lb_set, beliefs)
    ub = np.array([ub_value_at(ub_dyn, grid, b) for b in beliefs])
    included = lb > 0.0
    gaps = 100.0 * (ub[included] - lb[included]) / lb[included]
    agg = {}
    if gaps.size:
        agg = {
            "min": float(gaps.min()),
            "mean": float(gaps.mean()),
            "median": float(np.median(gaps)),
            "max": float(gaps.max()),
        }
    agg["excluded"] = int((~included).sum())
    return BoundReport(
        lb=lb, ub=ub, gap_percent=gaps, included=included, seed=seed, aggregates=agg
    )
