"""Grid-to-grid transition tensors f and approximate value tables.

Finite horizon: a backward pass from the terminal epoch.  With ``horizon``
counting time points, decisions happen at epochs ``0 .. horizon-2`` and
``vhat[horizon-1]`` holds terminal values, so ``f`` has ``horizon-1`` epoch
slices.  The finite recursion is undiscounted, mirroring the finite LP.

Infinite horizon: value-iteration sweeps with discounting until the value
table moves less than ``epsilon`` in sup norm; the returned ``f`` is the one
used by the final sweep.

Interpolation weights are recomputed against the *next* value table every
epoch/sweep; identical belief queries within an epoch are memoized.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field

import numpy as np

from .grids import GridSet
from .interpolation import WeightCache
from .model import PomdpModel

ROW_ATOL = 1e-9


class ConvergenceError(RuntimeError):
    """Infinite-horizon sweep cap reached before the residual target."""


@dataclass
class GridDynamics:
    kind: str                    # "finite" | "infinite"
    f: np.ndarray                # finite (T-1, A, K, K); infinite (A, K, K)
    vhat: np.ndarray             # finite (T, K); infinite (K,)
    greedy: np.ndarray           # finite (T-1, K); infinite (K,)  argmax actions
    grid_fingerprint: str
    horizon: int | None = None   # time points, finite only
    discount: float = 1.0
    meta: dict = field(default_factory=dict)

    @property
    def n_grid(self) -> int:
        return self.vhat.shape[-1]

    @property
    def terminal_values(self) -> np.ndarray:
        return self.vhat[-1] if self.kind == "finite" else self.vhat

    def f_at(self, t: int | None) -> np.ndarray:
        """Epoch slice of f: (A, K, K).  ``t`` is ignored for infinite."""
        return self.f[t] if self.kind == "finite" else self.f


def _observation_tables(model: PomdpModel, grid: GridSet):
    """Per-action predicted beliefs and observation probabilities.

    pred[a, k] = g^k P_a  (belief pushed through the transition kernel);
    pobs[a, k, o] = P(o | g^k, a).
    """
    pred = np.einsum("ks,asj->akj", grid.points, model.trans)
    pobs = np.einsum("akj,ajo->ako", pred, model.obs)
    return pred, pobs


def _epoch_rows(model, grid, values_next, pred, pobs):
    """One epoch of Algorithm steps 1-3: f rows for every (a, k).

    Observations with zero probability contribute nothing (their posterior
    is undefined and their mass is zero), so rows still sum to one.
    """
    n_a, n_k = model.n_actions, len(grid)
    cache = WeightCache(grid, values_next)
    f = np.zeros((n_a, n_k, n_k))
    for a in range(n_a):
        z = model.obs[a]
        for k in range(n_k):
            row = f[a, k]
            for o in range(model.n_observations):
                p_o = pobs[a, k, o]
                if p_o <= 0.0:
                    continue
                posterior = pred[a, k] * z[:, o]
                row += p_o * cache.weights(posterior / posterior.sum())
            row /= row.sum()
    return f, cache


def _backup(reward_grid, f, values_next, discount):
    """Eq.-style value update: q[k, a] = r(k, a) + discount * f_a . v_next."""
    cont = np.einsum("akl,l->ka", f, values_next)
    q = reward_grid + discount * cont
    return q.max(axis=1), q.argmax(axis=1)


def greedy_terminal_values(model: PomdpModel, grid: GridSet) -> np.ndarray:
    """Terminal table equal to the best one-step reward at each grid point.

    The benchmark convention for finite runs: exiting the process at a grid
    is worth the unconstrained optimal action's immediate reward there.
    """
    return (grid.points @ model.reward.T).max(axis=1)


def finite_horizon_dynamics(
    model: PomdpModel,
    grid: GridSet,
    horizon: int,
    terminal_values=None,
) -> GridDynamics:
    """Backward pass building f[t] and vhat[t] for t = horizon-2 .. 0.

    ``terminal_values`` overrides the per-grid terminal table; by default it
    is ``g^k . terminal_reward`` (the linear terminal rule).
    """
    if horizon < 1:
        raise ValueError("horizon must be >= 1 time point")
    n_k, n_a = len(grid), model.n_actions
    vhat = np.zeros((horizon, n_k))
    if terminal_values is None:
        vhat[-1] = grid.points @ model.terminal_reward
    else:
        terminal_values = np.asarray(terminal_values, dtype=float)
        if terminal_values.shape != (n_k,):
            raise ValueError("terminal_values must have one entry per grid point")
        vhat[-1] = terminal_values
    f = np.zeros((max(horizon - 1, 0), n_a, n_k, n_k))
    greedy = np.zeros((max(horizon - 1, 0), n_k), dtype=int)
    reward_grid = grid.points @ model.reward.T
    pred, pobs = _observation_tables(model, grid)
    for t in range(horizon - 2, -1, -1):
        f[t], _ = _epoch_rows(model, grid, vhat[t + 1], pred, pobs)
        vhat[t], greedy[t] = _backup(reward_grid, f[t], vhat[t + 1], 1.0)
    return GridDynamics(
        kind="finite", f=f, vhat=vhat, greedy=greedy,
        grid_fingerprint=grid.fingerprint, horizon=horizon,
        discount=1.0, meta={"epochs": max(horizon - 1, 0)},
    )


def infinite_horizon_dynamics(
    model: PomdpModel,
    grid: GridSet,
    epsilon: float,
    max_sweeps: int = 10_000,
) -> GridDynamics:
    """Fixed-point iteration for stationary f and vhat (discount < 1)."""
    if not 0.0 <= model.discount < 1.0:
        raise ValueError("infinite horizon needs discount in [0, 1)")
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    n_k = len(grid)
    vhat = np.zeros(n_k)
    reward_grid = grid.points @ model.reward.T
    pred, pobs = _observation_tables(model, grid)
    residuals = []
    f = None
    greedy = np.zeros(n_k, dtype=int)
    for sweep in range(1, max_sweeps + 1):
        f, _ = _epoch_rows(model, grid, vhat, pred, pobs)
        vnew, greedy = _backup(reward_grid, f, vhat, model.discount)
        residual = float(np.max(np.abs(vnew - vhat)))
        residuals.append(residual)
        vhat = vnew
        if residual <= epsilon:
            return GridDynamics(
                kind="infinite", f=f, vhat=vhat, greedy=greedy,
                grid_fingerprint=grid.fingerprint, horizon=None,
                discount=model.discount,
                meta={
                    "iterations": sweep,
                    "residual": residual,
                    "residual_history": residuals,
                    "epsilon": epsilon,
                },
            )
    raise ConvergenceError(
        f"no convergence after {max_sweeps} sweeps; "
        f"last residual {residuals[-1]:.3e} > epsilon {epsilon:.3e}"
    )


def transition_row(beta_table, model: PomdpModel, grid: GridSet, k: int, a: int):
    """Evaluate one f row from precomputed weights.

    ``beta_table`` maps ``(k, a, o)`` to a weight vector; observations with
    zero probability may be absent.  The returned row is a distribution.
    """
    row = np.zeros(len(grid))
    g = grid.points[k]
    pred = g @ model.trans[a]
    for o in range(model.n_observations):
        p_o = float(pred @ model.obs[a, :, o])
        if p_o <= 0.0:
            continue
        row += p_o * np.asarray(beta_table[(k, a, o)], dtype=float)
    total = row.sum()
    if total <= 0.0:
        raise ValueError(f"no observation has positive probability at ({k}, {a})")
    return row / total


def build_beta_table(model: PomdpModel, grid: GridSet, values_next) -> dict:
    """All (k, a, o) weight vectors against one next-epoch value table."""
    pred, pobs = _observation_tables(model, grid)
    cache = WeightCache(grid, values_next)
    table = {}
    for a in range(model.n_actions):
        for k in range(len(grid)):
            for o in range(model.n_observations):
                if pobs[a, k, o] <= 0.0:
                    continue
                posterior = pred[a, k] * model.obs[a, :, o]
                table[(k, a, o)] = cache.weights(posterior / posterior.sum())
    return table


# -- CSV bundle export/import -------------------------------------------------


def dynamics_to_csv(dyn: GridDynamics) -> dict[str, str]:
    """Binary-free bundle: f triplets, the value table, and a meta header."""
    fbuf = io.StringIO()
    w = csv.writer(fbuf)
    w.writerow(["t", "a", "k", "l", "p"])
    if dyn.kind == "finite":
        for t in range(dyn.f.shape[0]):
            for a in range(dyn.f.shape[1]):
                for k, l in zip(*np.nonzero(dyn.f[t, a])):
                    w.writerow([t, a, k, l, repr(float(dyn.f[t, a, k, l]))])
    else:
        for a in range(dyn.f.shape[0]):
            for k, l in zip(*np.nonzero(dyn.f[a])):
                w.writerow(["", a, k, l, repr(float(dyn.f[a, k, l]))])
    vbuf = io.StringIO()
    w = csv.writer(vbuf)
    w.writerow(["t", "k", "v"])
    if dyn.kind == "finite":
        for t in range(dyn.vhat.shape[0]):
            for k in range(dyn.vhat.shape[1]):
                w.writerow([t, k, repr(float(dyn.vhat[t, k]))])
    else:
        for k in range(dyn.vhat.shape[0]):
            w.writerow(["", k, repr(float(dyn.vhat[k]))])
    meta = {
        "kind": dyn.kind,
        "horizon": dyn.horizon,
        "discount": dyn.discount,
        "grid_fingerprint": dyn.grid_fingerprint,
        "n_grid": int(dyn.n_grid),
        "n_actions": int(dyn.f.shape[1] if dyn.kind == "finite" else dyn.f.shape[0]),
        "greedy": dyn.greedy.tolist(),
        "meta": {k: v for k, v in dyn.meta.items() if k != "residual_history"},
    }
    return {"f": fbuf.getvalue(), "vhat": vbuf.getvalue(), "meta": json.dumps(meta, indent=1)}


def dynamics_from_csv(bundle: dict[str, str]) -> GridDynamics:
    meta = json.loads(bundle["meta"])
    kind = meta["kind"]
    n_k, n_a = meta["n_grid"], meta["n_actions"]
    horizon = meta["horizon"]
    if kind == "finite":
        f = np.zeros((max(horizon - 1, 0), n_a, n_k, n_k))
        vhat = np.zeros((horizon, n_k))
    else:
        f = np.zeros((n_a, n_k, n_k))
        vhat = np.zeros(n_k)
    for row in csv.DictReader(io.StringIO(bundle["f"])):
        a, k, l, p = int(row["a"]), int(row["k"]), int(row["l"]), float(row["p"])
        if kind == "finite":
            f[int(row["t"]), a, k, l] = p
        else:
            f[a, k, l] = p
    for row in csv.DictReader(io.StringIO(bundle["vhat"])):
        k, v = int(row["k"]), float(row["v"])
        if kind == "finite":
            vhat[int(row["t"]), k] = v
        else:
            vhat[k] = v
    return GridDynamics(
        kind=kind, f=f, vhat=vhat,
        greedy=np.asarray(meta["greedy"], dtype=int),
        grid_fingerprint=meta["grid_fingerprint"],
        horizon=horizon, discount=meta["discount"], meta=meta.get("meta", {}),
    )
