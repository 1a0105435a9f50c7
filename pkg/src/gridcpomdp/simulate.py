"""Seeded Monte Carlo evaluation of grid policies on the true POMDP.

Episode i draws all randomness from a generator built on (seed, i), so any
subset of episodes can be reproduced (or run in parallel) without changing
results.  Cost accumulation mirrors the active LP's budget row: undiscounted
for finite-horizon policies, discounted for infinite-horizon ones; rewards
are discounted by the model's factor in the infinite case (the finite LP is
undiscounted, so finite rewards are too, plus the terminal reward).
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np

from .grids import GridSet
from .interpolation import WeightCache
from .model import ConstraintSpec, PomdpModel, belief_update
from .solver import OccupancyPolicy


def percent_over(c_hat: float, budget: float) -> float:
    """Percent by which a simulated cost exceeds the budget, clamped at 0."""
    if budget <= 0:
        raise ValueError("budget must be positive")
    return 100.0 * (c_hat - budget) / budget if c_hat > budget else 0.0


@dataclass
class SimulationReport:
    episodes: int
    v_hat: float
    v_se: float
    c_hat: float
    c_se: float
    percent_over: float
    seed: int
    sim_horizon: int
    kind: str
    budget: float

    def to_csv_row(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf)
        w.writerow(["episodes", "v_hat", "v_se", "c_hat", "c_se",
                    "percent_over", "seed", "sim_horizon", "kind", "budget"])
        w.writerow([self.episodes, repr(self.v_hat), repr(self.v_se),
                    repr(self.c_hat), repr(self.c_se), repr(self.percent_over),
                    self.seed, self.sim_horizon, self.kind, repr(self.budget)])
        return buf.getvalue()


def _draw(rng, cumulative) -> int:
    idx = int(np.searchsorted(cumulative, rng.random(), side="right"))
    return min(idx, len(cumulative) - 1)


def simulate_policy(
    model: PomdpModel,
    spec: ConstraintSpec,
    policy: OccupancyPolicy,
    grid: GridSet,
    episodes: int,
    sim_horizon: int = 100,
    seed: int = 0,
    off_grid: str = "mix",
) -> SimulationReport:
    """Run seeded episodes of the policy against the true model.

    Initial grid points are drawn from the spec's delta weights and the
    hidden state from that grid belief.  At each step the action comes from
    the ``off_grid`` rule: ``mix`` forms the weight-LP combination of the
    grid action distributions against the policy's value table (the default,
    consistent with the grid-MDP semantics); ``nearest`` uses the closest
    grid point in L1 distance.
    """
    if policy.grid_fingerprint != grid.fingerprint:
        raise ValueError("policy grid fingerprint does not match the supplied grid")
    if off_grid not in ("mix", "nearest"):
        raise ValueError(f"unknown off_grid rule {off_grid!r}")
    finite = policy.kind == "finite"
    n_steps = policy.horizon - 1 if finite else sim_horizon
    lam = 1.0 if finite else model.discount
    delta = spec.delta.resolve(len(grid))
    cum_delta = np.cumsum(delta)
    cum_trans = np.cumsum(model.trans, axis=2)
    cum_obs = np.cumsum(model.obs, axis=2)
    points = grid.points

    if finite:
        caches = [WeightCache(grid, policy.vhat[t]) for t in range(n_steps)]
    else:
        caches = [WeightCache(grid, policy.vhat)] * max(n_steps, 1)

    def mixed_dist(t, belief):
        if off_grid == "nearest":
            k = int(np.argmin(np.abs(points - belief).sum(axis=1)))
            return policy.dist_at(t if finite else None, k)
        beta = caches[t].weights(belief)
        dist = beta @ (policy.action_dist[t] if finite else policy.action_dist)
        dist = np.clip(dist, 0.0, None)
        return dist / dist.sum()

    values = np.empty(episodes)
    costs = np.empty(episodes)
    for i in range(episodes):
        rng = np.random.default_rng([seed, i])
        k0 = _draw(rng, cum_delta)
        belief = points[k0]
        state = _draw(rng, np.cumsum(belief))
        total_r = 0.0
        total_c = 0.0
        disc = 1.0
        for t in range(n_steps):
            dist = mixed_dist(t, belief)
            a = _draw(rng, np.cumsum(dist))
            total_r += disc * model.reward[a, state]
            total_c += (disc if not finite else 1.0) * spec.cost[a, state]
            state = _draw(rng, cum_trans[a, state])
            o = _draw(rng, cum_obs[a, state])
            belief = belief_update(model, belief, a, o)
            disc *= lam
        if finite:
            total_r += model.terminal_reward[state]
        values[i] = total_r
        costs[i] = total_c

    v_hat = float(values.mean())
    c_hat = float(costs.mean())
    v_se = float(values.std(ddof=1) / math.sqrt(episodes)) if episodes > 1 else 0.0
    c_se = float(costs.std(ddof=1) / math.sqrt(episodes)) if episodes > 1 else 0.0
    return SimulationReport(
        episodes=episodes, v_hat=v_hat, v_se=v_se, c_hat=c_hat, c_se=c_se,
        percent_over=percent_over(c_hat, spec.budget), seed=seed,
        sim_horizon=n_steps, kind=policy.kind, budget=spec.budget,
    )
