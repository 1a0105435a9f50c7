"""Occupancy-measure LP/MIP formulations over grid dynamics and policy
extraction.

Finite horizon variables: ``x_{t}_{k}_{a}`` for decision epochs
``t = 0 .. horizon-2`` plus terminal occupancies ``x_term_{k}``.  Infinite
horizon: stationary ``x_{k}_{a}``.  Deterministic-policy constraints add
binaries ``theta...`` on the same index scheme.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .dynamics import GridDynamics
from .grids import GridSet
from .lp import LinearProgram, Solution, solve_lp, solve_mip
from .model import ConstraintSpec, DeltaSpec, PomdpModel

OCC_EPS = 1e-9


def xname(t: int, k: int, a: int) -> str:
    return f"x_{t}_{k}_{a}"


def xname_term(k: int) -> str:
    return f"x_term_{k}"


def xname_inf(k: int, a: int) -> str:
    return f"x_{k}_{a}"


def theta_name(t, k: int, a: int) -> str:
    return f"theta_{k}_{a}" if t is None else f"theta_{t}_{k}_{a}"


def _grids_tables(model: PomdpModel, spec: ConstraintSpec | None, grid: GridSet):
    reward_grid = grid.points @ model.reward.T          # (K, A)
    cost_grid = None if spec is None else grid.points @ spec.cost.T
    return reward_grid, cost_grid


def build_finite_dual(
    model: PomdpModel,
    spec: ConstraintSpec,
    dyn: GridDynamics,
    grid: GridSet,
) -> LinearProgram:
    """Budget-constrained occupancy LP for the finite horizon.

    Objective: expected total reward plus the terminal value term; rows:
    first-epoch occupancies equal delta, flow conservation between epochs,
    terminal flow, and one budget row over all decision epochs (terminal
    epoch carries no cost).
    """
    if dyn.kind != "finite":
        raise ValueError("finite builder needs finite-horizon dynamics")
    horizon = dyn.horizon
    if horizon < 2:
        raise ValueError("need at least one decision epoch (horizon >= 2)")
    n_k, n_a = len(grid), model.n_actions
    delta = spec.delta.resolve(n_k)
    reward_grid, cost_grid = _grids_tables(model, spec, grid)
    lp = LinearProgram(name=f"finite-dual-T{horizon}", sense="max")
    obj = {}
    for t in range(horizon - 1):
        for k in range(n_k):
            for a in range(n_a):
                idx = lp.add_variable(xname(t, k, a), lb=0.0)
                obj[idx] = reward_grid[k, a]
    for k in range(n_k):
        idx = lp.add_variable(xname_term(k), lb=0.0)
        obj[idx] = float(dyn.vhat[-1, k])
    lp.set_objective(obj, sense="max")

    for k in range(n_k):
        lp.add_constraint(
            {xname(0, k, a): 1.0 for a in range(n_a)}, "=", float(delta[k]),
            name=f"init_{k}",
        )
    for t in range(1, horizon - 1):
        for k in range(n_k):
            terms = {xname(t, k, a): 1.0 for a in range(n_a)}
            for a in range(n_a):
                col = dyn.f[t - 1, a, :, k]
                for l in np.flatnonzero(col):
                    terms[xname(t - 1, int(l), a)] = terms.get(
                        xname(t - 1, int(l), a), 0.0
                    ) - float(col[l])
            lp.add_constraint(terms, "=", 0.0, name=f"flow_{t}_{k}")
    for k in range(n_k):
        terms = {xname_term(k): 1.0}
        for a in range(n_a):
            col = dyn.f[horizon - 2, a, :, k]
            for l in np.flatnonzero(col):
                terms[xname(horizon - 2, int(l), a)] = terms.get(
                    xname(horizon - 2, int(l), a), 0.0
                ) - float(col[l])
        lp.add_constraint(terms, "=", 0.0, name=f"flow_term_{k}")
    budget_terms = {}
    for t in range(horizon - 1):
        for k in range(n_k):
            for a in range(n_a):
                c = cost_grid[k, a]
                if c != 0.0:
                    budget_terms[xname(t, k, a)] = float(c)
    lp.add_constraint(budget_terms, "<=", spec.budget, name="budget")
    return lp


def build_finite_primal(
    model: PomdpModel,
    dyn: GridDynamics,
    grid: GridSet,
    delta,
) -> LinearProgram:
    """Value-side LP (unconstrained): min sum_k delta_k u_{0k}.

    Dual of the occupancy LP without the budget row; used as the duality
    cross-check against the backward induction values.
    """
    if dyn.kind != "finite":
        raise ValueError("finite builder needs finite-horizon dynamics")
    horizon = dyn.horizon
    n_k, n_a = len(grid), model.n_actions
    delta = np.asarray(delta, dtype=float)
    reward_grid, _ = _grids_tables(model, None, grid)
    lp = LinearProgram(name=f"finite-primal-T{horizon}", sense="min")
    for t in range(horizon):
        for k in range(n_k):
            lp.add_variable(f"u_{t}_{k}", lb=-np.inf, ub=np.inf)
    lp.set_objective(
        {f"u_0_{k}": float(delta[k]) for k in range(n_k)}, sense="min"
    )
    for t in range(horizon - 1):
        for k in range(n_k):
            for a in range(n_a):
                terms = {f"u_{t}_{k}": 1.0}
                row = dyn.f[t, a, k]
                for l in np.flatnonzero(row):
                    terms[f"u_{t + 1}_{l}"] = terms.get(f"u_{t + 1}_{l}", 0.0) - float(
                        row[l]
                    )
                lp.add_constraint(
                    terms, ">=", float(reward_grid[k, a]), name=f"bellman_{t}_{k}_{a}"
                )
    for k in range(n_k):
        lp.add_constraint(
            {f"u_{horizon - 1}_{k}": 1.0}, "=", float(dyn.vhat[-1, k]),
            name=f"terminal_{k}",
        )
    return lp


def build_infinite_dual(
    model: PomdpModel,
    spec: ConstraintSpec,
    dyn: GridDynamics,
    grid: GridSet,
) -> LinearProgram:
    """Discounted stationary occupancy LP with per-grid flow rows and a
    budget row.  Total occupancy of any feasible point is 1/(1-discount)."""
    if dyn.kind != "infinite":
        raise ValueError("infinite builder needs stationary dynamics")
    lam = dyn.discount
    if not 0.0 <= lam < 1.0:
        raise ValueError("infinite dual needs discount < 1")
    n_k, n_a = len(grid), model.n_actions
    delta = spec.delta.resolve(n_k)
    reward_grid, cost_grid = _grids_tables(model, spec, grid)
    lp = LinearProgram(name="infinite-dual", sense="max")
    obj = {}
    for k in range(n_k):
        for a in range(n_a):
            idx = lp.add_variable(xname_inf(k, a), lb=0.0)
            obj[idx] = reward_grid[k, a]
    lp.set_objective(obj, sense="max")
    for k in range(n_k):
        terms = {xname_inf(k, a): 1.0 for a in range(n_a)}
        for a in range(n_a):
            col = dyn.f[a, :, k]
            for l in np.flatnonzero(col):
                key = xname_inf(int(l), a)
                terms[key] = terms.get(key, 0.0) - lam * float(col[l])
        lp.add_constraint(terms, "=", float(delta[k]), name=f"flow_{k}")
    budget_terms = {
        xname_inf(k, a): float(cost_grid[k, a])
        for k in range(n_k)
        for a in range(n_a)
        if cost_grid[k, a] != 0.0
    }
    lp.add_constraint(budget_terms, "<=", spec.budget, name="budget")
    return lp


def add_deterministic_constraints(
    lp: LinearProgram,
    horizon: int | None,
    n_grid: int,
    n_actions: int,
    big_m: float = 1.0,
) -> LinearProgram:
    """Add binary one-action-per-(epoch, grid) structure.

    ``horizon`` is the finite time-point count or None for stationary
    models.  ``big_m`` must bound any single occupancy: 1 suffices for the
    finite LP (per-epoch mass is 1); use 1/(1-discount) for the infinite LP.
    """
    epochs = [None] if horizon is None else list(range(horizon - 1))
    for t in epochs:
        for k in range(n_grid):
            names = []
            for a in range(n_actions):
                th = theta_name(t, k, a)
                lp.add_variable(th, kind="binary")
                names.append(th)
                xn = xname_inf(k, a) if t is None else xname(t, k, a)
                lp.add_constraint(
                    {xn: 1.0, th: -big_m}, "<=", 0.0, name=f"det_{th}"
                )
            lp.add_constraint(
                {th: 1.0 for th in names}, "=", 1.0,
                name=f"pick_one_{k}" if t is None else f"pick_one_{t}_{k}",
            )
    return lp


@dataclass(frozen=True)
class DominancePair:
    dominated: int
    dominating: int


def dominance_pairs(grid: GridSet, *, reduce: bool = True) -> list[DominancePair]:
    """Stochastic-dominance pairs by suffix-sum comparison over state order.

    With ``reduce`` (default) only the transitive reduction of the partial
    order is returned; the induced constraint set is equivalent.
    """
    pts = grid.points
    suffix = np.cumsum(pts[:, ::-1], axis=1)[:, ::-1]   # (K, S) tail sums
    geq = np.all(
        suffix[:, None, :] >= suffix[None, :, :] - 1e-12, axis=2
    )                                                   # geq[l, k]: l dominates k
    np.fill_diagonal(geq, False)
    dom = geq.T                                         # dom[k, l]: l dominates k
    if reduce:
        reach2 = (dom.astype(np.uint8) @ dom.astype(np.uint8)) > 0
        dom = dom & ~reach2
    return [
        DominancePair(dominated=int(k), dominating=int(l))
        for k, l in zip(*np.nonzero(dom))
    ]


def add_threshold_constraints(
    lp: LinearProgram,
    action_index: int,
    grid: GridSet,
    horizon: int | None,
    direction: str = "dominating",
) -> LinearProgram:
    """Monotone-action rows over the dominance order (needs the binaries).

    ``direction="dominating"``: if the action is chosen at a dominated grid
    it must be chosen at every dominating one.  ``"dominated"`` reverses the
    propagation, which is the natural form for actions favored at the low
    end of the state order.
    """
    if direction not in ("dominating", "dominated"):
        raise ValueError(f"unknown direction {direction!r}")
    pairs = dominance_pairs(grid)
    epochs = [None] if horizon is None else list(range(horizon - 1))
    a = action_index
    for t in epochs:
        for p in pairs:
            lo, hi = p.dominated, p.dominating
            if direction == "dominated":
                lo, hi = hi, lo
            tag = "s" if t is None else t
            lp.add_constraint(
                {theta_name(t, lo, a): 1.0, theta_name(t, hi, a): -1.0},
                "<=", 0.0, name=f"thr_{a}_{tag}_{lo}_{hi}",
            )
    return lp


@dataclass
class OccupancyPolicy:
    """Occupancy measures plus the extracted per-grid action distributions."""

    kind: str                       # "finite" | "infinite"
    flavor: str                     # "stochastic" | "deterministic" | "threshold"
    x: np.ndarray                   # finite (T-1, K, A); infinite (K, A)
    x_term: np.ndarray | None       # finite (K,)
    action_dist: np.ndarray         # same leading shape as x
    objective: float
    budget_used: float
    budget: float
    grid_fingerprint: str
    horizon: int | None
    discount: float
    vhat: np.ndarray                # value table for the off-grid rule
    meta: dict = field(default_factory=dict)

    @property
    def n_grid(self) -> int:
        return self.x.shape[-2]

    @property
    def n_actions(self) -> int:
        return self.x.shape[-1]

    def dist_at(self, t: int | None, k: int) -> np.ndarray:
        return self.action_dist[t, k] if self.kind == "finite" else self.action_dist[k]


def extract_policy(
    solution: Solution,
    model: PomdpModel,
    spec: ConstraintSpec,
    dyn: GridDynamics,
    grid: GridSet,
    flavor: str = "stochastic",
) -> OccupancyPolicy:
    """Normalize occupancies into action distributions.

    Grid points with (numerically) zero occupancy fall back to the greedy
    action of the value recursion at that epoch, as a unit distribution.
    """
    if solution.status not in ("optimal", "iteration-limit"):
        raise ValueError(f"cannot extract a policy from status {solution.status!r}")
    n_k, n_a = len(grid), model.n_actions
    reward_grid, cost_grid = _grids_tables(model, spec, grid)
    if dyn.kind == "finite":
        horizon = dyn.horizon
        x = np.zeros((horizon - 1, n_k, n_a))
        for t in range(horizon - 1):
            for k in range(n_k):
                for a in range(n_a):
                    x[t, k, a] = solution.values[xname(t, k, a)]
        x_term = np.array([solution.values[xname_term(k)] for k in range(n_k)])
        dist = np.zeros_like(x)
        for t in range(horizon - 1):
            mass = x[t].sum(axis=1)
            for k in range(n_k):
                if mass[k] > OCC_EPS:
                    dist[t, k] = np.clip(x[t, k], 0.0, None) / np.clip(x[t, k], 0.0, None).sum()
                else:
                    dist[t, k, dyn.greedy[t, k]] = 1.0
        objective = float(np.sum(reward_grid * x) + dyn.vhat[-1] @ x_term)
        budget_used = float(np.sum(cost_grid * x))
    else:
        horizon = None
        x = np.zeros((n_k, n_a))
        for k in range(n_k):
            for a in range(n_a):
                x[k, a] = solution.values[xname_inf(k, a)]
        x_term = None
        dist = np.zeros_like(x)
        mass = x.sum(axis=1)
        for k in range(n_k):
            if mass[k] > OCC_EPS:
                dist[k] = np.clip(x[k], 0.0, None) / np.clip(x[k], 0.0, None).sum()
            else:
                dist[k, dyn.greedy[k]] = 1.0
        objective = float(np.sum(reward_grid * x))
        budget_used = float(np.sum(cost_grid * x))
    return OccupancyPolicy(
        kind=dyn.kind, flavor=flavor, x=x, x_term=x_term, action_dist=dist,
        objective=objective, budget_used=budget_used, budget=spec.budget,
        grid_fingerprint=dyn.grid_fingerprint, horizon=horizon,
        discount=dyn.discount, vhat=np.array(dyn.vhat),
        meta={"solver_status": solution.status},
    )


def solve_constrained(
    model: PomdpModel,
    spec: ConstraintSpec,
    dyn: GridDynamics,
    grid: GridSet,
    *,
    flavor: str = "stochastic",
    threshold_actions: tuple = (),
    backend: str = "auto",
    node_cap: int = 10_000,
) -> tuple[OccupancyPolicy, Solution, LinearProgram]:
    """Build, solve, and extract in one call.

    ``flavor``: stochastic (LP), deterministic (MIP), or threshold (MIP with
    monotone-action rows for each entry of ``threshold_actions``, given as
    ``action_index`` or ``(action_index, direction)``).
    """
    if dyn.kind == "finite":
        lp = build_finite_dual(model, spec, dyn, grid)
        horizon = dyn.horizon
        big_m = 1.0
    else:
        lp = build_infinite_dual(model, spec, dyn, grid)
        horizon = None
        big_m = 1.0 / (1.0 - dyn.discount)
    if flavor == "stochastic":
        sol = solve_lp(lp, backend=backend)
    elif flavor in ("deterministic", "threshold"):
        add_deterministic_constraints(lp, horizon, len(grid), model.n_actions, big_m)
        if flavor == "threshold":
            if not threshold_actions:
                raise ValueError("threshold flavor needs threshold_actions")
            for entry in threshold_actions:
                if isinstance(entry, tuple):
                    a, direction = entry
                else:
                    a, direction = entry, "dominating"
                add_threshold_constraints(lp, a, grid, horizon, direction)
        sol = solve_mip(lp, backend=backend, node_cap=node_cap)
    else:
        raise ValueError(f"unknown flavor {flavor!r}")
    if sol.status not in ("optimal", "iteration-limit"):
        return None, sol, lp
    policy = extract_policy(sol, model, spec, dyn, grid, flavor=flavor)
    return policy, sol, lp


# -- policy serialization ------------------------------------------------------


POLICY_FORMAT = "gridcpomdp-policy/1"


def policy_to_json(policy: OccupancyPolicy) -> str:
    doc = {
        "format": POLICY_FORMAT,
        "kind": policy.kind,
        "flavor": policy.flavor,
        "horizon": policy.horizon,
        "discount": policy.discount,
        "grid_fingerprint": policy.grid_fingerprint,
        "objective": policy.objective,
        "budget_used": policy.budget_used,
        "budget": policy.budget,
        "x": policy.x.tolist(),
        "x_term": None if policy.x_term is None else policy.x_term.tolist(),
        "action_dist": policy.action_dist.tolist(),
        "vhat": policy.vhat.tolist(),
    }
    return json.dumps(doc)


def policy_from_json(text: str) -> OccupancyPolicy:
    doc = json.loads(text)
    if doc.get("format") != POLICY_FORMAT:
        raise ValueError(f"not a {POLICY_FORMAT} document")
    return OccupancyPolicy(
        kind=doc["kind"],
        flavor=doc["flavor"],
        x=np.asarray(doc["x"], dtype=float),
        x_term=None if doc["x_term"] is None else np.asarray(doc["x_term"], dtype=float),
        action_dist=np.asarray(doc["action_dist"], dtype=float),
        objective=float(doc["objective"]),
        budget_used=float(doc["budget_used"]),
        budget=float(doc["budget"]),
        grid_fingerprint=doc["grid_fingerprint"],
        horizon=doc["horizon"],
        discount=float(doc["discount"]),
        vhat=np.asarray(doc["vhat"], dtype=float),
    )
