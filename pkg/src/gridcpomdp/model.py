"""Core CPOMDP domain types and exact belief-space primitives.

Conventions used throughout the package:

* tensors are indexed action-first: ``trans[a, i, j]`` is the probability of
  moving from core state ``i`` to ``j`` under action ``a``; ``obs[a, j, o]``
  is the probability of observing ``o`` after arriving in ``j`` under ``a``;
  ``reward[a, i]`` is the immediate reward for taking ``a`` in ``i``.
* all tensors are stationary.  Solvers introduce the epoch index themselves.
* a finite ``horizon`` of T counts time points: decisions happen at epochs
  ``0 .. T-2`` and epoch ``T-1`` is the terminal (no-decision) epoch.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

PROB_ATOL = 1e-9


class ZeroProbabilityObservation(ValueError):
    """Raised when a belief update conditions on an impossible observation."""


def as_belief(probs, *, atol: float = PROB_ATOL) -> np.ndarray:
    """Validate and return a belief vector as a read-only float array.

    Entries must be non-negative and sum to one within ``atol``.  The sum is
    renormalized exactly to 1 so downstream arithmetic does not accumulate
    the input's rounding slack.
    """
    b = np.asarray(probs, dtype=float)
    if b.ndim != 1 or b.size == 0:
        raise ValueError("belief must be a non-empty 1-d vector")
    if np.any(b < -atol):
        raise ValueError(f"belief has negative entries: {b}")
    total = float(b.sum())
    if abs(total - 1.0) > atol:
        raise ValueError(f"belief sums to {total}, not 1")
    b = np.clip(b, 0.0, None) / total
    b.flags.writeable = False
    return b


@dataclass(frozen=True)
class PomdpModel:
    """A stationary CPOMDP core model (costs live in :class:`ConstraintSpec`)."""

    states: tuple[str, ...]
    actions: tuple[str, ...]
    observations: tuple[str, ...]
    trans: np.ndarray     # (A, S, S)
    obs: np.ndarray       # (A, S, O)
    reward: np.ndarray    # (A, S)
    terminal_reward: np.ndarray = None  # (S,), zero when omitted
    discount: float = 1.0

    def __post_init__(self):
        states = tuple(str(s) for s in self.states)
        actions = tuple(str(a) for a in self.actions)
        observations = tuple(str(o) for o in self.observations)
        n_s, n_a, n_o = len(states), len(actions), len(observations)
        if min(n_s, n_a, n_o) < 1:
            raise ValueError("model needs at least one state, action and observation")
        trans = np.ascontiguousarray(self.trans, dtype=float)
        obs = np.ascontiguousarray(self.obs, dtype=float)
        reward = np.ascontiguousarray(self.reward, dtype=float)
        if trans.shape != (n_a, n_s, n_s):
            raise ValueError(f"trans shape {trans.shape} != {(n_a, n_s, n_s)}")
        if obs.shape != (n_a, n_s, n_o):
            raise ValueError(f"obs shape {obs.shape} != {(n_a, n_s, n_o)}")
        if reward.shape != (n_a, n_s):
            raise ValueError(f"reward shape {reward.shape} != {(n_a, n_s)}")
        term = self.terminal_reward
        term = np.zeros(n_s) if term is None else np.ascontiguousarray(term, dtype=float)
        if term.shape != (n_s,):
            raise ValueError(f"terminal_reward shape {term.shape} != {(n_s,)}")
        if not 0.0 <= float(self.discount) <= 1.0:
            raise ValueError(f"discount {self.discount} outside [0, 1]")
        for arr in (trans, obs, reward, term):
            arr.flags.writeable = False
        object.__setattr__(self, "states", states)
        object.__setattr__(self, "actions", actions)
        object.__setattr__(self, "observations", observations)
        object.__setattr__(self, "trans", trans)
        object.__setattr__(self, "obs", obs)
        object.__setattr__(self, "reward", reward)
        object.__setattr__(self, "terminal_reward", term)
        object.__setattr__(self, "discount", float(self.discount))

    @property
    def n_states(self) -> int:
        return len(self.states)

    @property
    def n_actions(self) -> int:
        return len(self.actions)

    @property
    def n_observations(self) -> int:
        return len(self.observations)

    def action_index(self, label: str) -> int:
        return self.actions.index(label)

    def state_index(self, label: str) -> int:
        return self.states.index(label)

    def observation_index(self, label: str) -> int:
        return self.observations.index(label)

    def with_discount(self, discount: float) -> "PomdpModel":
        return replace(self, discount=discount)

    def with_terminal_reward(self, terminal) -> "PomdpModel":
        return replace(self, terminal_reward=np.asarray(terminal, dtype=float))


@dataclass(frozen=True)
class DeltaSpec:
    """Initial weight distribution over grid indices, resolvable once |K| is known."""

    kind: str = "uniform"              # uniform | point | weights
    index: int | None = None
    weights: np.ndarray | None = None

    def __post_init__(self):
        if self.kind not in ("uniform", "point", "weights"):
            raise ValueError(f"unknown delta kind {self.kind!r}")
        if self.kind == "point" and (self.index is None or self.index < 0):
            raise ValueError("point delta needs a non-negative grid index")
        if self.kind == "weights":
            w = np.asarray(self.weights, dtype=float)
            if np.any(w < -PROB_ATOL) or abs(w.sum() - 1.0) > PROB_ATOL:
                raise ValueError("delta weights must be a probability vector")
            w = np.clip(w, 0.0, None) / w.sum()
            w.flags.writeable = False
            object.__setattr__(self, "weights", w)

    @staticmethod
    def uniform() -> "DeltaSpec":
        return DeltaSpec("uniform")

    @staticmethod
    def point(index: int) -> "DeltaSpec":
        return DeltaSpec("point", index=index)

    @staticmethod
    def from_weights(weights) -> "DeltaSpec":
        return DeltaSpec("weights", weights=np.asarray(weights, dtype=float))

    def resolve(self, n_grid: int) -> np.ndarray:
        """Materialize the weight vector for a grid of ``n_grid`` points."""
        if self.kind == "uniform":
            return np.full(n_grid, 1.0 / n_grid)
        if self.kind == "point":
            if self.index >= n_grid:
                raise ValueError(f"delta point index {self.index} >= grid size {n_grid}")
            delta = np.zeros(n_grid)
            delta[self.index] = 1.0
            return delta
        if len(self.weights) != n_grid:
            raise ValueError(f"delta weights length {len(self.weights)} != grid size {n_grid}")
        return np.array(self.weights)


@dataclass(frozen=True)
class ConstraintSpec:
    """Per-(action, state) costs, a budget, and the initial grid-weight distribution."""

    cost: np.ndarray                       # (A, S)
    budget: float
    delta: DeltaSpec = field(default_factory=DeltaSpec.uniform)
    terminal: np.ndarray | None = None     # optional per-state terminal reward override

    def __post_init__(self):
        cost = np.ascontiguousarray(self.cost, dtype=float)
        if cost.ndim != 2:
            raise ValueError("cost must be an (A, S) matrix")
        if not np.all(np.isfinite(cost)):
            raise ValueError("cost entries must be finite")
        if not np.isfinite(self.budget) or self.budget < 0:
            raise ValueError(f"budget must be finite and >= 0, got {self.budget}")
        cost.flags.writeable = False
        object.__setattr__(self, "cost", cost)
        object.__setattr__(self, "budget", float(self.budget))
        if self.terminal is not None:
            term = np.ascontiguousarray(self.terminal, dtype=float)
            term.flags.writeable = False
            object.__setattr__(self, "terminal", term)


def observation_probability(model: PomdpModel, belief, a: int, o: int) -> float:
    """P(o | belief, a): the denominator of the Bayes update."""
    b = np.asarray(belief, dtype=float)
    return float(b @ model.trans[a] @ model.obs[a, :, o])


def belief_update(model: PomdpModel, belief, a: int, o: int) -> np.ndarray:
    """Bayes-rule posterior after taking action ``a`` and observing ``o``.

    Raises :class:`ZeroProbabilityObservation` when ``o`` has zero
    probability under ``belief`` and ``a``, i.e. the caller conditioned on
    an impossible observation.
    """
    b = np.asarray(belief, dtype=float)
    unnorm = (b @ model.trans[a]) * model.obs[a, :, o]
    denom = float(unnorm.sum())
    if denom <= 0.0:
        raise ZeroProbabilityObservation(
            f"observation {o} has zero probability after action {a}"
        )
    return unnorm / denom


def expected_reward(model: PomdpModel, belief, a: int) -> float:
    """Expected immediate reward of action ``a`` at ``belief``."""
    b = np.asarray(belief, dtype=float)
    return float(b @ model.reward[a])


def validate_model(model: PomdpModel, *, atol: float = PROB_ATOL) -> list[str]:
    """Return one diagnostic string per violated stochasticity/shape invariant.

    An empty list means the model is well formed.  Diagnostics are data, not
    failures: callers decide whether to raise.
    """
    out = []
    if len(set(model.states)) != model.n_states:
        out.append("state labels are not unique")
    if len(set(model.actions)) != model.n_actions:
        out.append("action labels are not unique")
    if len(set(model.observations)) != model.n_observations:
        out.append("observation labels are not unique")
    for a in range(model.n_actions):
        for i in range(model.n_states):
            row = model.trans[a, i]
            if np.any(row < -atol):
                out.append(
                    f"T[{model.actions[a]}][{model.states[i]}] has negative entries"
                )
            s = float(row.sum())
            if abs(s - 1.0) > atol:
                out.append(
                    f"T[{model.actions[a]}][{model.states[i]}] sums to {s:.12g}, not 1"
                )
        for j in range(model.n_states):
            row = model.obs[a, j]
            if np.any(row < -atol):
                out.append(
                    f"O[{model.actions[a]}][{model.states[j]}] has negative entries"
                )
            s = float(row.sum())
            if abs(s - 1.0) > atol:
                out.append(
                    f"O[{model.actions[a]}][{model.states[j]}] sums to {s:.12g}, not 1"
                )
    if not np.all(np.isfinite(model.reward)):
        out.append("reward has non-finite entries")
    if not np.all(np.isfinite(model.terminal_reward)):
        out.append("terminal_reward has non-finite entries")
    return out
