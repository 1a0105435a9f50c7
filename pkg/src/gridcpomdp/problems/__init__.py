"""Built-in catalog of the six benchmark CPOMDP instances.

Budgets, horizons, discounts, and starting beliefs follow the benchmark
setup: discount 1.0 with the listed horizon for finite runs, discount 0.9
for infinite ones, three budget levels each.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..model import ConstraintSpec, DeltaSpec, PomdpModel
from . import maze4x3, mcc, paint, query, rocksample, tiger
from .rocksample import rocksample_model

BUDGET_LEVELS = ("small", "medium", "large")

# name -> (finite horizon T, finite budgets, infinite budgets)
_TABLES: dict[str, tuple[int, tuple, tuple]] = {
    "tiger": (20, (21.0, 25.0, 50.0), (11.5, 14.0, 22.0)),
    "paint": (20, (19.5, 22.0, 50.0), (10.5, 12.0, 18.0)),
    "mcc": (20, (118.0, 123.0, 140.0), (63.7, 66.0, 75.0)),
    "query": (5, (4.16, 4.47, 7.0), (10.32, 11.58, 16.0)),
    "4x3": (5, (0.17, 0.25, 0.60), (0.40, 0.45, 2.0)),
    "rocksample": (5, (2.0, 2.1, 2.4), (5.04, 5.64, 6.0)),
}

_BUILDERS = {
    "tiger": tiger,
    "paint": paint,
    "mcc": mcc,
    "query": query,
    "4x3": maze4x3,
    "rocksample": rocksample,
}

INFINITE_DISCOUNT = 0.9


class UnknownInstanceError(KeyError):
    pass


@dataclass(frozen=True)
class InstanceSummary:
    name: str
    n_states: int
    n_actions: int
    n_observations: int
    finite_horizon: int
    finite_budgets: tuple
    infinite_budgets: tuple


@dataclass(frozen=True)
class InstanceRecord:
    name: str
    model: PomdpModel
    constraints_by_level: dict[str, ConstraintSpec]
    horizon: int | None          # None marks the infinite-horizon record
    initial_belief: np.ndarray


@dataclass(frozen=True)
class InstanceConfig:
    name: str
    budget_level: str
    horizon_kind: str            # "finite" | "infinite"
    horizon: int | None
    discount: float
    initial_belief: np.ndarray
    delta_hint: str              # "uniform" | "nearest-b0"


def instance_names() -> tuple[str, ...]:
    return tuple(_TABLES)


def _require(name: str):
    if name not in _TABLES:
        raise UnknownInstanceError(
            f"unknown instance {name!r}; known: {', '.join(_TABLES)}"
        )


def list_instances() -> list[InstanceSummary]:
    out = []
    for name, (horizon, fin, inf) in _TABLES.items():
        model = _BUILDERS[name].build_model()
        out.append(
            InstanceSummary(
                name=name,
                n_states=model.n_states,
                n_actions=model.n_actions,
                n_observations=model.n_observations,
                finite_horizon=horizon,
                finite_budgets=fin,
                infinite_budgets=inf,
            )
        )
    return out


def get_summary(name: str) -> InstanceSummary:
    _require(name)
    return next(s for s in list_instances() if s.name == name)


def instantiate(
    name: str,
    budget_level: str = "large",
    horizon_kind: str = "finite",
) -> tuple[PomdpModel, ConstraintSpec, InstanceConfig]:
    """Materialize one benchmark configuration.

    Finite runs use discount 1.0 and the tabled horizon; infinite runs use
    discount 0.9.  The default delta is uniform over the grid for finite
    benchmarks; infinite comparisons conventionally use a point mass at the
    grid point nearest the starting belief (``delta_hint``).
    """
    _require(name)
    if budget_level not in BUDGET_LEVELS:
        raise UnknownInstanceError(f"unknown budget level {budget_level!r}")
    if horizon_kind not in ("finite", "infinite"):
        raise UnknownInstanceError(f"unknown horizon kind {horizon_kind!r}")
    horizon, fin, inf = _TABLES[name]
    builder = _BUILDERS[name]
    level_idx = BUDGET_LEVELS.index(budget_level)
    if horizon_kind == "finite":
        model = builder.build_model(discount=1.0)
        budget = fin[level_idx]
        config_horizon = horizon
        hint = "uniform"
    else:
        model = builder.build_model(discount=INFINITE_DISCOUNT)
        budget = inf[level_idx]
        config_horizon = None
        hint = "nearest-b0"
    spec = ConstraintSpec(
        cost=builder.cost_matrix(),
        budget=budget,
        delta=DeltaSpec.uniform(),
    )
    config = InstanceConfig(
        name=name,
        budget_level=budget_level,
        horizon_kind=horizon_kind,
        horizon=config_horizon,
        discount=model.discount,
        initial_belief=builder.initial_belief(),
        delta_hint=hint,
    )
    return model, spec, config


def get_record(name: str, horizon_kind: str = "finite") -> InstanceRecord:
    _require(name)
    specs = {}
    model = None
    belief = None
    for level in BUDGET_LEVELS:
        model, spec, config = instantiate(name, level, horizon_kind)
        specs[level] = spec
        belief = config.initial_belief
    horizon = _TABLES[name][0] if horizon_kind == "finite" else None
    return InstanceRecord(
        name=name, model=model, constraints_by_level=specs,
        horizon=horizon, initial_belief=belief,
    )


def rocksample_generator(side: int, rock_positions, **kwargs) -> PomdpModel:
    """Rocksample model for an arbitrary board; see the module for scoring."""
    return rocksample_model(side, rock_positions, **kwargs)[0]


def export_instance_files(name: str, budget_level: str, horizon_kind: str):
    """Render one configuration as (.pomdp text, sidecar text)."""
    from ..pomdp_format import serialize_constraint_sidecar, serialize_model

    model, spec, config = instantiate(name, budget_level, horizon_kind)
    return (
        serialize_model(model, start=config.initial_belief),
        serialize_constraint_sidecar(model, spec),
    )
