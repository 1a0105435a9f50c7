"""The two-door tiger problem with listen costs.

Actions are ordered (listen, open-left, open-right).  Listening keeps the
state and reports the tiger's side with accuracy 0.85 at reward -1; opening
a door resets the problem (uniform transition, uninformative observation)
and pays -100 for the tiger door or +10 for the safe one.  Costs: listen 2,
either open 1.
"""

import numpy as np

from ..model import PomdpModel

LISTEN, OPEN_LEFT, OPEN_RIGHT = 0, 1, 2


def build_model(discount: float = 1.0) -> PomdpModel:
    uniform = np.full((2, 2), 0.5)
    trans = np.array([np.eye(2), uniform, uniform])
    obs = np.array([
        [[0.85, 0.15], [0.15, 0.85]],
        uniform,
        uniform,
    ])
    reward = np.array([
        [-1.0, -1.0],
        [-100.0, 10.0],
        [10.0, -100.0],
    ])
    return PomdpModel(
        states=("tiger-left", "tiger-right"),
        actions=("listen", "open-left", "open-right"),
        observations=("hear-left", "hear-right"),
        trans=trans,
        obs=obs,
        reward=reward,
        discount=discount,
    )


def cost_matrix() -> np.ndarray:
    return np.array([
        [2.0, 2.0],
        [1.0, 1.0],
        [1.0, 1.0],
    ])


def initial_belief() -> np.ndarray:
    return np.array([0.5, 0.5])
