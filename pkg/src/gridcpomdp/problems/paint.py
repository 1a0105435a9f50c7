"""Part-painting quality control with a limited inspection budget.

States aggregate flaw/blemish/paint status; painting usually succeeds and
also covers a blemish on a flawed part, inspecting reads the blemish with
0.9 accuracy, and shipping or rejecting replaces the part with a fresh one
(fifty-fifty good or flawed-and-blemished).  Inspect costs 2, everything
else 1.
"""

import numpy as np

from ..model import PomdpModel

STATES = ("NFL-NBL-NPA", "NFL-NBL-PA", "FL-NBL-PA", "FL-BL-NPA")
ACTIONS = ("paint", "inspect", "ship", "reject")
OBSERVATIONS = ("blemished", "not-blemished")

_NEW_PART = np.array([0.5, 0.0, 0.0, 0.5])
PAINT_SUCCESS = 0.9
INSPECT_ACCURACY = 0.9


def build_model(discount: float = 1.0) -> PomdpModel:
    n = len(STATES)
    trans = np.zeros((4, n, n))
    # paint: NPA parts get painted with high probability; painting a
    # flawed-blemished part covers the blemish
    trans[0, 0] = [1 - PAINT_SUCCESS, PAINT_SUCCESS, 0.0, 0.0]
    trans[0, 1] = [0.0, 1.0, 0.0, 0.0]
    trans[0, 2] = [0.0, 0.0, 1.0, 0.0]
    trans[0, 3] = [0.0, 0.0, PAINT_SUCCESS, 1 - PAINT_SUCCESS]
    # inspect: no state change
    trans[1] = np.eye(n)
    # ship / reject: a new part arrives
    trans[2] = np.tile(_NEW_PART, (n, 1))
    trans[3] = np.tile(_NEW_PART, (n, 1))

    obs = np.zeros((4, n, 2))
    obs[:, :, :] = 0.5                       # only inspection is informative
    acc = INSPECT_ACCURACY
    obs[1] = [[1 - acc, acc], [1 - acc, acc], [1 - acc, acc], [acc, 1 - acc]]

    reward = np.zeros((4, n))
    reward[2] = [-1.0, 1.0, -1.0, -1.0]      # ship: only a good painted part
    reward[3] = [-1.0, -1.0, 0.0, 1.0]       # reject: flawed-blemished is right

    return PomdpModel(
        states=STATES,
        actions=ACTIONS,
        observations=OBSERVATIONS,
        trans=trans,
        obs=obs,
        reward=reward,
        discount=discount,
    )


def cost_matrix() -> np.ndarray:
    cost = np.ones((4, len(STATES)))
    cost[1, :] = 2.0
    return cost


def initial_belief() -> np.ndarray:
    return np.full(4, 0.25)
