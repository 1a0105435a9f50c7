"""Targeted-advertising session management (the "mcc" instance).

A visitor prefers group-1 or group-2 items (S1/S2), may enter checkout (SB),
or leaves for good (SX).  Showing the preferred group sells best; showing
the wrong group drives the visitor away; the mixed page AN sells less but
returns a much stronger preference signal.  A sale pays +1 and checkout
returns the visitor to browsing, so long sessions can sell repeatedly.

Costs model serving expense: 20 for the mixed page, 10 for the targeted
pages, free once the visitor is in checkout or gone.
"""

import numpy as np

from ..model import PomdpModel

STATES = ("S1", "S2", "SB", "SX")
ACTIONS = ("A1", "A2", "AN")
OBSERVATIONS = ("O1", "O2", "OX")

BUY_RIGHT = 0.15      # sale probability when showing the preferred group
BUY_WRONG = 0.01
BUY_MIX = 0.08
LEAVE_RIGHT = 0.04
LEAVE_WRONG = 0.35
LEAVE_MIX = 0.12
DRIFT = 0.05          # preference swap probability per epoch
CHECKOUT = (0.45, 0.45, 0.10)   # SB -> (S1, S2, SX)
SIGNAL_TARGETED = 0.65
SIGNAL_MIX = 0.90


def _browse_row(buy, leave, stay_first: bool):
    stay = 1.0 - buy - leave - DRIFT
    if stay_first:
        return [stay, DRIFT, buy, leave]
    return [DRIFT, stay, buy, leave]


def build_model(discount: float = 1.0) -> PomdpModel:
    trans = np.zeros((3, 4, 4))
    # A1: right for S1, wrong for S2
    trans[0, 0] = _browse_row(BUY_RIGHT, LEAVE_RIGHT, True)
    trans[0, 1] = _browse_row(BUY_WRONG, LEAVE_WRONG, False)
    # A2: mirror
    trans[1, 0] = _browse_row(BUY_WRONG, LEAVE_WRONG, True)
    trans[1, 1] = _browse_row(BUY_RIGHT, LEAVE_RIGHT, False)
    # AN: symmetric
    trans[2, 0] = _browse_row(BUY_MIX, LEAVE_MIX, True)
    trans[2, 1] = _browse_row(BUY_MIX, LEAVE_MIX, False)
    for a in range(3):
        trans[a, 2] = [CHECKOUT[0], CHECKOUT[1], 0.0, CHECKOUT[2]]
        trans[a, 3] = [0.0, 0.0, 0.0, 1.0]

    obs = np.zeros((3, 4, 3))
    for a, acc in ((0, SIGNAL_TARGETED), (1, SIGNAL_TARGETED), (2, SIGNAL_MIX)):
        obs[a, 0] = [acc, 1.0 - acc, 0.0]
        obs[a, 1] = [1.0 - acc, acc, 0.0]
        obs[a, 2] = [0.5, 0.5, 0.0]
        obs[a, 3] = [0.0, 0.0, 1.0]

    # reward: probability that this step ends in a sale
    reward = np.zeros((3, 4))
    for a in range(3):
        reward[a] = trans[a, :, 2]

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
    cost = np.zeros((3, 4))
    cost[0, :2] = 10.0
    cost[1, :2] = 10.0
    cost[2, :2] = 20.0
    return cost


def initial_belief() -> np.ndarray:
    return np.full(4, 0.25)
