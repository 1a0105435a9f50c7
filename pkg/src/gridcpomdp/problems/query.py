"""Two-server query system with asymmetric query prices.

Each server is unloaded, loaded, or down (9 joint states).  Querying a
server returns a fast, slow, or no response depending on that server's
(post-drift) state, worth 10, 3, and 0.  Server 1 recovers faster and is
dearer to query (cost 2 versus 1), so the budget trades response quality
against query spend.  Both actions share the same drift dynamics.
"""

import itertools

import numpy as np

from ..model import PomdpModel

SERVER_STATES = ("u", "l", "d")
OBSERVATIONS = ("no-response", "slow-response", "fast-response")
RESPONSE_REWARD = np.array([0.0, 3.0, 10.0])

# per-server drift chains over (u, l, d); server 1 repairs faster
DRIFT_1 = np.array([
    [0.85, 0.15, 0.00],
    [0.35, 0.55, 0.10],
    [0.25, 0.00, 0.75],
])
DRIFT_2 = np.array([
    [0.75, 0.25, 0.00],
    [0.25, 0.60, 0.15],
    [0.15, 0.00, 0.85],
])

# response profile by the queried server's state
RESPONSE = np.array([
    [0.03, 0.12, 0.85],   # unloaded
    [0.15, 0.75, 0.10],   # loaded
    [0.90, 0.08, 0.02],   # down
])


def _joint_states():
    return list(itertools.product(range(3), range(3)))


def build_model(discount: float = 1.0) -> PomdpModel:
    joint = _joint_states()
    n = len(joint)
    index = {pair: i for i, pair in enumerate(joint)}
    trans = np.zeros((2, n, n))
    for (s1, s2), i in index.items():
        for t1 in range(3):
            for t2 in range(3):
                p = DRIFT_1[s1, t1] * DRIFT_2[s2, t2]
                if p:
                    trans[:, i, index[(t1, t2)]] = p
    obs = np.zeros((2, n, 3))
    for (s1, s2), j in index.items():
        obs[0, j] = RESPONSE[s1]
        obs[1, j] = RESPONSE[s2]
    # reward collapses over arrival state and response
    reward = np.zeros((2, n))
    for a in range(2):
        reward[a] = trans[a] @ (obs[a] @ RESPONSE_REWARD)
    return PomdpModel(
        states=tuple(f"{SERVER_STATES[s1]}{SERVER_STATES[s2]}" for s1, s2 in joint),
        actions=("query-1", "query-2"),
        observations=OBSERVATIONS,
        trans=trans,
        obs=obs,
        reward=reward,
        discount=discount,
    )


def cost_matrix() -> np.ndarray:
    cost = np.zeros((2, 9))
    cost[0, :] = 2.0
    cost[1, :] = 1.0
    return cost


def initial_belief() -> np.ndarray:
    return np.full(9, 1.0 / 9.0)
