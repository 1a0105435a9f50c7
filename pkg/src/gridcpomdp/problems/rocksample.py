"""Rocksample on a square grid with a distance-degrading rock sensor.

States enumerate (cell, rock-quality bitmask) pairs plus one absorbing
terminal state reached by moving east off the grid, so a side-s board with
R rocks has s*s*2^R + 1 states.  Actions: north, south, east, west, sample,
then one check per rock.  Observations are the binary sensor reading
(good/bad); non-check actions always read "bad".

Sensor accuracy is 0.5 + 0.5 * 2^(-d / half_distance) in the Euclidean
distance d between the robot and the checked rock.
"""

import math

import numpy as np

from ..model import PomdpModel

DEFAULT_SIDE = 4
DEFAULT_ROCKS = ((0, 2), (2, 0), (3, 3))
DEFAULT_START = (1, 3)
DEFAULT_HALF_DISTANCE = 2.0

STEP_REWARD = -1.0
EXIT_REWARD = 5.0
GOOD_SAMPLE = 10.0
BAD_SAMPLE = -10.0
EMPTY_SAMPLE = -1.0
MOVE_COST = 0.5
CHECK_COST = 1.0


def rocksample_model(
    side: int = DEFAULT_SIDE,
    rock_positions=DEFAULT_ROCKS,
    half_distance: float = DEFAULT_HALF_DISTANCE,
    discount: float = 1.0,
) -> PomdpModel:
    """Generate the rocksample POMDP for an arbitrary board."""
    rocks = [tuple(p) for p in rock_positions]
    if side < 1:
        raise ValueError("side must be >= 1")
    if len(set(rocks)) != len(rocks):
        raise ValueError("rock positions must be distinct")
    for x, y in rocks:
        if not (0 <= x < side and 0 <= y < side):
            raise ValueError(f"rock at {(x, y)} is off the grid")
    n_rocks = len(rocks)
    n_masks = 1 << n_rocks
    n_cells = side * side
    n_states = n_cells * n_masks + 1
    terminal = n_states - 1
    rock_at = {pos: r for r, pos in enumerate(rocks)}

    def sid(x, y, mask):
        return (y * side + x) * n_masks + mask

    # state order must match sid(): cell-major then mask
    states = [None] * (n_states - 1)
    for y in range(side):
        for x in range(side):
            for mask in range(n_masks):
                states[sid(x, y, mask)] = f"x{x}y{y}m{mask}"
    states.append("terminal")
    actions = ["north", "south", "east", "west", "sample"] + [
        f"check-{r}" for r in range(n_rocks)
    ]
    observations = ["good", "bad"]
    n_a = len(actions)
    moves = {"north": (0, 1), "south": (0, -1), "east": (1, 0), "west": (-1, 0)}

    trans = np.zeros((n_a, n_states, n_states))
    reward = np.zeros((n_a, n_states))
    obs = np.zeros((n_a, n_states, 2))
    obs[:, :, 1] = 1.0      # every action reads "bad" unless a check says otherwise
    cost = np.full((n_a, n_states), MOVE_COST)

    for a, name in enumerate(actions):
        trans[a, terminal, terminal] = 1.0
    for y in range(side):
        for x in range(side):
            for mask in range(n_masks):
                s = sid(x, y, mask)
                for a, name in enumerate(actions):
                    if name in moves:
                        dx, dy = moves[name]
                        nx, ny = x + dx, y + dy
                        if name == "east" and nx == side:
                            trans[a, s, terminal] = 1.0
                            reward[a, s] = EXIT_REWARD
                        elif 0 <= nx < side and 0 <= ny < side:
                            trans[a, s, sid(nx, ny, mask)] = 1.0
                            reward[a, s] = STEP_REWARD
                        else:
                            trans[a, s, s] = 1.0
                            reward[a, s] = STEP_REWARD
                    elif name == "sample":
                        r = rock_at.get((x, y))
                        if r is None:
                            trans[a, s, s] = 1.0
                            reward[a, s] = EMPTY_SAMPLE
                        elif mask & (1 << r):
                            trans[a, s, sid(x, y, mask & ~(1 << r))] = 1.0
                            reward[a, s] = GOOD_SAMPLE
                        else:
                            trans[a, s, s] = 1.0
                            reward[a, s] = BAD_SAMPLE
                    else:
                        trans[a, s, s] = 1.0

    for r, (rx, ry) in enumerate(rocks):
        a = 5 + r
        cost[a, :] = CHECK_COST
        for y in range(side):
            for x in range(side):
                d = math.hypot(x - rx, y - ry)
                acc = 0.5 + 0.5 * 2.0 ** (-d / half_distance)
                for mask in range(n_masks):
                    s = sid(x, y, mask)
                    good = bool(mask & (1 << r))
                    p_good_reading = acc if good else 1.0 - acc
                    obs[a, s, 0] = p_good_reading
                    obs[a, s, 1] = 1.0 - p_good_reading

    return PomdpModel(
        states=tuple(states),
        actions=tuple(actions),
        observations=tuple(observations),
        trans=trans,
        obs=obs,
        reward=reward,
        discount=discount,
    ), cost


def build_model(discount: float = 1.0) -> PomdpModel:
    return rocksample_model(discount=discount)[0]


def cost_matrix() -> np.ndarray:
    return rocksample_model()[1]


def initial_belief(
    side: int = DEFAULT_SIDE,
    rock_positions=DEFAULT_ROCKS,
    start=DEFAULT_START,
) -> np.ndarray:
    n_rocks = len(rock_positions)
    n_masks = 1 << n_rocks
    n_states = side * side * n_masks + 1
    x, y = start
    b = np.zeros(n_states)
    base = (y * side + x) * n_masks
    b[base:base + n_masks] = 1.0 / n_masks
    return b
