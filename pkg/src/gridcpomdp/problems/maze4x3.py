"""The 4x3 maze with one costed cell.

Eleven navigable cells (the (1,1) cell is an obstacle), slip dynamics
(intended direction 0.8, each perpendicular 0.1, blocked moves stay), a +1
goal at (3,2) and a -1 trap at (3,1), both absorbing.  The agent perceives
which of its west/east sides are walls (four percepts) or, in a terminal
cell, a distinct good/bad percept: six observations total.

Taking any action in one designated cell costs 1 (default: the cell just
west of the goal); everywhere else costs nothing.
"""

import numpy as np

from ..model import PomdpModel

WALL = (1, 1)
GOAL = (3, 2)
TRAP = (3, 1)
DEFAULT_COST_CELL = (2, 2)
STEP_REWARD = -0.04

_CELLS = [
    (x, y) for y in range(3) for x in range(4) if (x, y) != WALL
]
_INDEX = {cell: i for i, cell in enumerate(_CELLS)}
_DIRS = {"north": (0, 1), "south": (0, -1), "east": (1, 0), "west": (-1, 0)}
_PERP = {
    "north": ("west", "east"),
    "south": ("east", "west"),
    "east": ("north", "south"),
    "west": ("south", "north"),
}
_OBS = ["neither", "left", "right", "both", "good", "bad"]


def _blocked(x, y):
    return not (0 <= x < 4 and 0 <= y < 3) or (x, y) == WALL


def _slip_target(cell, direction):
    dx, dy = _DIRS[direction]
    nx, ny = cell[0] + dx, cell[1] + dy
    return cell if _blocked(nx, ny) else (nx, ny)


def _percept(cell):
    if cell == GOAL:
        return "good"
    if cell == TRAP:
        return "bad"
    west = _blocked(cell[0] - 1, cell[1])
    east = _blocked(cell[0] + 1, cell[1])
    if west and east:
        return "both"
    if west:
        return "left"
    if east:
        return "right"
    return "neither"


def build_model(discount: float = 1.0) -> PomdpModel:
    n = len(_CELLS)
    actions = list(_DIRS)
    trans = np.zeros((4, n, n))
    obs = np.zeros((4, n, len(_OBS)))
    reward = np.zeros((4, n))

    def unit_reward(dest):
        if dest == GOAL:
            return 1.0
        if dest == TRAP:
            return -1.0
        return STEP_REWARD

    for a, name in enumerate(actions):
        for cell in _CELLS:
            i = _INDEX[cell]
            if cell in (GOAL, TRAP):
                trans[a, i, i] = 1.0
                continue
            splits = [(name, 0.8)] + [(p, 0.1) for p in _PERP[name]]
            for direction, prob in splits:
                dest = _slip_target(cell, direction)
                j = _INDEX[dest]
                trans[a, i, j] += prob
                reward[a, i] += prob * unit_reward(dest)
        for cell in _CELLS:
            obs[a, _INDEX[cell], _OBS.index(_percept(cell))] = 1.0

    return PomdpModel(
        states=tuple(f"x{x}y{y}" for x, y in _CELLS),
        actions=tuple(actions),
        observations=tuple(_OBS),
        trans=trans,
        obs=obs,
        reward=reward,
        discount=discount,
    )


def cost_matrix(cost_cell=DEFAULT_COST_CELL) -> np.ndarray:
    cost = np.zeros((4, len(_CELLS)))
    cost[:, _INDEX[tuple(cost_cell)]] = 1.0
    return cost


def initial_belief() -> np.ndarray:
    b = np.zeros(len(_CELLS))
    for cell in _CELLS:
        if cell not in (GOAL, TRAP):
            b[_INDEX[cell]] = 1.0
    return b / b.sum()
