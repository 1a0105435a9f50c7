"""Belief-simplex grid sets: fixed-resolution enumeration and the
size-controlled construction that fills a target cardinality N.

Points are generated in exact rational arithmetic (integer numerators over a
common resolution denominator) and converted to float once, so duplicate
detection and the deterministic lexicographic order never depend on float
rounding.
"""

from __future__ import annotations

import csv
import hashlib
import io
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np


def grid_set_size(n_states: int, rho: int) -> int:
    """Number of points in the resolution-``rho`` grid over ``n_states`` states.

    Exact binomial count C(n_states + rho - 1, n_states - 1); Python integers
    make overflow impossible.
    """
    if n_states < 1 or rho < 1:
        raise ValueError("need n_states >= 1 and rho >= 1")
    return math.comb(n_states + rho - 1, n_states - 1)


def _compositions(total: int, parts: int):
    """All non-negative integer vectors of length ``parts`` summing to ``total``,
    in ascending lexicographic order."""
    if parts == 1:
        yield (total,)
        return
    for head in range(total + 1):
        for tail in _compositions(total - head, parts - 1):
            yield (head,) + tail


def _resolution_tuples(n_states: int, rho: int) -> list[tuple]:
    """Grid points of resolution ``rho`` as exact Fraction tuples."""
    return [
        tuple(Fraction(c, rho) for c in comp)
        for comp in _compositions(rho, n_states)
    ]


def _tuples_to_array(points: list[tuple]) -> np.ndarray:
    arr = np.array([[float(v) for v in p] for p in points], dtype=float)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class GridSet:
    """An ordered belief grid (index set K), sorted lexicographically ascending."""

    points: np.ndarray        # (K, S), read-only
    resolution_used: int      # finest resolution that contributed points
    order: str = "lex"

    @property
    def n_points(self) -> int:
        return self.points.shape[0]

    @property
    def n_states(self) -> int:
        return self.points.shape[1]

    def __len__(self) -> int:
        return self.n_points

    @property
    def fingerprint(self) -> str:
        """Stable content hash used to match grids across artifacts."""
        h = hashlib.sha256()
        h.update(f"{self.points.shape}".encode())
        h.update(np.round(self.points, 12).tobytes())
        return h.hexdigest()[:16]

    def corner_indices(self) -> np.ndarray:
        """Index of each simplex corner e_i within the grid, in state order."""
        idx = np.full(self.n_states, -1, dtype=int)
        ones = np.isclose(self.points, 1.0, atol=1e-12)
        for k in range(self.n_points):
            hit = np.flatnonzero(ones[k])
            if hit.size == 1 and abs(self.points[k].sum() - 1.0) < 1e-9:
                idx[hit[0]] = k
        if np.any(idx < 0):
            missing = [i for i, v in enumerate(idx) if v < 0]
            raise ValueError(f"grid is missing corner points for states {missing}")
        return idx

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf)
        for row in self.points:
            writer.writerow([repr(float(v)) for v in row])
        return buf.getvalue()

    @staticmethod
    def from_csv(text: str, resolution_used: int = 0) -> "GridSet":
        rows = [
            [float(v) for v in row]
            for row in csv.reader(io.StringIO(text))
            if row
        ]
        if not rows:
            raise ValueError("empty grid CSV")
        arr = np.array(rows, dtype=float)
        arr.flags.writeable = False
        return GridSet(points=arr, resolution_used=resolution_used)


def fixed_resolution_grid(n_states: int, rho: int) -> GridSet:
    """All beliefs whose coordinates are multiples of 1/rho, lexicographically
    sorted.  Size equals :func:`grid_set_size`."""
    pts = sorted(_resolution_tuples(n_states, rho))
    return GridSet(points=_tuples_to_array(pts), resolution_used=rho)


def build_grid_set(n_states: int, n_points: int) -> GridSet:
    """Size-controlled grid construction.

    Finds the smallest resolution iota with |G_iota| > N, starts from
    G_{iota-1}, and fills up to N points drawn at stride floor(N / |G*|) from
    the lexicographically sorted difference G* = G_iota \\ G_{iota-1}.  A
    stride of zero is clamped to one and an index running past |G*| wraps to
    the smallest not-yet-taken position, so exactly N points always result.
    """
    if n_states < 1:
        raise ValueError("need n_states >= 1")
    if n_points < n_states:
        raise ValueError(
            f"grid of {n_points} points cannot contain all {n_states} corners"
        )
    iota = 1
    while grid_set_size(n_states, iota) <= n_points:
        iota += 1
    base = set(_resolution_tuples(n_states, iota - 1)) if iota > 1 else set()
    chosen = sorted(base)
    need = n_points - len(chosen)
    if need > 0:
        diff = sorted(set(_resolution_tuples(n_states, iota)) - base)
        eta = max(1, n_points // len(diff))
        taken = np.zeros(len(diff), dtype=bool)
        pos = 0
        while need > 0:
            if pos >= len(diff):
                pos -= len(diff)
            while taken[pos]:
                pos = (pos + 1) % len(diff)
            taken[pos] = True
            chosen.append(diff[pos])
            pos += eta
            need -= 1
        chosen.sort()
    return GridSet(points=_tuples_to_array(chosen), resolution_used=iota)
