"""Self-contained linear/mixed-integer program representation and solvers.

The embedded solver is a dense two-phase simplex with Dantzig pricing that
permanently switches to Bland's rule once it detects a degenerate stall, so
it cannot cycle and is fully deterministic.  Models whose size exceeds
``EMBEDDED_VAR_LIMIT`` are dispatched to scipy's HiGHS backend behind the
same interface; both backends are deterministic for a fixed model.

Binary variables are handled by a best-first branch-and-bound layer on top
of the LP solver (or scipy ``milp`` for large models).
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field

import numpy as np

PIVOT_TOL = 1e-9
FEAS_TOL = 1e-7
INT_TOL = 1e-6
EMBEDDED_VAR_LIMIT = 5000
EMBEDDED_BINARY_LIMIT = 400

INF = math.inf


class LpError(ValueError):
    pass


@dataclass
class Variable:
    name: str
    lb: float = 0.0
    ub: float = INF
    kind: str = "continuous"   # continuous | binary


@dataclass
class Constraint:
    name: str
    indices: np.ndarray
    coefs: np.ndarray
    relation: str              # "<=", "=", ">="
    rhs: float


@dataclass
class Solution:
    status: str                        # optimal | infeasible | unbounded | iteration-limit
    values: dict[str, float]
    objective: float
    duals: dict[str, float]
    meta: dict = field(default_factory=dict)

    def __getitem__(self, name: str) -> float:
        return self.values[name]


class LinearProgram:
    """Sparse LP/MIP model builder with named variables and constraints."""

    def __init__(self, name: str = "lp", sense: str = "max"):
        self.name = name
        self.sense = sense
        self.variables: list[Variable] = []
        self.constraints: list[Constraint] = []
        self.objective: dict[int, float] = {}
        self._var_index: dict[str, int] = {}
        self._con_names: set[str] = set()

    # -- construction ------------------------------------------------------

    def add_variable(self, name, lb=0.0, ub=INF, kind="continuous") -> int:
        if name in self._var_index:
            raise LpError(f"duplicate variable name {name!r}")
        if kind not in ("continuous", "binary"):
            raise LpError(f"unknown variable kind {kind!r}")
        if kind == "binary":
            lb, ub = 0.0, 1.0
        if lb > ub:
            raise LpError(f"variable {name!r} has lb {lb} > ub {ub}")
        idx = len(self.variables)
        self.variables.append(Variable(name, float(lb), float(ub), kind))
        self._var_index[name] = idx
        return idx

    def var_index(self, name) -> int:
        return self._var_index[name]

    def _resolve_terms(self, terms) -> tuple[np.ndarray, np.ndarray]:
        acc: dict[int, float] = {}
        items = terms.items() if isinstance(terms, dict) else terms
        for key, coef in items:
            idx = self._var_index[key] if isinstance(key, str) else int(key)
            if not (0 <= idx < len(self.variables)):
                raise LpError(f"variable index {idx} out of range")
            c = float(coef)
            if not math.isfinite(c):
                raise LpError(f"non-finite coefficient for variable {idx}")
            acc[idx] = acc.get(idx, 0.0) + c
        idxs = np.array(sorted(acc), dtype=int)
        return idxs, np.array([acc[i] for i in idxs], dtype=float)

    def add_constraint(self, terms, relation: str, rhs: float, name=None) -> int:
        if relation not in ("<=", "=", ">="):
            raise LpError(f"unknown relation {relation!r}")
        if not math.isfinite(rhs):
            raise LpError("constraint rhs must be finite")
        if name is None:
            name = f"c{len(self.constraints)}"
        if name in self._con_names:
            raise LpError(f"duplicate constraint name {name!r}")
        idxs, coefs = self._resolve_terms(terms)
        self.constraints.append(Constraint(name, idxs, coefs, relation, float(rhs)))
        self._con_names.add(name)
        return len(self.constraints) - 1

    def set_objective(self, terms, sense=None) -> None:
        if sense is not None:
            if sense not in ("max", "min"):
                raise LpError(f"unknown sense {sense!r}")
            self.sense = sense
        idxs, coefs = self._resolve_terms(terms)
        self.objective = dict(zip(idxs.tolist(), coefs.tolist()))

    @property
    def n_variables(self) -> int:
        return len(self.variables)

    @property
    def binary_indices(self) -> list[int]:
        return [i for i, v in enumerate(self.variables) if v.kind == "binary"]

    def objective_vector(self) -> np.ndarray:
        c = np.zeros(self.n_variables)
        for i, v in self.objective.items():
            c[i] = v
        return c

    def objective_value(self, values: dict[str, float]) -> float:
        return sum(c * values[self.variables[i].name] for i, c in self.objective.items())

    def constraint_violation(self, values: dict[str, float]) -> float:
        """Largest absolute row violation of ``values`` (bounds excluded)."""
        worst = 0.0
        for con in self.constraints:
            lhs = sum(
                c * values[self.variables[i].name]
                for i, c in zip(con.indices, con.coefs)
            )
            if con.relation == "<=":
                worst = max(worst, lhs - con.rhs)
            elif con.relation == ">=":
                worst = max(worst, con.rhs - lhs)
            else:
                worst = max(worst, abs(lhs - con.rhs))
        return worst


# -- embedded dense simplex --------------------------------------------------


class _StandardForm:
    """min c.x  s.t.  A x = b, x >= 0, built from a LinearProgram.

    Tracks enough bookkeeping to map the standard-form solution and duals
    back onto the original variables and rows.
    """

    def __init__(self, lp: LinearProgram, fixed: dict[int, float] | None = None):
        self.lp = lp
        fixed = fixed or {}
        n_orig = lp.n_variables
        sign = -1.0 if lp.sense == "max" else 1.0

        # column mapping: var -> (offset, [(col, coefsign)])
        self.offsets = np.zeros(n_orig)
        self.colmap: list[list[tuple[int, float]]] = [[] for _ in range(n_orig)]
        ncols = 0
        extra_rows = []   # (var, ubound) rows for doubly-bounded vars
        for i, v in enumerate(lp.variables):
            lb, ub = v.lb, v.ub
            if i in fixed:
                lb = ub = fixed[i]
            if lb == ub:
                self.offsets[i] = lb
                continue
            if lb > -INF and ub == INF:
                self.offsets[i] = lb
                self.colmap[i] = [(ncols, 1.0)]
                ncols += 1
            elif lb > -INF and ub < INF:
                self.offsets[i] = lb
                self.colmap[i] = [(ncols, 1.0)]
                extra_rows.append((i, ub - lb, ncols))
                ncols += 1
            elif lb == -INF and ub < INF:
                self.offsets[i] = ub
                self.colmap[i] = [(ncols, -1.0)]
                ncols += 1
            else:   # free
                self.colmap[i] = [(ncols, 1.0), (ncols + 1, -1.0)]
                ncols += 2

        m = len(lp.constraints) + len(extra_rows)
        rows = np.zeros((m, ncols))
        rhs = np.zeros(m)
        for r, con in enumerate(lp.constraints):
            acc = con.rhs
            for i, coef in zip(con.indices, con.coefs):
                acc -= coef * self.offsets[i]
                for col, s in self.colmap[i]:
                    rows[r, col] += coef * s
            rhs[r] = acc
        relations = [con.relation for con in lp.constraints]
        for r, (i, width, col) in enumerate(extra_rows, start=len(lp.constraints)):
            rows[r, col] = 1.0
            rhs[r] = width
            relations.append("<=")

        # equilibrate, orient rhs >= 0
        self.scale = np.ones(m)
        self.flip = np.ones(m)
        for r in range(m):
            mx = np.abs(rows[r]).max(initial=0.0)
            if mx > 0:
                self.scale[r] = 1.0 / mx
                rows[r] *= self.scale[r]
                rhs[r] *= self.scale[r]
            if rhs[r] < 0:
                rows[r] = -rows[r]
                rhs[r] = -rhs[r]
                self.flip[r] = -1.0
                relations[r] = {"<=": ">=", ">=": "<=", "=": "="}[relations[r]]

        # slacks / artificials
        slack_cols = []
        art_cols = []
        blocks = [rows]
        for r, rel in enumerate(relations):
            col = ncols + len(slack_cols) + len(art_cols)
            unit = np.zeros((m, 1))
            if rel == "<=":
                unit[r, 0] = 1.0
                slack_cols.append((r, col, True))
            elif rel == ">=":
                unit[r, 0] = -1.0
                slack_cols.append((r, col, False))
            else:
                unit[r, 0] = 0.0
            blocks.append(unit)
        width = ncols + len(slack_cols)
        basis = np.full(m, -1, dtype=int)
        for r, col, is_basic in slack_cols:
            if is_basic:
                basis[r] = col
        art_start = width
        art_unit = []
        for r in range(m):
            if basis[r] < 0:
                unit = np.zeros((m, 1))
                unit[r, 0] = 1.0
                art_unit.append(unit)
                basis[r] = width
                art_cols.append(width)
                width += 1
        self.A = np.hstack(blocks + art_unit) if (blocks or art_unit) else rows
        self.A = self.A[:, :width]
        self.b = rhs
        self.basis = basis
        self.n_struct = ncols
        self.n_art_start = art_start
        self.art_cols = art_cols
        self.relations = relations
        self.m = m
        c = np.zeros(width)
        for i, coef in lp.objective.items():
            for col, s in self.colmap[i]:
                c[col] += sign * coef * s
        self.c = c
        self.obj_const = sign * sum(
            coef * self.offsets[i] for i, coef in lp.objective.items()
        )
        self.sign = sign
        self.fixed = fixed


def _pivot_loop(T, basis, allowed, *, max_iter, tol=PIVOT_TOL):
    """Run simplex pivots on tableau ``T`` (objective in the last row).

    Dantzig pricing with a permanent switch to Bland's rule once the
    objective stalls, which rules out cycling.  Returns a status string.
    """
    m = T.shape[0] - 1
    stall = 0
    stall_limit = max(200, 4 * T.shape[1])
    bland = False
    last_obj = T[-1, -1]
    for _ in range(max_iter):
        z = T[-1, :-1]
        cand = np.flatnonzero((z < -tol) & allowed)
        if cand.size == 0:
            return "optimal"
        if bland:
            j = cand[0]
        else:
            j = cand[np.argmin(z[cand])]
        col = T[:m, j]
        pos = np.flatnonzero(col > tol)
        if pos.size == 0:
            return "unbounded"
        ratios = T[pos, -1] / col[pos]
        best = ratios.min()
        tied = pos[np.flatnonzero(ratios <= best + 1e-12)]
        r = tied[np.argmin(basis[tied])]
        piv = T[r, j]
        T[r] /= piv
        colvals = T[:, j].copy()
        colvals[r] = 0.0
        T -= np.outer(colvals, T[r])
        T[:, j] = 0.0
        T[r, j] = 1.0
        basis[r] = j
        obj = T[-1, -1]
        if obj <= last_obj + 1e-12:   # degenerate pivot: no progress
            stall += 1
            if stall >= stall_limit:
                bland = True
        else:
            stall = 0
        last_obj = obj
    return "iteration-limit"


def _solve_embedded(lp: LinearProgram, fixed=None, max_iter=100_000) -> Solution:
    sf = _StandardForm(lp, fixed)
    m, width = sf.m, sf.A.shape[1]
    T = np.zeros((m + 1, width + 1))
    T[:m, :width] = sf.A
    T[:m, -1] = sf.b
    basis = sf.basis.copy()
    allowed = np.ones(width, dtype=bool)

    # phase 1: minimize the sum of artificials
    iters = 0
    if sf.art_cols:
        c1 = np.zeros(width)
        c1[sf.art_cols] = 1.0
        T[-1, :width] = c1
        T[-1, -1] = 0.0
        for r in range(m):
            if basis[r] in sf.art_cols:
                T[-1] -= T[r]
        status = _pivot_loop(T, basis, allowed, max_iter=max_iter)
        if status == "iteration-limit":
            return Solution("iteration-limit", {}, math.nan, {}, {"phase": 1})
        if -T[-1, -1] > FEAS_TOL:
            return Solution("infeasible", {}, math.nan, {}, {"phase": 1})
        # drive remaining artificials out of the basis where possible
        for r in range(m):
            if basis[r] in sf.art_cols:
                row = T[r, : sf.n_art_start]
                nz = np.flatnonzero(np.abs(row) > PIVOT_TOL)
                if nz.size:
                    j = nz[0]
                    piv = T[r, j]
                    T[r] /= piv
                    colvals = T[:, j].copy()
                    colvals[r] = 0.0
                    T -= np.outer(colvals, T[r])
                    T[:, j] = 0.0
                    T[r, j] = 1.0
                    basis[r] = j
        allowed[sf.art_cols] = False

    # phase 2: original costs
    T[-1, :width] = sf.c
    T[-1, -1] = 0.0
    for r in range(m):
        cb = sf.c[basis[r]]
        if cb != 0.0:
            T[-1] -= cb * T[r]
    status = _pivot_loop(T, basis, allowed, max_iter=max_iter)
    if status == "unbounded":
        return Solution("unbounded", {}, math.inf if lp.sense == "max" else -math.inf, {}, {})
    if status == "iteration-limit":
        return Solution("iteration-limit", {}, math.nan, {}, {"phase": 2})

    x_std = np.zeros(width)
    x_std[basis] = T[:m, -1]
    values = {}
    for i, v in enumerate(lp.variables):
        val = sf.offsets[i]
        for col, s in sf.colmap[i]:
            val += s * x_std[col]
        values[v.name] = float(val)

    # duals w.r.t. the original rows: solve B^T y = c_B, then undo scaling
    duals = {}
    try:
        y = np.linalg.solve(sf.A[:, basis].T, sf.c[basis])
    except np.linalg.LinAlgError:
        y = np.linalg.lstsq(sf.A[:, basis].T, sf.c[basis], rcond=None)[0]
    for r, con in enumerate(lp.constraints):
        d = y[r] * sf.scale[r] * sf.flip[r]
        duals[con.name] = float(-d if lp.sense == "max" else d)

    objective = float(lp.objective_value(values))
    return Solution(
        "optimal", values, objective, duals,
        {"backend": "embedded", "violation": lp.constraint_violation(values)},
    )


# -- scipy (HiGHS) backend ---------------------------------------------------


def _scipy_matrices(lp: LinearProgram, fixed=None):
    from scipy import sparse

    fixed = fixed or {}
    n = lp.n_variables
    sign = -1.0 if lp.sense == "max" else 1.0
    c = sign * lp.objective_vector()
    bounds = []
    for i, v in enumerate(lp.variables):
        if i in fixed:
            bounds.append((fixed[i], fixed[i]))
        else:
            bounds.append((v.lb if v.lb > -INF else -np.inf,
                           v.ub if v.ub < INF else np.inf))
    ub_rows, ub_rhs, ub_src = [], [], []
    eq_rows, eq_rhs, eq_src = [], [], []
    for r, con in enumerate(lp.constraints):
        data = (con.indices, con.coefs)
        if con.relation == "<=":
            ub_rows.append((data, 1.0))
            ub_rhs.append(con.rhs)
            ub_src.append((r, 1.0))
        elif con.relation == ">=":
            ub_rows.append((data, -1.0))
            ub_rhs.append(-con.rhs)
            ub_src.append((r, -1.0))
        else:
            eq_rows.append((data, 1.0))
            eq_rhs.append(con.rhs)
            eq_src.append((r, 1.0))

    def build(rows):
        if not rows:
            return None
        indptr = [0]
        indices = []
        data = []
        for (idxs, coefs), s in rows:
            indices.extend(idxs.tolist())
            data.extend((s * coefs).tolist())
            indptr.append(len(indices))
        return sparse.csr_matrix(
            (data, indices, indptr), shape=(len(rows), n)
        )

    return c, bounds, build(ub_rows), np.array(ub_rhs), ub_src, \
        build(eq_rows), np.array(eq_rhs), eq_src, sign


_SCIPY_STATUS = {0: "optimal", 1: "iteration-limit", 2: "infeasible", 3: "unbounded"}


def _solve_scipy(lp: LinearProgram, fixed=None) -> Solution:
    from scipy.optimize import linprog

    c, bounds, A_ub, b_ub, ub_src, A_eq, b_eq, eq_src, sign = _scipy_matrices(lp, fixed)
    res = linprog(
        c, A_ub=A_ub, b_ub=b_ub if A_ub is not None else None,
        A_eq=A_eq, b_eq=b_eq if A_eq is not None else None,
        bounds=bounds, method="highs-ds",
    )
    status = _SCIPY_STATUS.get(res.status, "iteration-limit")
    if status != "optimal":
        return Solution(status, {}, math.nan, {}, {"backend": "scipy"})
    values = {v.name: float(res.x[i]) for i, v in enumerate(lp.variables)}
    duals = {}
    if res.ineqlin is not None and len(ub_src):
        for (r, s), marg in zip(ub_src, res.ineqlin.marginals):
            duals[lp.constraints[r].name] = float(sign * s * marg)
    if res.eqlin is not None and len(eq_src):
        for (r, s), marg in zip(eq_src, res.eqlin.marginals):
            duals[lp.constraints[r].name] = float(sign * s * marg)
    objective = float(lp.objective_value(values))
    return Solution(
        "optimal", values, objective, duals,
        {"backend": "scipy", "violation": lp.constraint_violation(values)},
    )


# -- public entry points -----------------------------------------------------


def solve_lp(lp: LinearProgram, backend: str = "auto", fixed=None) -> Solution:
    """Solve a pure LP to an optimal basic solution with duals populated.

    ``backend`` is ``auto`` (embedded simplex up to ``EMBEDDED_VAR_LIMIT``
    variables, HiGHS beyond), ``embedded``, or ``scipy``.  ``fixed`` pins a
    subset of variables (index -> value); used by branch and bound.
    """
    if fixed is None and lp.binary_indices:
        raise LpError("model has binary variables; use solve_mip")
    if backend == "auto":
        backend = "embedded" if lp.n_variables <= EMBEDDED_VAR_LIMIT else "scipy"
    if backend == "embedded":
        return _solve_embedded(lp, fixed)
    if backend == "scipy":
        return _solve_scipy(lp, fixed)
    raise LpError(f"unknown backend {backend!r}")


def _fractional_binaries(lp, sol, binaries):
    fracs = []
    for i in binaries:
        val = sol.values[lp.variables[i].name]
        f = abs(val - round(val))
        if f > INT_TOL:
            fracs.append((f, i))
    return fracs


def solve_mip(lp: LinearProgram, backend: str = "auto", node_cap: int = 10_000) -> Solution:
    """Best-first branch and bound over the binary variables.

    Proves optimality when the node queue empties; at ``node_cap`` returns
    the best incumbent with status ``iteration-limit``.
    """
    binaries = lp.binary_indices
    if not binaries:
        return solve_lp(lp, backend=backend)
    if backend == "auto":
        backend = "embedded" if len(binaries) <= EMBEDDED_BINARY_LIMIT else "scipy"
    if backend == "scipy":
        return _solve_scipy_mip(lp)

    maximize = lp.sense == "max"
    better = (lambda a, b: a > b + 1e-9) if maximize else (lambda a, b: a < b - 1e-9)
    incumbent: Solution | None = None
    counter = 0
    heap = []

    root = solve_lp(lp, fixed={})
    if root.status != "optimal":
        return root
    heapq.heappush(heap, ((-root.objective if maximize else root.objective), counter, {}, root))
    nodes = 0
    while heap:
        _, _, fixing, sol = heapq.heappop(heap)
        nodes += 1
        if incumbent is not None and not better(sol.objective, incumbent.objective):
            continue
        fracs = _fractional_binaries(lp, sol, binaries)
        if not fracs:
            if incumbent is None or better(sol.objective, incumbent.objective):
                rounded = dict(sol.values)
                for i in binaries:
                    name = lp.variables[i].name
                    rounded[name] = float(round(rounded[name]))
                incumbent = Solution(
                    "optimal", rounded, sol.objective, {}, dict(sol.meta)
                )
            continue
        if nodes >= node_cap:
            status = "iteration-limit"
            if incumbent is not None:
                return Solution(status, incumbent.values, incumbent.objective, {},
                                {"nodes": nodes, "proved": False})
            return Solution(status, {}, math.nan, {}, {"nodes": nodes})
        # branch on the most fractional binary, ties toward the lowest index
        fracs.sort(key=lambda t: (-t[0], t[1]))
        _, branch_var = fracs[0]
        for val in (0.0, 1.0):
            child = dict(fixing)
            child[branch_var] = val
            counter += 1
            csol = solve_lp(lp, fixed=child)
            if csol.status != "optimal":
                continue
            if incumbent is not None and not better(csol.objective, incumbent.objective):
                continue
            heapq.heappush(
                heap,
                ((-csol.objective if maximize else csol.objective), counter, child, csol),
            )
    if incumbent is None:
        return Solution("infeasible", {}, math.nan, {}, {"nodes": nodes})
    meta = dict(incumbent.meta)
    meta.update(nodes=nodes, proved=True)
    return Solution("optimal", incumbent.values, incumbent.objective, {}, meta)


def _solve_scipy_mip(lp: LinearProgram) -> Solution:
    from scipy import optimize, sparse

    c, bounds, A_ub, b_ub, _, A_eq, b_eq, _, sign = _scipy_matrices(lp)
    constraints = []
    if A_ub is not None:
        constraints.append(optimize.LinearConstraint(A_ub, -np.inf, b_ub))
    if A_eq is not None:
        constraints.append(optimize.LinearConstraint(A_eq, b_eq, b_eq))
    integrality = np.zeros(lp.n_variables)
    for i in lp.binary_indices:
        integrality[i] = 1
    lo = np.array([b[0] for b in bounds])
    hi = np.array([b[1] for b in bounds])
    res = optimize.milp(
        c, constraints=constraints, integrality=integrality,
        bounds=optimize.Bounds(lo, hi),
    )
    status = {0: "optimal", 1: "iteration-limit", 2: "infeasible", 3: "unbounded"}.get(
        res.status, "iteration-limit"
    )
    if res.x is None:
        return Solution(status, {}, math.nan, {}, {"backend": "scipy-milp"})
    values = {v.name: float(res.x[i]) for i, v in enumerate(lp.variables)}
    for i in lp.binary_indices:
        name = lp.variables[i].name
        values[name] = float(round(values[name]))
    return Solution(status, values, float(lp.objective_value(values)), {},
                    {"backend": "scipy-milp"})


# -- LP text format export ---------------------------------------------------


def _fmt_terms(items, variables) -> str:
    parts = []
    for idx, coef in items:
        name = variables[idx].name
        mag = f"{abs(coef):.17g}"
        if not parts:
            parts.append(f"{'-' if coef < 0 else ''}{mag} {name}")
        else:
            parts.append(f"{'-' if coef < 0 else '+'} {mag} {name}")
    return " ".join(parts) if parts else "0 " + variables[0].name


def export_lp(lp: LinearProgram) -> str:
    """Render the model in the standard human-readable LP text format."""
    lines = [f"\\ {lp.name}"]
    lines.append("Maximize" if lp.sense == "max" else "Minimize")
    obj_items = sorted(lp.objective.items())
    lines.append(" obj: " + _fmt_terms(obj_items, lp.variables))
    lines.append("Subject To")
    rel_txt = {"<=": "<=", ">=": ">=", "=": "="}
    for con in lp.constraints:
        expr = _fmt_terms(list(zip(con.indices.tolist(), con.coefs.tolist())), lp.variables)
        lines.append(f" {con.name}: {expr} {rel_txt[con.relation]} {con.rhs:.17g}")
    bound_lines = []
    for v in lp.variables:
        if v.kind == "binary":
            continue
        if v.lb == 0.0 and v.ub == INF:
            continue
        if v.lb == -INF and v.ub == INF:
            bound_lines.append(f" {v.name} free")
        elif v.ub == INF:
            bound_lines.append(f" {v.lb:.17g} <= {v.name}")
        elif v.lb == -INF:
            bound_lines.append(f" {v.name} <= {v.ub:.17g}")
        else:
            bound_lines.append(f" {v.lb:.17g} <= {v.name} <= {v.ub:.17g}")
    if bound_lines:
        lines.append("Bounds")
        lines.extend(bound_lines)
    binaries = lp.binary_indices
    if binaries:
        lines.append("Binary")
        for i in binaries:
            lines.append(f" {lp.variables[i].name}")
    lines.append("End")
    return "\n".join(lines) + "\n"
