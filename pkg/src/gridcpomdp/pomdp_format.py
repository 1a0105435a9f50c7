"""Reader/writer for the Cassandra ``.pomdp`` model format plus a sidecar
format carrying costs, budget, terminal rewards, and the grid-weight
distribution.

Both formats are line oriented, UTF-8, with ``#`` comments.  Parsing never
raises on malformed input: problems come back as diagnostics with line and
column numbers, and a model is returned only when no errors were found.
Sub-tolerance stochasticity slack (from decimal rounding in files) is
renormalized silently; larger violations are errors.

Rewards with next-state/observation arguments are collapsed by expectation
into per-(action, state) values on load.  ``values: cost`` files are
normalized to reward semantics (sign flip).
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

import numpy as np

from .model import ConstraintSpec, DeltaSpec, PomdpModel, validate_model

PROB_ATOL = 1e-9

_PREAMBLE = ("discount", "values", "states", "actions", "observations", "start")
_SECTIONS = ("T", "O", "R")
_TOKEN_RE = re.compile(r"[^\s:]+|:")


@dataclass(frozen=True)
class ParseDiagnostic:
    line: int
    column: int
    severity: str          # "error" | "warning"
    message: str

    def __str__(self):
        return f"{self.line}:{self.column}: {self.severity}: {self.message}"


@dataclass
class ParseResult:
    model: PomdpModel | None
    diagnostics: list[ParseDiagnostic]
    start_belief: np.ndarray | None = None

    @property
    def ok(self) -> bool:
        return self.model is not None


@dataclass
class SidecarResult:
    spec: ConstraintSpec | None
    diagnostics: list[ParseDiagnostic]

    @property
    def ok(self) -> bool:
        return self.spec is not None


@dataclass
class _Tok:
    text: str
    line: int
    col: int


def _tokenize(text: str) -> list[list[_Tok]]:
    """Token rows per line; comments stripped, colons are their own tokens."""
    rows = []
    for ln, raw in enumerate(text.splitlines(), start=1):
        body = raw.split("#", 1)[0]
        row = [
            _Tok(m.group(0), ln, m.start() + 1) for m in _TOKEN_RE.finditer(body)
        ]
        rows.append(row)
    return rows


def _is_float(s: str) -> bool:
    try:
        float(s)
        return True
    except ValueError:
        return False


class _Parser:
    def __init__(self, text: str):
        self.rows = _tokenize(text)
        self.diags: list[ParseDiagnostic] = []
        self.names: dict[str, list[str]] = {}
        self.discount = 1.0
        self.values_sign = 1.0
        self.start: np.ndarray | None = None
        self.trans = None
        self.obs = None
        self.rewards = None
        self.row_source: dict[tuple, int] = {}
        self.n = {"states": 0, "actions": 0, "observations": 0}

    def error(self, tok: _Tok | None, message: str, line=None, col=None):
        if tok is not None:
            line, col = tok.line, tok.col
        self.diags.append(ParseDiagnostic(line or 1, col or 1, "error", message))

    def warn(self, tok: _Tok, message: str):
        self.diags.append(ParseDiagnostic(tok.line, tok.col, "warning", message))

    # -- preamble -----------------------------------------------------------

    def _statements(self):
        """Group token rows into directive statements (a directive keyword at
        the start of a line opens a new statement)."""
        current = None
        for row in self.rows:
            if not row:
                continue
            head = row[0].text
            if head in _PREAMBLE or head in _SECTIONS:
                if current:
                    yield current
                current = list(row)
            elif current is not None:
                current.extend(row)
            else:
                self.error(row[0], f"unknown directive {head!r}")
        if current:
            yield current

    def _split_groups(self, toks: list[_Tok]):
        """Split a statement's tail on ':' tokens: [kw, g1, g2, ...]."""
        groups = [[]]
        for t in toks:
            if t.text == ":":
                groups.append([])
            else:
                groups[-1].append(t)
        return groups

    def _resolve(self, tok: _Tok, kind: str):
        """Label, integer index, or '*' over a declared name list."""
        labels = self.names.get(kind)
        if labels is None:
            self.error(tok, f"{kind} used before being declared")
            return None
        if tok.text == "*":
            return range(len(labels))
        if tok.text in labels:
            return [labels.index(tok.text)]
        if tok.text.isdigit() and int(tok.text) < len(labels):
            return [int(tok.text)]
        self.error(tok, f"unknown {kind[:-1]} label {tok.text!r}")
        return None

    def _declare(self, kind: str, toks: list[_Tok], kw: _Tok):
        if not toks:
            self.error(kw, f"{kind}: needs a count or labels")
            return
        if len(toks) == 1 and toks[0].text.isdigit():
            labels = [str(i) for i in range(int(toks[0].text))]
        else:
            labels = [t.text for t in toks]
        if len(set(labels)) != len(labels):
            self.error(toks[0], f"duplicate {kind} labels")
        if not labels:
            self.error(kw, f"{kind}: empty declaration")
            return
        self.names[kind] = labels
        self.n[kind] = len(labels)

    def _alloc(self):
        if self.trans is None and all(self.n.values()):
            a, s, o = self.n["actions"], self.n["states"], self.n["observations"]
            self.trans = np.zeros((a, s, s))
            self.obs = np.zeros((a, s, o))
            self.rewards = np.zeros((a, s, s, o))

    # -- sections ------------------------------------------------------------

    def _floats(self, toks: list[_Tok], want: int, kw: _Tok):
        if len(toks) != want:
            self.error(
                toks[0] if toks else kw,
                f"expected {want} numbers, found {len(toks)}",
            )
            return None
        vals = []
        for t in toks:
            if not _is_float(t.text):
                self.error(t, f"not a number: {t.text!r}")
                return None
            vals.append(float(t.text))
        return vals

    def _fill_matrix(self, kw: _Tok, target, acts, data: list[_Tok], n_rows, n_cols):
        if len(data) == 1 and data[0].text in ("uniform", "identity"):
            word = data[0].text
            if word == "identity":
                if n_rows != n_cols:
                    self.error(data[0], "identity needs a square matrix")
                    return
                block = np.eye(n_rows)
            else:
                block = np.full((n_rows, n_cols), 1.0 / n_cols)
        else:
            vals = self._floats(data, n_rows * n_cols, kw)
            if vals is None:
                return
            block = np.array(vals).reshape(n_rows, n_cols)
        for a in acts:
            target[a] = block
            for i in range(n_rows):
                self.row_source[(id(target), a, i)] = kw.line

    def _fill_row(self, kw: _Tok, target, acts, rows, data: list[_Tok], n_cols):
        if len(data) == 1 and data[0].text == "uniform":
            vals = [1.0 / n_cols] * n_cols
        else:
            vals = self._floats(data, n_cols, kw)
            if vals is None:
                return
        for a in acts:
            for i in rows:
                target[a, i] = vals
                self.row_source[(id(target), a, i)] = kw.line

    def _section_T(self, kw, groups):
        self._alloc()
        if self.trans is None:
            self.error(kw, "T: before states/actions/observations are declared")
            return
        s = self.n["states"]
        if len(groups) < 2 or not groups[1]:
            self.error(kw, "T: needs an action")
            return
        acts = self._resolve(groups[1][0], "actions")
        if acts is None:
            return
        trailing = groups[1][1:]
        if len(groups) == 2:
            self._fill_matrix(kw, self.trans, acts, trailing, s, s)
        elif len(groups) == 3:
            rows = self._resolve(groups[2][0], "states") if groups[2] else None
            if rows is None:
                self.error(kw, "T: missing source state")
                return
            self._fill_row(kw, self.trans, acts, rows, groups[2][1:] + trailing, s)
        elif len(groups) == 4:
            if not groups[2] or not groups[3]:
                self.error(kw, "T: malformed single-entry form")
                return
            rows = self._resolve(groups[2][0], "states")
            cols = self._resolve(groups[3][0], "states")
            vals = self._floats(groups[3][1:] + trailing, 1, kw)
            if rows is None or cols is None or vals is None:
                return
            for a in acts:
                for i in rows:
                    for j in cols:
                        self.trans[a, i, j] = vals[0]
                        self.row_source[(id(self.trans), a, i)] = kw.line
        else:
            self.error(kw, "T: too many ':' groups")

    def _section_O(self, kw, groups):
        self._alloc()
        if self.obs is None:
            self.error(kw, "O: before states/actions/observations are declared")
            return
        s, o = self.n["states"], self.n["observations"]
        if len(groups) < 2 or not groups[1]:
            self.error(kw, "O: needs an action")
            return
        acts = self._resolve(groups[1][0], "actions")
        if acts is None:
            return
        trailing = groups[1][1:]
        if len(groups) == 2:
            self._fill_matrix(kw, self.obs, acts, trailing, s, o)
        elif len(groups) == 3:
            rows = self._resolve(groups[2][0], "states") if groups[2] else None
            if rows is None:
                self.error(kw, "O: missing end state")
                return
            self._fill_row(kw, self.obs, acts, rows, groups[2][1:] + trailing, o)
        elif len(groups) == 4:
            if not groups[2] or not groups[3]:
                self.error(kw, "O: malformed single-entry form")
                return
            rows = self._resolve(groups[2][0], "states")
            cols = self._resolve(groups[3][0], "observations")
            vals = self._floats(groups[3][1:] + trailing, 1, kw)
            if rows is None or cols is None or vals is None:
                return
            for a in acts:
                for j in rows:
                    for ob in cols:
                        self.obs[a, j, ob] = vals[0]
                        self.row_source[(id(self.obs), a, j)] = kw.line
        else:
            self.error(kw, "O: too many ':' groups")

    def _section_R(self, kw, groups):
        self._alloc()
        if self.rewards is None:
            self.error(kw, "R: before states/actions/observations are declared")
            return
        s, o = self.n["states"], self.n["observations"]
        if len(groups) < 3 or not groups[1] or not groups[2]:
            self.error(kw, "R: needs at least an action and a start state")
            return
        acts = self._resolve(groups[1][0], "actions")
        starts = self._resolve(groups[2][0], "states")
        if acts is None or starts is None:
            return
        if len(groups) == 3:
            data = groups[2][1:]
            vals = self._floats(data, s * o, kw)
            if vals is None:
                return
            block = np.array(vals).reshape(s, o)
            for a in acts:
                for i in starts:
                    self.rewards[a, i] = block
        elif len(groups) == 4:
            ends = self._resolve(groups[3][0], "states")
            if ends is None:
                return
            vals = self._floats(groups[3][1:], o, kw)
            if vals is None:
                return
            for a in acts:
                for i in starts:
                    for j in ends:
                        self.rewards[a, i, j] = vals
        elif len(groups) == 5:
            ends = self._resolve(groups[3][0], "states")
            obses = self._resolve(groups[4][0], "observations") if groups[4] else None
            vals = self._floats(groups[4][1:], 1, kw) if groups[4] else None
            if ends is None or obses is None or vals is None:
                return
            for a in acts:
                for i in starts:
                    for j in ends:
                        for ob in obses:
                            self.rewards[a, i, j, ob] = vals[0]
        else:
            self.error(kw, "R: too many ':' groups")

    def _preamble(self, kw: _Tok, toks: list[_Tok]):
        name = kw.text
        if name == "discount":
            if len(toks) != 1 or not _is_float(toks[0].text):
                self.error(kw, "discount: needs one number")
                return
            val = float(toks[0].text)
            if not 0.0 <= val <= 1.0:
                self.error(toks[0], f"discount {val} outside [0, 1]")
                return
            self.discount = val
        elif name == "values":
            if len(toks) != 1 or toks[0].text not in ("reward", "cost"):
                self.error(kw, "values: must be 'reward' or 'cost'")
                return
            self.values_sign = -1.0 if toks[0].text == "cost" else 1.0
        elif name in ("states", "actions", "observations"):
            self._declare(name, toks, kw)
        elif name == "start":
            s = self.n["states"]
            if s == 0:
                self.error(kw, "start: before states are declared")
                return
            texts = [t.text for t in toks]
            if texts == ["uniform"]:
                self.start = np.full(s, 1.0 / s)
            elif len(texts) == 1 and not _is_float(texts[0]):
                idx = self._resolve(toks[0], "states")
                if idx is None:
                    return
                self.start = np.zeros(s)
                self.start[list(idx)] = 1.0 / len(list(idx))
            else:
                vals = self._floats(toks, s, kw)
                if vals is None:
                    return
                self.start = np.array(vals)

    def parse(self) -> ParseResult:
        for stmt in self._statements():
            kw = stmt[0]
            tail = stmt[1:]
            if tail and tail[0].text == ":":
                tail = tail[1:]
            if kw.text in _PREAMBLE:
                flat = [t for t in tail if t.text != ":"]
                self._preamble(kw, flat)
            else:
                groups = self._split_groups(stmt)
                handler = {"T": self._section_T, "O": self._section_O,
                           "R": self._section_R}[kw.text]
                handler(kw, groups)
        missing = [k for k, v in self.n.items() if v == 0]
        if missing:
            self.error(None, f"missing declarations: {', '.join(missing)}")
        if self.diags and any(d.severity == "error" for d in self.diags):
            return ParseResult(None, self.diags, self.start)
        model = self._finalize()
        if model is None:
            return ParseResult(None, self.diags, self.start)
        return ParseResult(model, self.diags, self.start)

    def _finalize(self) -> PomdpModel | None:
        a_n, s_n = self.n["actions"], self.n["states"]
        for a in range(a_n):
            for i in range(s_n):
                for arr, label in ((self.trans, "T"), (self.obs, "O")):
                    row = arr[a, i]
                    total = float(row.sum())
                    line = self.row_source.get((id(arr), a, i), 1)
                    if np.any(row < -PROB_ATOL):
                        self.error(
                            None,
                            f"{label} row ({self.names['actions'][a]}, "
                            f"{self.names['states'][i]}) has negative entries",
                            line=line,
                        )
                    elif abs(total - 1.0) > PROB_ATOL:
                        self.error(
                            None,
                            f"{label} row ({self.names['actions'][a]}, "
                            f"{self.names['states'][i]}) sums to {total:.12g}, not 1",
                            line=line,
                        )
                    else:
                        arr[a, i] = np.clip(row, 0.0, None) / total
        if any(d.severity == "error" for d in self.diags):
            return None
        # collapse R(a, i, j, o) by expectation into w(a, i)
        exp_over_obs = np.einsum("ajo,aijo->aij", self.obs, self.rewards)
        w = self.values_sign * np.einsum("aij,aij->ai", self.trans, exp_over_obs)
        model = PomdpModel(
            states=tuple(self.names["states"]),
            actions=tuple(self.names["actions"]),
            observations=tuple(self.names["observations"]),
            trans=self.trans,
            obs=self.obs,
            reward=w,
            discount=self.discount,
        )
        leftovers = validate_model(model)
        for msg in leftovers:
            self.error(None, msg)
        return None if leftovers else model


def parse_pomdp(text: str) -> ParseResult:
    """Parse ``.pomdp`` text into a validated model plus diagnostics."""
    return _Parser(text).parse()


# -- sidecar -------------------------------------------------------------------


def parse_constraint_sidecar(text: str, model: PomdpModel) -> SidecarResult:
    """Parse the constraint sidecar against a companion model.

    Directives: ``budget: <float>``; ``cost: <action|*> : <state|*> <float>``;
    ``terminal: <state|*> <float>``; ``delta: uniform | point <k> |
    weights <floats>``.  Costs and terminal rewards default to zero; delta
    defaults to uniform over the eventual grid; ``budget`` is required.
    """
    diags: list[ParseDiagnostic] = []
    cost = np.zeros((model.n_actions, model.n_states))
    terminal = np.zeros(model.n_states)
    terminal_seen = False
    budget = None
    delta = DeltaSpec.uniform()

    def err(tok, msg):
        diags.append(ParseDiagnostic(tok.line, tok.col, "error", msg))

    def resolve(tok, labels, what):
        if tok.text == "*":
            return range(len(labels))
        if tok.text in labels:
            return [labels.index(tok.text)]
        if tok.text.isdigit() and int(tok.text) < len(labels):
            return [int(tok.text)]
        err(tok, f"unknown {what} label {tok.text!r}")
        return None

    for row in _tokenize(text):
        if not row:
            continue
        kw = row[0]
        tail = row[1:]
        if tail and tail[0].text == ":":
            tail = tail[1:]
        if kw.text == "budget":
            if len(tail) != 1 or not _is_float(tail[0].text):
                err(kw, "budget: needs one number")
                continue
            val = float(tail[0].text)
            if val < 0:
                err(tail[0], f"budget must be >= 0, got {val}")
                continue
            budget = val
        elif kw.text == "cost":
            groups = [[]]
            for t in tail:
                if t.text == ":":
                    groups.append([])
                else:
                    groups[-1].append(t)
            if len(groups) != 2 or not groups[0] or len(groups[1]) != 2:
                err(kw, "cost: expects '<action|*> : <state|*> <value>'")
                continue
            acts = resolve(groups[0][0], model.actions, "action")
            states = resolve(groups[1][0], model.states, "state")
            if acts is None or states is None:
                continue
            if not _is_float(groups[1][1].text):
                err(groups[1][1], f"not a number: {groups[1][1].text!r}")
                continue
            val = float(groups[1][1].text)
            for a in acts:
                for i in states:
                    cost[a, i] = val
        elif kw.text == "terminal":
            if len(tail) != 2:
                err(kw, "terminal: expects '<state|*> <value>'")
                continue
            states = resolve(tail[0], model.states, "state")
            if states is None:
                continue
            if not _is_float(tail[1].text):
                err(tail[1], f"not a number: {tail[1].text!r}")
                continue
            for i in states:
                terminal[i] = float(tail[1].text)
            terminal_seen = True
        elif kw.text == "delta":
            if not tail:
                err(kw, "delta: expects uniform | point <k> | weights <floats>")
                continue
            mode = tail[0].text
            if mode == "uniform" and len(tail) == 1:
                delta = DeltaSpec.uniform()
            elif mode == "point" and len(tail) == 2 and tail[1].text.isdigit():
                delta = DeltaSpec.point(int(tail[1].text))
            elif mode == "weights" and len(tail) > 1:
                if not all(_is_float(t.text) for t in tail[1:]):
                    err(tail[1], "delta weights must be numbers")
                    continue
                w = np.array([float(t.text) for t in tail[1:]])
                if np.any(w < 0) or abs(w.sum() - 1.0) > PROB_ATOL:
                    err(tail[1], "delta weights must be a probability vector")
                    continue
                delta = DeltaSpec.from_weights(w)
            else:
                err(kw, f"malformed delta directive {mode!r}")
        else:
            err(kw, f"unknown sidecar directive {kw.text!r}")

    if budget is None:
        diags.append(ParseDiagnostic(1, 1, "error", "missing required 'budget:' line"))
    if any(d.severity == "error" for d in diags):
        return SidecarResult(None, diags)
    spec = ConstraintSpec(
        cost=cost, budget=budget, delta=delta,
        terminal=terminal if terminal_seen else None,
    )
    return SidecarResult(spec, diags)


# -- serialization --------------------------------------------------------------


def _fmt(x: float) -> str:
    return repr(float(x))


def serialize_model(model: PomdpModel, start=None, name: str = "model") -> str:
    """Emit ``.pomdp`` text that parses back to an entry-wise equal model.

    Uniform/identity blocks use their keywords; everything else is written
    with full-precision floats.  The optional ``start`` belief becomes a
    ``start:`` line.
    """
    out = [f"# {name}"]
    out.append(f"discount: {_fmt(model.discount)}")
    out.append("values: reward")
    out.append("states: " + " ".join(model.states))
    out.append("actions: " + " ".join(model.actions))
    out.append("observations: " + " ".join(model.observations))
    if start is not None:
        out.append("start: " + " ".join(_fmt(v) for v in np.asarray(start)))
    s = model.n_states
    for a, label in enumerate(model.actions):
        block = model.trans[a]
        out.append("")
        if np.array_equal(block, np.eye(s)):
            out.append(f"T: {label} identity")
        elif np.all(block == 1.0 / s):
            out.append(f"T: {label} uniform")
        else:
            out.append(f"T: {label}")
            for i in range(s):
                out.append(" ".join(_fmt(v) for v in block[i]))
    for a, label in enumerate(model.actions):
        block = model.obs[a]
        out.append("")
        if np.all(block == 1.0 / model.n_observations):
            out.append(f"O: {label} uniform")
        else:
            out.append(f"O: {label}")
            for i in range(s):
                out.append(" ".join(_fmt(v) for v in block[i]))
    out.append("")
    for a, label in enumerate(model.actions):
        for i in range(s):
            w = model.reward[a, i]
            if w != 0.0:
                out.append(f"R: {label} : {model.states[i]} : * : * {_fmt(w)}")
    return "\n".join(out) + "\n"


def serialize_constraint_sidecar(model: PomdpModel, spec: ConstraintSpec) -> str:
    """Sidecar text for a constraint spec (costs, budget, terminal, delta)."""
    out = ["# constraints"]
    out.append(f"budget: {_fmt(spec.budget)}")
    for a, label in enumerate(model.actions):
        row = spec.cost[a]
        if np.all(row == row[0]):
            if row[0] != 0.0:
                out.append(f"cost: {label} : * {_fmt(row[0])}")
        else:
            for i, state in enumerate(model.states):
                if row[i] != 0.0:
                    out.append(f"cost: {label} : {state} {_fmt(row[i])}")
    if spec.terminal is not None:
        for i, state in enumerate(model.states):
            if spec.terminal[i] != 0.0:
                out.append(f"terminal: {state} {_fmt(spec.terminal[i])}")
    d = spec.delta
    if d.kind == "uniform":
        out.append("delta: uniform")
    elif d.kind == "point":
        out.append(f"delta: point {d.index}")
    else:
        out.append("delta: weights " + " ".join(_fmt(v) for v in d.weights))
    return "\n".join(out) + "\n"
