"""Integer-programming model of multi-item retrieval, written as CPLEX-LP text.

Positions are numbered row-major, ``p = row * n + col``. Variables:

    x_p_k      cell p holds a load after move k
    y_p_r_k    desired item r sits at p after move k
    z_p_q_k    the load at p slides into the empty cell q at move k
    w_p_q_r_k  that load is desired item r
    f_k        some move happens at timestamp k (simultaneous mode only)

Move variables exist only for 4-adjacent ordered pairs; the adjacency
constraint would force every other pair to zero anyway. Row names carry
their constraint family number (``c5_...``) so a solver log can be mapped
back to ``validate_solution`` messages.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Iterable, Iterator, Mapping, Sequence

from .grid import MoveRecord, PbsState, Position
from .instances import Instance
from .plan import InvalidPlan, Plan, replay

TOL = 1e-6


class Mode(str, enum.Enum):
    SINGLE = "single"
    SIMULTANEOUS = "simultaneous"


class Violation(ValueError):
    """An assignment broke constraint family ``family`` at ``index``."""

    def __init__(self, family: str, index: tuple = (), detail: str = ""):
        self.family = family
        self.index = tuple(index)
        super().__init__(f"constraint {family} violated at {list(self.index)}" + (f": {detail}" if detail else ""))


@dataclass(frozen=True)
class ModelSpec:
    instance: Instance
    K: int
    mode: Mode = Mode.SINGLE

    def __post_init__(self):
        object.__setattr__(self, "mode", Mode(self.mode))
        if self.K < 0:
            raise ValueError("K must be non-negative")

    @property
    def cells(self) -> int:
        return self.instance.m * self.instance.n

    def pos(self, p: int) -> Position:
        return Position(*divmod(p, self.instance.n))

    def cell(self, pos) -> int:
        return pos[0] * self.instance.n + pos[1]

    def edges(self) -> list[tuple[int, int]]:
        """Directed adjacent pairs in ascending (p, q) order."""
        m, n = self.instance.m, self.instance.n
        out = []
        for p in range(m * n):
            r, c = divmod(p, n)
            for rr, cc in ((r - 1, c), (r, c - 1), (r, c + 1), (r + 1, c)):
                if 0 <= rr < m and 0 <= cc < n:
                    out.append((p, rr * n + cc))
        return out


def x(p, k): return f"x_{p}_{k}"
def y(p, r, k): return f"y_{p}_{r}_{k}"
def z(p, q, k): return f"z_{p}_{q}_{k}"
def w(p, q, r, k): return f"w_{p}_{q}_{r}_{k}"
def f(k): return f"f_{k}"


def variable_names(spec: ModelSpec) -> list[str]:
    inst, K = spec.instance, spec.K
    P, E = range(spec.cells), spec.edges()
    names = [x(p, k) for k in range(K + 1) for p in P]
    names += [y(p, r, k) for k in range(K + 1) for p in P for r in range(inst.d)]
    names += [z(p, q, k) for k in range(K + 1) for p, q in E]
    names += [w(p, q, r, k) for k in range(K + 1) for p, q in E for r in range(inst.d)]
    if spec.mode is Mode.SIMULTANEOUS:
        names += [f(k) for k in range(1, K + 1)]
    return names


# A linear row: (name, family, terms [(coef, var)], sense, rhs)
Row = tuple[str, str, list[tuple[int, str]], str, int]


def constraint_rows(spec: ModelSpec) -> Iterator[Row]:
    inst, K, d = spec.instance, spec.K, spec.instance.d
    P, E = range(spec.cells), spec.edges()
    occupied0 = set(P) - {spec.cell(p) for p in inst.escorts}
    item0 = {spec.cell(p): r for r, p in enumerate(inst.items)}
    out_e = {p: [q for a, q in E if a == p] for p in P}
    in_e = {p: [a for a, q in E if q == p] for p in P}

    for p in P:
        yield f"c1_{p}", "1", [(1, x(p, 0))], "=", int(p in occupied0)
    for p in P:
        for r in range(d):
            yield f"c2_{p}_{r}", "2", [(1, y(p, r, 0))], "=", int(item0.get(p) == r)
    for p, q in E:
        yield f"c3_{p}_{q}", "3", [(1, z(p, q, 0))], "=", 0
    for k in range(K + 1):
        yield f"c4_{k}", "4", [(1, x(p, k)) for p in P], "=", spec.cells - inst.e
    for k in range(1, K + 1):
        for p in P:
            terms = [(1, x(p, k - 1))] + [(-1, z(p, q, k)) for q in out_e[p]]
            terms += [(1, z(q, p, k)) for q in in_e[p]] + [(-1, x(p, k))]
            yield f"c5_{p}_{k}", "5", terms, "=", 0
    for k in range(K + 1):
        for p in P:
            for r in range(d):
                yield f"c6_{p}_{r}_{k}", "6", [(1, y(p, r, k)), (-1, x(p, k))], "<=", 0
    for k in range(K + 1):
        for r in range(d):
            yield f"c7_{r}_{k}", "7", [(1, y(p, r, k)) for p in P], "=", 1
    for k in range(K + 1):
        for p in P:
            yield f"c8_{p}_{k}", "8", [(1, y(p, r, k)) for r in range(d)], "<=", 1
    for k in range(1, K + 1):
        for p in P:
            for r in range(d):
                terms = [(1, y(p, r, k - 1))] + [(-1, w(p, q, r, k)) for q in out_e[p]]
                terms += [(1, w(q, p, r, k)) for q in in_e[p]] + [(-1, y(p, r, k))]
                yield f"c9_{p}_{r}_{k}", "9", terms, "=", 0
    for r, io in enumerate(inst.io):
        yield f"c10_{r}", "10", [(1, y(spec.cell(io), r, K))], "=", 1
    if K >= 1:
        for p, q in E:
            yield f"c11_{p}_{q}", "11", [(1, z(p, q, k)) for k in range(1, K + 1)], "<=", K
    for k in range(1, K + 1):
        for p, q in E:
            yield f"c12_{p}_{q}_{k}", "12", [(1, z(p, q, k)), (1, x(q, k - 1))], "<=", 1
    if spec.mode is Mode.SINGLE:
        for k in range(K + 1):
            yield f"c13_{k}", "13", [(1, z(p, q, k)) for p, q in E], "<=", 1
    for k in range(1, K + 1):
        for p, q in E:
            yield f"c14_{p}_{q}_{k}", "14", [(1, w(p, q, r, k)) for r in range(d)] + [(-1, z(p, q, k))], "<=", 0
    for k in range(1, K + 1):
        for p, q in E:
            for r in range(d):
                terms = [(1, w(p, q, r, k)), (-1, y(p, r, k - 1)), (-1, z(p, q, k))]
                yield f"c15_{p}_{q}_{r}_{k}", "15", terms, ">=", -1
    if spec.mode is Mode.SIMULTANEOUS:
        for k in range(1, K + 1):
            for p, q in E:
                yield f"cf_{p}_{q}_{k}", "f", [(1, f(k)), (-1, z(p, q, k))], ">=", 0


def objective_terms(spec: ModelSpec) -> list[str]:
    if spec.mode is Mode.SIMULTANEOUS:
        return [f(k) for k in range(1, spec.K + 1)]
    return [z(p, q, k) for k in range(spec.K + 1) for p, q in spec.edges()]


def _wrap(tokens: list[str], width: int = 8) -> list[str]:
    return ["   " + " ".join(tokens[i:i + width]) for i in range(0, len(tokens), width)]


def _expr(terms: Iterable[tuple[int, str]]) -> list[str]:
    toks = []
    for i, (c, v) in enumerate(terms):
        sign = "-" if c < 0 else "+"
        mag = "" if abs(c) == 1 else f"{abs(c)} "
        toks.append(f"{mag}{v}" if i == 0 and c > 0 else f"{sign} {mag}{v}")
    return toks


def export_lp(spec: ModelSpec) -> str:
    """The full model as CPLEX-LP text. Output is a pure function of ``spec``."""
    inst = spec.instance
    lines = [
        f"\\ multi-item retrieval model for {inst.id}",
        f"\\ grid {inst.m}x{inst.n}, d={inst.d}, e={inst.e}, K={spec.K}, mode={spec.mode.value}",
        "Minimize",
    ]
    obj = objective_terms(spec)
    obj_toks = _expr((1, v) for v in obj) if obj else ["0 " + x(0, 0)]
    lines.append(" obj:")
    lines.extend(_wrap(obj_toks))
    lines.append("Subject To")
    for name, _, terms, sense, rhs in constraint_rows(spec):
        toks = _expr(terms)
        if len(toks) <= 8:
            lines.append(f" {name}: {' '.join(toks)} {sense} {rhs}")
        else:
            lines.append(f" {name}:")
            lines.extend(_wrap(toks))
            lines.append(f"   {sense} {rhs}")
    lines.append("Binaries")
    lines.extend(_wrap(variable_names(spec), 10))
    lines.append("End")
    return "\n".join(lines) + "\n"


def count_declared(lp_text: str, prefix: str) -> int:
    """Number of variables starting with ``prefix`` declared in the Binaries section."""
    body = lp_text.split("Binaries", 1)[1].split("End", 1)[0]
    return sum(1 for tok in body.split() if tok.startswith(prefix))


def parse_solution(text: str) -> dict[str, float]:
    """Whitespace-separated ``name value`` pairs; ``#`` starts a comment."""
    out = {}
    for line in text.splitlines():
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 2:
            raise ValueError(f"bad solution line {line!r}")
        out[parts[0]] = float(parts[1])
    return out


def _binary(assignment: Mapping[str, float], spec: ModelSpec) -> dict[str, int]:
    known = set(variable_names(spec))
    vals = {}
    for name, v in assignment.items():
        if name not in known:
            if name.startswith(("z_", "w_")) and abs(v) > TOL:
                idx = tuple(int(t) for t in name.split("_")[1:3])
                raise Violation("11", idx, f"{name} moves between non-adjacent cells")
            continue
        iv = round(v)
        if abs(v - iv) > TOL or iv not in (0, 1):
            raise Violation("16", (name,), f"value {v} is not binary")
        vals[name] = iv
    for name in known:
        vals.setdefault(name, 0)
    return vals


def validate_solution(spec: ModelSpec, assignment: Mapping[str, float]) -> Plan:
    """Check every constraint family and decode the move sequence.

    Missing variables count as zero. Raises Violation for the first broken
    row (families checked in row-emission order), otherwise returns the
    plan decoded from the move variables after confirming it replays.
    """
    vals = _binary(assignment, spec)
    for name, family, terms, sense, rhs in constraint_rows(spec):
        lhs = sum(c * vals[v] for c, v in terms)
        ok = lhs == rhs if sense == "=" else (lhs <= rhs if sense == "<=" else lhs >= rhs)
        if not ok:
            idx = tuple(int(t) for t in name.split("_")[1:])
            raise Violation(family, idx, f"{name}: lhs {lhs} {sense} {rhs}")
    state = spec.instance.state()
    moves = []
    for k in range(1, spec.K + 1):
        for p, q in spec.edges():
            if vals[z(p, q, k)]:
                # the load slides p -> q, so the escort travels q -> p
                src, dst = spec.pos(q), spec.pos(p)
                mv = MoveRecord(src, dst, state.escort_at(src), state.item_at(dst))
                state = replay(state, [mv])[-1]
                moves.append(mv)
    plan = Plan(spec.instance.id, moves)
    if not state.is_terminal():
        raise InvalidPlan("decoded moves do not finish the instance")
    return plan


def plan_to_assignment(spec: ModelSpec, plan: Plan) -> dict[str, int]:
    """Encode a single-load plan as a full 0/1 assignment (one move per step, idle steps after)."""
    return groups_to_assignment(spec, [[mv] for mv in plan.moves])


def groups_to_assignment(spec: ModelSpec, groups: Sequence[Sequence[MoveRecord]]) -> dict[str, int]:
    """Encode timestamp groups of mutually independent moves, one group per step."""
    if len(groups) > spec.K:
        raise ValueError(f"{len(groups)} steps do not fit in K = {spec.K}")
    vals = {name: 0 for name in variable_names(spec)}
    state = spec.instance.state()
    _fill_state(spec, vals, state, 0)
    for k in range(1, spec.K + 1):
        group = groups[k - 1] if k <= len(groups) else []
        for mv in group:
            p, q = spec.cell(mv.escort_to), spec.cell(mv.escort_from)
            vals[z(p, q, k)] = 1
            if mv.moved_item is not None:
                vals[w(p, q, mv.moved_item, k)] = 1
        if group and spec.mode is Mode.SIMULTANEOUS:
            vals[f(k)] = 1
        state = replay(state, group)[-1]
        _fill_state(spec, vals, state, k)
    return vals


def _fill_state(spec: ModelSpec, vals: dict, st: PbsState, k: int) -> None:
    escorts = {spec.cell(p) for p in st.escorts}
    for p in range(spec.cells):
        vals[x(p, k)] = int(p not in escorts)
    for r, pos in enumerate(st.items):
        vals[y(spec.cell(pos), r, k)] = 1


def format_assignment(vals: Mapping[str, int]) -> str:
    return "".join(f"{name} {v}\n" for name, v in vals.items())


def default_K(instance: Instance, fit=None) -> int:
    """Regression estimate of the optimum plus 25%, at least one move."""
    from .prediction import REFERENCE_FIT, predict

    fit = fit or REFERENCE_FIT
    s = instance.state()
    total = sum(abs(a[0] - b[0]) + abs(a[1] - b[1]) for a, b in zip(s.items, s.io))
    if total == 0:
        return 0
    return max(1, math.ceil(1.25 * predict(fit, total, instance.e, max(instance.m, instance.n))))
