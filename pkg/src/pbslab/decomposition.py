"""Sliding-window decomposition for grids too large to solve directly.

Each iteration sweeps a window over the grid from the bottom row band
upward and left to right, stops at the first window holding an item that
can make progress, gives every desired item inside a *virtual* I/O cell on
the window boundary closest to its real I/O, pulls in outside escorts when
the window has too few, and solves the window as a small instance.
"""

from __future__ import annotations

import csv
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .grid import MoveRecord, PbsState, Position, apply_move, manhattan
from .heuristics import Failed, greedy_rollout
from .instances import Instance, elimination_bound
from .plan import Plan, SolveFailed, replay

SubSolver = Callable[[Instance, np.random.Generator], Plan]


class IterationLimit(SolveFailed):
    pass


class NoWindow(SolveFailed):
    pass


@dataclass
class DecompConfig:
    window: tuple[int, int] = (5, 5)
    strides: tuple[int, ...] = (1, 2)
    e_min: int = 1
    max_iterations: int = 200
    sub_solver: str = "greedy"
    sub_attempts: int = 5
    seed: int = 0


@dataclass(frozen=True)
class Window:
    origin: Position
    h: int
    w: int

    def contains(self, p: Sequence[int]) -> bool:
        return (self.origin[0] <= p[0] < self.origin[0] + self.h
                and self.origin[1] <= p[1] < self.origin[1] + self.w)

    def cells(self) -> list[Position]:
        r0, c0 = self.origin
        return [Position(r, c) for r in range(r0, r0 + self.h) for c in range(c0, c0 + self.w)]

    def boundary(self) -> list[Position]:
        r0, c0 = self.origin
        return [p for p in self.cells()
                if p[0] in (r0, r0 + self.h - 1) or p[1] in (c0, c0 + self.w - 1)]

    def to_local(self, p: Sequence[int]) -> Position:
        return Position(p[0] - self.origin[0], p[1] - self.origin[1])

    def to_global(self, p: Sequence[int]) -> Position:
        return Position(p[0] + self.origin[0], p[1] + self.origin[1])


@dataclass
class WindowProblem:
    window: Window
    sub: Instance
    item_ids: list[int]
    escort_ids: list[int]
    virtual_io: dict[int, Position]
    transferred: list[tuple[int, list[MoveRecord]]] = field(default_factory=list)


@dataclass
class TraceRow:
    iteration: int
    origin: Position
    stride: int
    items: list[int]
    transferred: list[int]
    unused: list[int]
    sub_objective: int
    recorded: int


@dataclass
class DecompResult:
    plan: Plan
    physical: list[MoveRecord]
    trace: list[TraceRow]
    seed: int

    @property
    def objective(self) -> int:
        return self.plan.objective


def window_shape(state: PbsState, config: DecompConfig) -> tuple[int, int]:
    return min(config.window[0], state.m), min(config.window[1], state.n)


def _origins(m: int, n: int, h: int, w: int, stride: int) -> list[Position]:
    rows = list(range(m - h, -1, -stride))
    if rows[-1] != 0:
        rows.append(0)
    cols = list(range(0, n - w + 1, stride))
    if cols[-1] != n - w:
        cols.append(n - w)
    return [Position(r, c) for r in rows for c in cols]


def assign_virtual_io(window: Window, item: Sequence[int], true_io: Sequence[int],
                      taken: Sequence[Position] = ()) -> Position:
    """Boundary cell nearest ``true_io`` (row-major on ties); ``true_io`` itself when inside.

    The item's own cell wins a tie so an item already as close as the window
    allows is left in place. Cells in ``taken`` are skipped.
    """
    true_io = Position(*true_io)
    if window.contains(true_io):
        return true_io
    item = Position(*item)
    cands = [p for p in window.boundary() if p not in taken]
    best = min(manhattan(p, true_io) for p in cands)
    if item in cands and manhattan(item, true_io) == best:
        return item
    return min(p for p in cands if manhattan(p, true_io) == best)


def _virtual_ios(state: PbsState, window: Window, ids: list[int]) -> dict[int, Position]:
    out: dict[int, Position] = {}
    # items whose target is fixed (real I/O inside the window) claim their cells first
    fixed = [r for r in ids if window.contains(state.io[r])]
    for r in fixed:
        out[r] = state.io[r]
    for r in ids:
        if r not in out:
            out[r] = assign_virtual_io(window, state.items[r], state.io[r], list(out.values()))
    return out


def select_window(state: PbsState, config: DecompConfig, rng: np.random.Generator) -> tuple[Window, int]:
    """First window in the sweep holding an undelivered item not yet at its virtual I/O."""
    h, w = window_shape(state, config)
    stride = int(rng.choice(config.strides))
    for s in (stride, 1):
        for origin in _origins(state.m, state.n, h, w, s):
            win = Window(origin, h, w)
            ids = [r for r in range(state.d) if win.contains(state.items[r])]
            if not any(state.items[r] != state.io[r] for r in ids):
                continue
            vio = _virtual_ios(state, win, ids)
            if any(state.items[r] != vio[r] for r in ids):
                return win, s
    raise NoWindow(0, "no window lets an undelivered item make progress")


def _transfer_path(state: PbsState, start: Position, window: Window, avoid: set) -> Optional[list[Position]]:
    """Shortest cell path from an outside escort to a free window cell, avoiding ``avoid``."""
    blocked = avoid | set(state.items)
    prev = {start: None}
    queue = deque([start])
    while queue:
        cur = queue.popleft()
        if cur != start and window.contains(cur):
            path = [cur]
            while prev[path[-1]] is not None:
                path.append(prev[path[-1]])
            return path[::-1]
        for dr, dc in ((-1, 0), (1, 0), (0, -1), (0, 1)):
            nxt = Position(cur[0] + dr, cur[1] + dc)
            if state.in_bounds(nxt) and nxt not in prev and nxt not in blocked:
                prev[nxt] = cur
                queue.append(nxt)
    return None


def _walk(state: PbsState, escort_id: int, path: list[Position]) -> tuple[PbsState, list[MoveRecord]]:
    moves = []
    for a, b in zip(path, path[1:]):
        mv = MoveRecord(a, b, escort_id, state.item_at(b))
        state = apply_move(state, mv)
        moves.append(mv)
    return state, moves


def build_window_problem(state: PbsState, window: Window, e_min: int,
                         only: Optional[int] = None) -> tuple[WindowProblem, PbsState]:
    """Transfer escorts until ``e_min`` sit in the window, then cut out the sub-instance.

    Paths avoid desired items, current escorts and every escort's cell at
    the start of the iteration, so dropping the moves of an escort that is
    later sent back never invalidates another escort's path. With ``only``
    the sub-instance routes that single item and the others are plain stock.
    """
    home = set(state.escorts)
    transferred = []
    inside = [k for k, p in enumerate(state.escorts) if window.contains(p)]
    while len(inside) < e_min:
        best = None
        for k, p in enumerate(state.escorts):
            if k in inside:
                continue
            path = _transfer_path(state, p, window, home | set(state.escorts) - {p})
            if path is not None and (best is None or len(path) < len(best[1])):
                best = (k, path)
        if best is None:
            break
        k, path = best
        state, moves = _walk(state, k, path)
        transferred.append((k, moves))
        inside.append(k)
    ids = [r for r in range(state.d) if window.contains(state.items[r])]
    vio = _virtual_ios(state, window, ids)
    if only is not None:
        ids, vio = [only], {only: vio[only]}
    sub = Instance(
        f"window-{window.origin[0]}-{window.origin[1]}", window.h, window.w,
        [window.to_local(state.items[r]) for r in ids],
        [window.to_local(state.escorts[k]) for k in inside],
        [window.to_local(vio[r]) for r in ids],
    )
    return WindowProblem(window, sub, ids, inside, vio, transferred), state


RESCUE_BUDGET = 2_000_000
# exact window solves above this many states take minutes in pure Python
ORACLE_WINDOW_BUDGET = 5_000_000


def greedy_sub_solver(attempts: int = 5, rescue_budget: Optional[int] = RESCUE_BUDGET) -> SubSolver:
    """Shortest of several guided rollouts within four times the window's elimination bound.

    When every rollout fails and the window's state space is at most
    ``rescue_budget``, the window is solved exactly instead.
    """
    from .oracle import SearchTooLarge, bfs_optimal

    def solve(sub: Instance, rng: np.random.Generator) -> Plan:
        cap = 4 * elimination_bound(max(sub.m, sub.n), sub.d)
        best = None
        for _ in range(attempts):
            try:
                plan = greedy_rollout(sub, cap, rng)
            except Failed:
                continue
            if best is None or plan.objective < best.objective:
                best = plan
                cap = plan.objective
        if best is None:
            if rescue_budget:
                try:
                    return bfs_optimal(sub, budget=rescue_budget)
                except SearchTooLarge:
                    pass
            raise Failed(cap, "guided rollouts failed on the window")
        return best
    return solve


def oracle_sub_solver(budget: Optional[int] = None, fallback: Optional[SubSolver] = None) -> SubSolver:
    """Exact window plans; windows whose state space exceeds ``budget`` go to ``fallback``."""
    from .oracle import DEFAULT_BUDGET, SearchTooLarge, bfs_optimal

    budget = DEFAULT_BUDGET if budget is None else budget

    def solve(sub: Instance, rng: np.random.Generator) -> Plan:
        try:
            return bfs_optimal(sub, budget=budget)
        except SearchTooLarge:
            if fallback is None:
                raise
            return fallback(sub, rng)
    return solve


def rl_sub_solver(agent, fallback: Optional[SubSolver] = None) -> SubSolver:
    """Greedy policy of a window-sized agent; other window shapes go to ``fallback``."""
    from .rl.agent import policy_rollout

    fallback = fallback or greedy_sub_solver()

    def solve(sub: Instance, rng: np.random.Generator) -> Plan:
        if (sub.m, sub.n, sub.d, sub.e) != (agent.m, agent.n, agent.d, agent.e):
            return fallback(sub, rng)
        try:
            return policy_rollout(agent, sub)
        except Failed:
            return fallback(sub, rng)
    return solve


def make_sub_solver(kind: str, agent=None, attempts: int = 5) -> SubSolver:
    kind = kind.lower()
    if kind == "greedy":
        return greedy_sub_solver(attempts)
    if kind == "oracle":
        return oracle_sub_solver(ORACLE_WINDOW_BUDGET, greedy_sub_solver(attempts))
    if kind == "rl":
        if agent is None:
            raise ValueError("the rl sub-solver needs a trained agent")
        return rl_sub_solver(agent, greedy_sub_solver(attempts))
    raise ValueError(f"unknown sub-solver {kind!r}")


def decompose_solve(instance: Instance, config: DecompConfig, sub_solver: Optional[SubSolver] = None,
                    seed: Optional[int] = None) -> DecompResult:
    """Solve ``instance`` window by window.

    The returned plan holds the recorded moves; ``physical`` additionally
    contains the transfer and return moves of escorts the window solution
    never used.
    """
    seed = config.seed if seed is None else seed
    rng = np.random.default_rng(seed)
    solver = sub_solver or make_sub_solver(config.sub_solver, attempts=config.sub_attempts)
    state = instance.state()
    recorded: list[MoveRecord] = []
    physical: list[MoveRecord] = []
    trace: list[TraceRow] = []
    it = 0
    while not state.is_terminal():
        if it >= config.max_iterations:
            raise IterationLimit(config.max_iterations, f"not solved after {it} window iterations")
        window, stride = select_window(state, config, rng)
        before = state
        prob, state = build_window_problem(before, window, config.e_min)
        try:
            sub_plan = solver(prob.sub, rng)
        except SolveFailed:
            # too hard jointly: route the first item that can still move closer
            r = next(r for r in prob.item_ids
                     if state.items[r] != prob.virtual_io[r] and state.items[r] != state.io[r])
            prob, state = build_window_problem(before, window, config.e_min, only=r)
            sub_plan = solver(prob.sub, rng)
        used = {prob.escort_ids[mv.escort_id] for mv in sub_plan.moves}
        unused = [k for k, _ in prob.transferred if k not in used]
        for k, moves in prob.transferred:
            physical.extend(moves)
            if k in used:
                recorded.extend(moves)
        for mv in sub_plan.moves:
            to = window.to_global(mv.escort_to)
            g = MoveRecord(window.to_global(mv.escort_from), to, prob.escort_ids[mv.escort_id],
                           state.item_at(to))
            state = apply_move(state, g)
            physical.append(g)
            recorded.append(g)
        # unused escorts go home in reverse transfer order
        for k, moves in reversed(prob.transferred):
            if k in used:
                continue
            for mv in reversed(moves):
                back = MoveRecord(mv.escort_to, mv.escort_from, k, state.item_at(mv.escort_from))
                state = apply_move(state, back)
                physical.append(back)
        trace.append(TraceRow(it, window.origin, stride, prob.item_ids, [k for k, _ in prob.transferred],
                              unused, sub_plan.objective, len(recorded)))
        it += 1
    return DecompResult(Plan(instance.id, recorded), physical, trace, seed)


def decompose_best(instance: Instance, config: DecompConfig, runs: int = 3,
                   sub_solver: Optional[SubSolver] = None) -> DecompResult:
    """Best of ``runs`` decompositions with consecutive seeds; raises if every run fails."""
    best, last_err = None, None
    for i in range(runs):
        try:
            res = decompose_solve(instance, config, sub_solver, seed=config.seed + i)
        except SolveFailed as exc:
            last_err = exc
            continue
        if best is None or res.objective < best.objective:
            best = res
    if best is None:
        raise last_err
    return best


def failure_budget(instance: Instance) -> int:
    return elimination_bound(max(instance.m, instance.n), instance.d)


def check_result(instance: Instance, result: DecompResult) -> None:
    """Both the recorded plan and the physical sequence must replay to terminal."""
    start = instance.state()
    for label, moves in (("recorded", result.plan.moves), ("physical", result.physical)):
        if not replay(start, moves)[-1].is_terminal():
            raise AssertionError(f"{label} moves do not finish the instance")


def write_trace(trace: Sequence[TraceRow], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["iteration", "origin_row", "origin_col", "stride", "items", "transferred", "unused",
                    "sub_objective", "recorded_total"])
        for t in trace:
            w.writerow([t.iteration, t.origin[0], t.origin[1], t.stride, " ".join(map(str, t.items)),
                        " ".join(map(str, t.transferred)), " ".join(map(str, t.unused)), t.sub_objective,
                        t.recorded])
