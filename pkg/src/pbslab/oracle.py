"""Exact minimum-move retrieval by breadth-first search over grid states.

States are keyed by the ordered item cells plus the *sorted* escort cells:
escort identity does not matter physically, item identity does because
each item has its own I/O point.
"""

from __future__ import annotations

import itertools
import time
from collections import deque
from dataclasses import dataclass
from typing import Callable, Iterable, Optional, Sequence

from .grid import PbsState, Position
from .instances import Instance, elimination_bound, state_space_size
from .plan import Plan, SolveFailed, check_plan

DEFAULT_BUDGET = 50_000_000
DEFAULT_SLACK = 10


class Exhausted(SolveFailed):
    pass


class SearchTooLarge(ValueError):
    pass


@dataclass
class SearchStats:
    expanded: int = 0
    frontier_peak: int = 0
    elapsed: float = 0.0


class _Grid:
    """Integer cell indexing with precomputed neighbour lists."""

    def __init__(self, m: int, n: int, blocked: Iterable[int] = ()):
        self.m, self.n = m, n
        blocked = set(blocked)
        self.nbrs = []
        for c in range(m * n):
            r, q = divmod(c, n)
            out = []
            for dr, dq in ((-1, 0), (1, 0), (0, -1), (0, 1)):
                rr, qq = r + dr, q + dq
                if 0 <= rr < m and 0 <= qq < n and rr * n + qq not in blocked:
                    out.append(rr * n + qq)
            self.nbrs.append(tuple(out))

    def cell(self, p: Sequence[int]) -> int:
        return p[0] * self.n + p[1]

    def pos(self, c: int) -> Position:
        return Position(*divmod(c, self.n))


def _successors(grid: _Grid, d: int, key: tuple):
    """Yield ``(child_key, escort_src, escort_dst)`` for every legal move."""
    items = key[:d]
    escorts = key[d:]
    esc_set = set(escorts)
    nbrs = grid.nbrs
    for j, s in enumerate(escorts):
        rest = escorts[:j] + escorts[j + 1:]
        for t in nbrs[s]:
            if t in esc_set:
                continue
            if t in items:
                i = items.index(t)
                new_items = items[:i] + (s,) + items[i + 1:]
            else:
                new_items = items
            yield new_items + tuple(sorted(rest + (t,))), s, t


def _search(grid: _Grid, d: int, start: tuple, is_goal: Callable[[tuple], bool], cap: int,
            stats: SearchStats, all_goals: bool = False):
    """Layered BFS. Returns (goal keys at minimum depth, depth, parents)."""
    parents = {start: None}
    if is_goal(start):
        return [start], 0, parents
    frontier = [start]
    depth = 0
    while frontier and depth < cap:
        depth += 1
        nxt = []
        goals = []
        for key in frontier:
            stats.expanded += 1
            for child, s, t in _successors(grid, d, key):
                if child in parents:
                    continue
                parents[child] = (key, s, t)
                if is_goal(child):
                    if not all_goals:
                        return [child], depth, parents
                    goals.append(child)
                nxt.append(child)
        if goals:
            return goals, depth, parents
        frontier = nxt
        stats.frontier_peak = max(stats.frontier_peak, len(frontier))
    return [], depth, parents


def _cell_path(parents: dict, goal: tuple) -> list[tuple[int, int]]:
    path = []
    node = goal
    while parents[node] is not None:
        prev, s, t = parents[node]
        path.append((s, t))
        node = prev
    path.reverse()
    return path


def _to_moves(grid: _Grid, state: PbsState, cell_moves: list[tuple[int, int]]) -> tuple[list, PbsState]:
    """Assign concrete escort ids by replaying cell-level moves."""
    from .grid import EscortAction, Direction, apply_action

    moves = []
    cur = state
    for s, t in cell_moves:
        src, dst = grid.pos(s), grid.pos(t)
        k = cur.escort_at(src)
        direction = Direction([(-1, 0), (1, 0), (0, -1), (0, 1)].index((dst[0] - src[0], dst[1] - src[1])))
        cur, _, _, rec = apply_action(cur, EscortAction(k, direction))
        moves.append(rec)
    return moves, cur


def _key(grid: _Grid, state: PbsState) -> tuple:
    return tuple(grid.cell(p) for p in state.items) + tuple(sorted(grid.cell(p) for p in state.escorts))


def default_cap(instance: Instance) -> int:
    return elimination_bound(max(instance.m, instance.n), instance.d) + DEFAULT_SLACK


def _guard(instance, budget: Optional[int]) -> None:
    if budget is not None:
        size = state_space_size(instance.m, instance.n, instance.d, instance.e)
        if size > budget:
            raise SearchTooLarge(f"state space {size} exceeds budget {budget}")


def bfs_optimal(instance: Instance, cap: Optional[int] = None, budget: Optional[int] = DEFAULT_BUDGET,
                stats: Optional[SearchStats] = None) -> Plan:
    """Minimum-move plan for ``instance``; raises Exhausted beyond ``cap`` moves."""
    _guard(instance, budget)
    cap = default_cap(instance) if cap is None else cap
    stats = stats if stats is not None else SearchStats()
    t0 = time.perf_counter()
    state = instance.state()
    grid = _Grid(instance.m, instance.n)
    d = instance.d
    goal_items = tuple(grid.cell(p) for p in instance.io)
    goals, _, parents = _search(grid, d, _key(grid, state), lambda k: k[:d] == goal_items, cap, stats)
    stats.elapsed = time.perf_counter() - t0
    if not goals:
        raise Exhausted(cap)
    moves, _ = _to_moves(grid, state, _cell_path(parents, goals[0]))
    plan = Plan(instance.id, moves)
    check_plan(state, plan)
    return plan


def optimal_objective(instance: Instance, **kw) -> int:
    return bfs_optimal(instance, **kw).objective


def _retrieve_sequence(grid: _Grid, d: int, key: tuple, order: Sequence[int], io_cells: tuple,
                       cap: int, stats: SearchStats, memo: dict) -> Optional[int]:
    """Cheapest cost to bring ``order[0]``, then ``order[1]``, ... to their I/O points."""
    if not order:
        return 0
    memo_key = (key, tuple(order))
    if memo_key in memo:
        return memo[memo_key]
    r = order[0]
    target = io_cells[r]
    goals, depth, _ = _search(grid, d, key, lambda k: k[r] == target, cap, stats, all_goals=True)
    best = None
    if goals:
        for g in goals:
            rest = _retrieve_sequence(grid, d, g, order[1:], io_cells, cap, stats, memo)
            if rest is not None and (best is None or depth + rest < best):
                best = depth + rest
    memo[memo_key] = best
    return best


def sequential_retrieval_cost(instance: Instance, order: Sequence[int], cap: Optional[int] = None) -> int:
    """Optimal cost of retrieving items one at a time in a forced order.

    Each stage ends as soon as its item sits on its I/O point; the other
    desired items are ordinary movable loads during that stage. All
    minimum-cost end states of a stage are carried into the next.
    """
    if sorted(order) != list(range(instance.d)):
        raise ValueError("order must be a permutation of the item ids")
    cap = default_cap(instance) if cap is None else cap
    grid = _Grid(instance.m, instance.n)
    state = instance.state()
    io_cells = tuple(grid.cell(p) for p in instance.io)
    cost = _retrieve_sequence(grid, instance.d, _key(grid, state), list(order), io_cells, cap,
                              SearchStats(), {})
    if cost is None:
        raise Exhausted(cap)
    return cost


def separate_retrieval_best(instance: Instance, cap: Optional[int] = None) -> tuple[int, tuple[int, ...]]:
    """Best single-item-at-a-time cost over all item orders (factorial in d)."""
    best = None
    for order in itertools.permutations(range(instance.d)):
        try:
            cost = sequential_retrieval_cost(instance, order, cap)
        except Exhausted:
            continue
        if best is None or cost < best[0]:
            best = (cost, tuple(order))
    if best is None:
        raise Exhausted(default_cap(instance) if cap is None else cap)
    return best


def dfs_optimal_objective(instance: Instance, max_depth: int) -> Optional[int]:
    """Iterative-deepening depth-first search over labelled states.

    Deliberately shares no code with the BFS path; used to cross-check
    optimality on tiny grids. Returns None if nothing is found within
    ``max_depth``.
    """
    m, n = instance.m, instance.n
    io = list(instance.io)

    def rec(items, escorts, depth, seen):
        if list(items) == io:
            return True
        if depth == 0:
            return False
        for k, (r, c) in enumerate(escorts):
            for dr, dc in ((-1, 0), (1, 0), (0, -1), (0, 1)):
                t = (r + dr, c + dc)
                if not (0 <= t[0] < m and 0 <= t[1] < n) or t in escorts:
                    continue
                new_items = tuple((r, c) if p == t else p for p in items)
                new_esc = escorts[:k] + (t,) + escorts[k + 1:]
                sig = (new_items, frozenset(new_esc))
                if seen.get(sig, -1) >= depth - 1:
                    continue
                seen[sig] = depth - 1
                if rec(new_items, new_esc, depth - 1, seen):
                    return True
        return False

    items = tuple(tuple(p) for p in instance.items)
    escorts = tuple(tuple(p) for p in instance.escorts)
    for limit in range(max_depth + 1):
        if rec(items, escorts, limit, {(items, frozenset(escorts)): limit}):
            return limit
    return None
