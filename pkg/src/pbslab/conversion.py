"""Compress a single-load plan into timestamp groups of simultaneous moves.

A move may join the current group only when neither its escort's cell nor
its target cell is *prohibited*. Prohibited cells are the source cells of
every earlier move not yet executed: moves already admitted to the group
and moves skipped over to reach the candidate. This covers both conflicts:
an escort may not enter a cell an item has just been pushed into, and an
escort whose position depends on an earlier pending move may not leave.
"""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .grid import MoveRecord, PbsState, Position, manhattan
from .plan import InvalidPlan, Plan, replay


@dataclass
class Schedule:
    instance_id: str
    groups: list[list[MoveRecord]] = field(default_factory=list)

    @property
    def makespan(self) -> int:
        return len(self.groups)

    @property
    def move_count(self) -> int:
        return sum(len(g) for g in self.groups)

    def flatten(self) -> list[MoveRecord]:
        return [mv for g in self.groups for mv in g]

    def to_json(self) -> dict:
        return {
            "instance_id": self.instance_id,
            "makespan": self.makespan,
            "groups": [[mv.to_json() for mv in g] for g in self.groups],
        }

    @classmethod
    def from_json(cls, obj: dict) -> "Schedule":
        return cls(obj["instance_id"], [[MoveRecord.from_json(m) for m in g] for g in obj["groups"]])

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=1) + "\n")

    @classmethod
    def load(cls, path) -> "Schedule":
        return cls.from_json(json.loads(Path(path).read_text()))


def _check_chains(moves: list[MoveRecord]) -> None:
    last: dict[int, Position] = {}
    for i, mv in enumerate(moves):
        if mv.escort_id in last and last[mv.escort_id] != mv.escort_from:
            raise InvalidPlan(f"move {i}: escort {mv.escort_id} does not start where it last stopped")
        last[mv.escort_id] = mv.escort_to


def convert(plan: Plan, initial: Optional[PbsState] = None) -> Schedule:
    """Group the moves of ``plan`` into simultaneous timestamps.

    With ``initial`` the plan is replayed first; otherwise only per-escort
    continuity is checked.
    """
    moves = plan.moves
    if initial is not None:
        replay(initial, moves)
    else:
        _check_chains(moves)

    queues: dict[int, list[int]] = {}
    for t, mv in enumerate(moves):
        queues.setdefault(mv.escort_id, []).append(t)
    heads = {k: 0 for k in queues}
    done = [False] * len(moves)

    groups = []
    while True:
        available = sorted(q[heads[k]] for k, q in queues.items() if heads[k] < len(q))
        if not available:
            break
        first = available[0]
        group = [first]
        prohibited = {moves[first].escort_from}
        last = first
        for t in available[1:]:
            for s in range(last + 1, t):
                if not done[s]:
                    prohibited.add(moves[s].escort_from)
            mv = moves[t]
            if mv.escort_from in prohibited or mv.escort_to in prohibited:
                continue
            group.append(t)
            prohibited.add(mv.escort_from)
            last = t
        for t in group:
            done[t] = True
            heads[moves[t].escort_id] += 1
        groups.append([moves[t] for t in group])
    return Schedule(plan.instance_id, groups)


@dataclass
class Verdict:
    ok: bool
    failures: list[str] = field(default_factory=list)

    @property
    def first(self) -> Optional[str]:
        return self.failures[0] if self.failures else None


def _apply_group(state: PbsState, group: list[MoveRecord]) -> tuple[Optional[PbsState], Optional[str]]:
    sources = [mv.escort_from for mv in group]
    targets = [mv.escort_to for mv in group]
    ids = [mv.escort_id for mv in group]
    if len(set(ids)) != len(ids):
        return None, "escort moves twice in one timestamp"
    if len(set(targets)) != len(targets) or set(targets) & set(sources):
        return None, "conflict 1: an item is moved more than once in one timestamp"
    escorts = list(state.escorts)
    items = list(state.items)
    for mv in group:
        if not (0 <= mv.escort_id < state.e) or escorts[mv.escort_id] != mv.escort_from:
            return None, f"conflict 2: escort {mv.escort_id} is not at {list(mv.escort_from)} when the timestamp starts"
        if manhattan(mv.escort_from, mv.escort_to) != 1 or not state.in_bounds(mv.escort_to):
            return None, "move leaves the grid or is not between adjacent cells"
        if mv.escort_to in state.escorts:
            return None, "escort moves into another escort"
        if state.item_at(mv.escort_to) != mv.moved_item:
            return None, "recorded moved item does not match the grid"
    for mv in group:
        escorts[mv.escort_id] = mv.escort_to
        if mv.moved_item is not None:
            items[mv.moved_item] = mv.escort_from
    return PbsState(state.m, state.n, items, escorts, state.io), None


def replay_schedule(initial: PbsState, schedule: Schedule) -> tuple[PbsState, Verdict]:
    """Apply each group as one simultaneous update and report the first violation."""
    state = initial
    for g, group in enumerate(schedule.groups):
        nxt, err = _apply_group(state, group)
        if err is not None:
            return state, Verdict(False, [f"group {g}: {err}"])
        state = nxt
    if not state.is_terminal():
        return state, Verdict(False, ["final state is not terminal"])
    return state, Verdict(True)


def check_against_plan(plan: Plan, schedule: Schedule) -> Verdict:
    """Per-escort order and move multiset must match the source plan."""
    failures = []
    flat = schedule.flatten()
    if Counter(flat) != Counter(plan.moves):
        failures.append("move multiset differs from the plan")
    for k in {mv.escort_id for mv in plan.moves}:
        if [mv for mv in plan.moves if mv.escort_id == k] != [mv for mv in flat if mv.escort_id == k]:
            failures.append(f"escort {k} moves out of order")
    return Verdict(not failures, failures)
