"""Single-load move plans and their JSON form."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

from .grid import IllegalAction, MoveRecord, PbsState, apply_move


class InvalidPlan(ValueError):
    pass


class SolveFailed(RuntimeError):
    """A bounded solver ran out of budget before reaching a terminal state."""

    def __init__(self, cap: int, message: str = ""):
        self.cap = cap
        super().__init__(message or f"no solution within {cap} moves")


@dataclass
class Plan:
    instance_id: str
    moves: list[MoveRecord] = field(default_factory=list)

    @property
    def objective(self) -> int:
        return len(self.moves)

    def to_json(self) -> dict:
        return {
            "instance_id": self.instance_id,
            "objective": self.objective,
            "moves": [mv.to_json() for mv in self.moves],
        }

    @classmethod
    def from_json(cls, obj: dict) -> "Plan":
        plan = cls(obj["instance_id"], [MoveRecord.from_json(m) for m in obj["moves"]])
        if "objective" in obj and int(obj["objective"]) != plan.objective:
            raise InvalidPlan("objective does not match move count")
        return plan

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=1) + "\n")

    @classmethod
    def load(cls, path) -> "Plan":
        return cls.from_json(json.loads(Path(path).read_text()))


def replay(state: PbsState, moves: Iterable[MoveRecord]) -> list[PbsState]:
    """States visited by ``moves``, starting with ``state``.

    Raises InvalidPlan if any move is illegal or disagrees with its record.
    """
    states = [state]
    for i, mv in enumerate(moves):
        cur = states[-1]
        k = cur.escort_at(mv.escort_from)
        if k is None or k != mv.escort_id:
            raise InvalidPlan(f"move {i}: escort {mv.escort_id} is not at {list(mv.escort_from)}")
        if cur.item_at(mv.escort_to) != mv.moved_item:
            raise InvalidPlan(f"move {i}: recorded moved item does not match the grid")
        try:
            states.append(apply_move(cur, mv))
        except IllegalAction as exc:
            raise InvalidPlan(f"move {i}: {exc}") from None
    return states


def check_plan(state: PbsState, plan: Plan) -> PbsState:
    """Replay ``plan`` and require a terminal final state."""
    final = replay(state, plan.moves)[-1]
    if not final.is_terminal():
        raise InvalidPlan("plan does not deliver every item to its I/O point")
    return final
