"""Deterministic puzzle-based storage environment.

A grid of ``m`` rows and ``n`` columns is fully occupied by unit loads except
for a handful of empty cells (escorts). Moving an escort one step swaps it
with the load in the target cell. A few loads are *desired*: each must reach
its assigned I/O cell.

Coordinates are ``[row, col]`` with ``[0, 0]`` at the top-left corner.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import NamedTuple, Optional, Sequence


class Position(NamedTuple):
    row: int
    col: int


class Direction(enum.IntEnum):
    UP = 0
    DOWN = 1
    LEFT = 2
    RIGHT = 3

    @property
    def delta(self) -> tuple[int, int]:
        return _DELTAS[self]

    @property
    def opposite(self) -> "Direction":
        return _OPPOSITE[self]


_DELTAS = {
    Direction.UP: (-1, 0),
    Direction.DOWN: (1, 0),
    Direction.LEFT: (0, -1),
    Direction.RIGHT: (0, 1),
}
_OPPOSITE = {
    Direction.UP: Direction.DOWN,
    Direction.DOWN: Direction.UP,
    Direction.LEFT: Direction.RIGHT,
    Direction.RIGHT: Direction.LEFT,
}
DIRECTIONS = tuple(Direction)


class IllegalAction(ValueError):
    """Raised when an action is applied that is not in ``legal_actions``."""


class InvalidState(ValueError):
    pass


class EscortAction(NamedTuple):
    escort_id: int
    direction: Direction

    @property
    def index(self) -> int:
        return 4 * self.escort_id + int(self.direction)

    @classmethod
    def from_index(cls, index: int) -> "EscortAction":
        return cls(index // 4, Direction(index % 4))


@dataclass(frozen=True)
class MoveRecord:
    escort_from: Position
    escort_to: Position
    escort_id: int
    moved_item: Optional[int] = None

    def __post_init__(self):
        if manhattan(self.escort_from, self.escort_to) != 1:
            raise ValueError(f"non-adjacent move {self.escort_from} -> {self.escort_to}")

    @property
    def direction(self) -> Direction:
        dr = self.escort_to[0] - self.escort_from[0]
        dc = self.escort_to[1] - self.escort_from[1]
        for d, delta in _DELTAS.items():
            if delta == (dr, dc):
                return d
        raise AssertionError("unreachable")

    def to_json(self) -> dict:
        out = {
            "from": list(self.escort_from),
            "to": list(self.escort_to),
            "escort_id": self.escort_id,
        }
        if self.moved_item is not None:
            out["moved_item"] = self.moved_item
        return out

    @classmethod
    def from_json(cls, obj: dict) -> "MoveRecord":
        return cls(
            Position(*obj["from"]),
            Position(*obj["to"]),
            int(obj["escort_id"]),
            obj.get("moved_item"),
        )


def manhattan(a: Sequence[int], b: Sequence[int]) -> int:
    return abs(a[0] - b[0]) + abs(a[1] - b[1])


def _pos(p) -> Position:
    return Position(int(p[0]), int(p[1]))


@dataclass(frozen=True)
class PbsState:
    """Immutable grid configuration.

    ``items[r]`` is the position of desired item ``r`` and ``io[r]`` its
    I/O cell; ``escorts[k]`` is the position of escort ``k``. Every other
    cell holds a non-desired load.
    """

    m: int
    n: int
    items: tuple[Position, ...]
    escorts: tuple[Position, ...]
    io: tuple[Position, ...]

    def __post_init__(self):
        object.__setattr__(self, "items", tuple(_pos(p) for p in self.items))
        object.__setattr__(self, "escorts", tuple(_pos(p) for p in self.escorts))
        object.__setattr__(self, "io", tuple(_pos(p) for p in self.io))
        self.validate()

    def validate(self) -> None:
        if self.m < 1 or self.n < 1:
            raise InvalidState("grid must have at least one row and column")
        if len(self.items) < 1:
            raise InvalidState("need at least one desired item")
        if len(self.escorts) < 1:
            raise InvalidState("need at least one escort")
        if len(self.io) != len(self.items):
            raise InvalidState("one I/O point per desired item is required")
        occupied = self.items + self.escorts
        for p in occupied + self.io:
            if not self.in_bounds(p):
                raise InvalidState(f"position {list(p)} outside {self.m}x{self.n} grid")
        if len(set(occupied)) != len(occupied):
            raise InvalidState("item and escort positions must be pairwise distinct")

    @property
    def d(self) -> int:
        return len(self.items)

    @property
    def e(self) -> int:
        return len(self.escorts)

    def in_bounds(self, p: Sequence[int]) -> bool:
        return 0 <= p[0] < self.m and 0 <= p[1] < self.n

    def is_terminal(self) -> bool:
        return all(p == q for p, q in zip(self.items, self.io))

    def item_at(self, p: Sequence[int]) -> Optional[int]:
        try:
            return self.items.index(tuple(p))
        except ValueError:
            return None

    def escort_at(self, p: Sequence[int]) -> Optional[int]:
        try:
            return self.escorts.index(tuple(p))
        except ValueError:
            return None

    def key(self) -> tuple:
        return (self.items, self.escorts)


def target_cell(state: PbsState, action: EscortAction) -> Position:
    r, c = state.escorts[action.escort_id]
    dr, dc = action.direction.delta
    return Position(r + dr, c + dc)


def is_legal(state: PbsState, action: EscortAction) -> bool:
    if not 0 <= action.escort_id < state.e:
        return False
    t = target_cell(state, action)
    return state.in_bounds(t) and t not in state.escorts


def legal_actions(state: PbsState) -> list[EscortAction]:
    """Actions whose target is inside the grid and not another escort."""
    out = []
    escorts = set(state.escorts)
    for k, (r, c) in enumerate(state.escorts):
        for d in DIRECTIONS:
            dr, dc = d.delta
            t = (r + dr, c + dc)
            if 0 <= t[0] < state.m and 0 <= t[1] < state.n and t not in escorts:
                out.append(EscortAction(k, d))
    return out


def legal_mask(state: PbsState) -> list[bool]:
    mask = [False] * (4 * state.e)
    for a in legal_actions(state):
        mask[a.index] = True
    return mask


def apply_action(state: PbsState, action: EscortAction) -> tuple[PbsState, int, bool, MoveRecord]:
    """Move one escort; the load in the target cell slides into the vacated cell."""
    if not is_legal(state, action):
        raise IllegalAction(f"{action} is not legal in this state")
    src = state.escorts[action.escort_id]
    dst = target_cell(state, action)
    moved = state.item_at(dst)
    items = state.items
    if moved is not None:
        items = items[:moved] + (src,) + items[moved + 1:]
    k = action.escort_id
    escorts = state.escorts[:k] + (dst,) + state.escorts[k + 1:]
    nxt = PbsState(state.m, state.n, items, escorts, state.io)
    done = nxt.is_terminal()
    return nxt, int(done), done, MoveRecord(src, dst, k, moved)


def apply_move(state: PbsState, move: MoveRecord) -> PbsState:
    """Replay a recorded move; the escort is located by its source cell."""
    k = state.escort_at(move.escort_from)
    if k is None:
        raise IllegalAction(f"no escort at {list(move.escort_from)}")
    return apply_action(state, EscortAction(k, move.direction))[0]


def item_manhattan(state: PbsState, r: int) -> int:
    return manhattan(state.items[r], state.io[r])


def useful_points(state: PbsState, r: int) -> list[Position]:
    """Neighbours of item ``r`` that bring it closer to its I/O cell.

    At most one vertical point (listed first) and one horizontal point.
    """
    (pr, pc), (ir, ic) = state.items[r], state.io[r]
    out = []
    if ir != pr:
        out.append(Position(pr + (1 if ir > pr else -1), pc))
    if ic != pc:
        out.append(Position(pr, pc + (1 if ic > pc else -1)))
    return out


def vertical_useful_point(state: PbsState, r: int) -> Optional[Position]:
    (pr, pc), (ir, _) = state.items[r], state.io[r]
    return None if ir == pr else Position(pr + (1 if ir > pr else -1), pc)


def horizontal_useful_point(state: PbsState, r: int) -> Optional[Position]:
    (pr, pc), (_, ic) = state.items[r], state.io[r]
    return None if ic == pc else Position(pr, pc + (1 if ic > pc else -1))


def _strictly_between(a: int, b: int, x: int) -> bool:
    return min(a, b) < x < max(a, b)


def blocking_indicator(escort: Sequence[int], useful: Sequence[int], item: Sequence[int]) -> int:
    """1 when the three cells share a row or column with the item strictly inside."""
    if escort[0] == useful[0] == item[0]:
        return int(_strictly_between(escort[1], useful[1], item[1]))
    if escort[1] == useful[1] == item[1]:
        return int(_strictly_between(escort[0], useful[0], item[0]))
    return 0


def escort_distance(escort: Sequence[int], useful: Optional[Sequence[int]], item: Sequence[int]) -> float:
    if useful is None:
        return math.inf
    return manhattan(escort, useful) + 2 * blocking_indicator(escort, useful, item)


def escort_manhattan(state: PbsState, escort_id: int, useful: Optional[Sequence[int]], r: int) -> float:
    """Escort-to-useful-point distance, plus 2 when the item blocks the straight path.

    ``useful=None`` stands for a missing useful point and yields infinity.
    """
    return escort_distance(state.escorts[escort_id], useful, state.items[r])


def render_ascii(state: PbsState) -> str:
    """Text rendering used by the trace printer.

    Header row marks I/O columns with ``IO``; cells are ``R<r>`` for desired
    item ``r``, ``.`` for escorts and ``#`` for ordinary loads.
    """
    width = max(3, len(f"R{state.d - 1}") + 1)
    header = []
    for c in range(state.n):
        tags = [str(r) for r, p in enumerate(state.io) if p.row == 0 and p.col == c]
        header.append(("IO" + ",".join(tags)) if tags else "")
    lines = ["".join(h.rjust(width) for h in header).rstrip()]
    for r in range(state.m):
        row = []
        for c in range(state.n):
            p = (r, c)
            k = state.item_at(p)
            if k is not None:
                row.append(f"R{k}")
            elif p in state.escorts:
                row.append(".")
            else:
                row.append("#")
        lines.append("".join(s.rjust(width) for s in row))
    side = [f"IO{r}@{list(p)}" for r, p in enumerate(state.io) if p.row != 0]
    if side:
        lines.append(" ".join(side))
    return "\n".join(lines) + "\n"
