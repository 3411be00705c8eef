"""Guided escort selection, the exploration mixer, and closed-form move counts."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .grid import (
    DIRECTIONS,
    EscortAction,
    PbsState,
    Position,
    escort_distance,
    horizontal_useful_point,
    is_legal,
    item_manhattan,
    legal_actions,
    manhattan,
    target_cell,
    vertical_useful_point,
)
from .instances import Instance
from .plan import Plan, SolveFailed


class DomainError(ValueError):
    pass


class Failed(SolveFailed):
    pass


@dataclass(frozen=True)
class GuidanceChoice:
    escort_id: int
    target_item: int
    useful: Position
    d_item: int
    d_escort: int


def guidance_choice(state: PbsState, escort_id: int) -> Optional[GuidanceChoice]:
    """Closest (item, useful point) pair for one escort, or None if all are missing.

    Ties go to the lower item id, then vertical before horizontal.
    """
    esc = state.escorts[escort_id]
    best = None
    best_dist = math.inf
    for r in range(state.d):
        item = state.items[r]
        for useful in (vertical_useful_point(state, r), horizontal_useful_point(state, r)):
            dist = escort_distance(esc, useful, item)
            if dist < best_dist:
                best_dist = dist
                best = (r, useful)
    if best is None:
        return None
    r, useful = best
    return GuidanceChoice(escort_id, r, useful, item_manhattan(state, r), int(best_dist))


def _qualifies(state: PbsState, choice: GuidanceChoice, action: EscortAction) -> bool:
    r = choice.target_item
    src = state.escorts[action.escort_id]
    dst = target_cell(state, action)
    item = src if state.items[r] == dst else state.items[r]
    new_d_item = manhattan(item, state.io[r])
    if new_d_item < choice.d_item:
        return True
    if new_d_item == choice.d_item:
        return escort_distance(dst, choice.useful, item) < choice.d_escort
    return False


def guided_action(state: PbsState, rng: np.random.Generator) -> Optional[EscortAction]:
    """One step of the guided selection heuristic; None means no guidance.

    Escorts are tried in random order until one has a finite distance to
    some useful point. For that escort the closest useful point is chosen,
    then the four directions are scanned in shuffled order for a move that
    either brings the chosen item closer to its I/O point or, leaving it
    where it is, brings the escort closer to the useful point.
    """
    for k in rng.permutation(state.e):
        choice = guidance_choice(state, int(k))
        if choice is None:
            continue
        for di in rng.permutation(4):
            action = EscortAction(int(k), DIRECTIONS[di])
            if is_legal(state, action) and _qualifies(state, choice, action):
                return action
        return None
    return None


def random_action(state: PbsState, rng: np.random.Generator) -> EscortAction:
    actions = legal_actions(state)
    return actions[int(rng.integers(len(actions)))]


def semi_random_choice(state: PbsState, eta: float, rng: np.random.Generator) -> tuple[EscortAction, bool]:
    """Like ``semi_random_action`` but also reports whether the guided branch was drawn."""
    if not 0.0 <= eta <= 1.0:
        raise ValueError("eta must lie in [0, 1]")
    if rng.random() < eta:
        action = guided_action(state, rng)
        if action is not None:
            return action, True
        return random_action(state, rng), True
    return random_action(state, rng), False


def semi_random_action(state: PbsState, eta: float, rng: np.random.Generator) -> EscortAction:
    """Guided action with probability ``eta``, otherwise a uniform legal action.

    A guided draw that yields no guidance falls back to a uniform legal action.
    """
    return semi_random_choice(state, eta, rng)[0]


def greedy_rollout(instance: Instance | PbsState, cap: int, rng: np.random.Generator,
                   instance_id: Optional[str] = None) -> Plan:
    """Follow the guided heuristic (random fallback) until solved or ``cap`` moves."""
    from .grid import apply_action

    if cap < 0:
        raise ValueError("cap must be non-negative")
    state = instance.state() if isinstance(instance, Instance) else instance
    plan_id = instance_id or (instance.id if isinstance(instance, Instance) else "state")
    moves = []
    while not state.is_terminal():
        if len(moves) >= cap:
            raise Failed(cap)
        action = semi_random_action(state, 1.0, rng)
        state, _, _, rec = apply_action(state, action)
        moves.append(rec)
    return Plan(plan_id, moves)


def gue_min_moves(i: int, j: int) -> int:
    """Minimum moves for one item at 1-indexed ``(i, j)``, escort and I/O at the corner."""
    if i < 1 or j < 1:
        raise DomainError("indices are 1-based")
    if i == j == 1:
        raise DomainError("item already at the I/O point")
    if i > j:
        return 6 * i + 2 * j - 13
    if j > i:
        return 6 * j + 2 * i - 13
    return 8 * i - 11


def mirzaei_two_item_moves(i: int, j: int) -> int:
    """Moves to bring two gathered, horizontally adjacent items to the corner.

    ``(i, j)`` is the 1-indexed cell of the item nearer the I/O point; the
    single escort sits to the right of the pair. The final shift of the
    second item onto the I/O cell is not counted.
    """
    if i < 1 or j < 1:
        raise DomainError("indices are 1-based")
    if i == j == 1:
        raise DomainError("items already occupy the two target cells")
    if i < j:
        if i % 2 == 0:
            return 3 * i + 7 * j - 11
        if j - i == 1:
            return 10 * i - 4
        return 3 * i + 7 * j - 13
    if i == j:
        return 10 * i - 7 if i % 2 == 0 else 10 * i - 9
    if j % 2 == 0:
        return 7 * i + 3 * j - 7
    return 7 * i + 3 * j - 9
