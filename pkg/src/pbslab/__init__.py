"""Retrieval planning for puzzle-based storage (PBS) grids."""

__version__ = "0.1.0"

from .grid import (  # noqa: E402
    Direction,
    EscortAction,
    IllegalAction,
    InvalidState,
    MoveRecord,
    PbsState,
    Position,
    apply_action,
    escort_manhattan,
    item_manhattan,
    legal_actions,
    render_ascii,
    useful_points,
)
from .instances import Instance, InfeasibleSpec, SeriesSpec, elimination_bound, generate, series, state_space_size  # noqa: E402
from .plan import InvalidPlan, Plan, SolveFailed, check_plan, replay  # noqa: E402
from .oracle import Exhausted, bfs_optimal, separate_retrieval_best  # noqa: E402
from .heuristics import Failed, greedy_rollout, gue_min_moves, guided_action, mirzaei_two_item_moves, semi_random_action  # noqa: E402
from .conversion import Schedule, convert, replay_schedule  # noqa: E402
