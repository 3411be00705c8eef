import numpy as np
import pytest

from pbslab.heuristics import greedy_rollout
from pbslab.instances import Instance, generate, series
from pbslab.oracle import (
    Exhausted,
    SearchStats,
    SearchTooLarge,
    bfs_optimal,
    dfs_optimal_objective,
    separate_retrieval_best,
    sequential_retrieval_cost,
)
from pbslab.plan import check_plan


def test_anchor_joint_optimum(anchor):
    stats = SearchStats()
    plan = bfs_optimal(anchor, stats=stats)
    assert plan.objective == 13
    check_plan(anchor.state(), plan)
    assert stats.expanded > 0 and stats.frontier_peak > 0 and stats.elapsed >= 0


def test_anchor_separate_retrieval(anchor):
    assert separate_retrieval_best(anchor) == (15, (1, 0))
    assert sequential_retrieval_cost(anchor, (0, 1)) == 17


def test_terminal_instance_gives_empty_plan():
    inst = Instance("t", 4, 4, [(0, 0)], [(1, 1)], [(0, 0)])
    assert bfs_optimal(inst).moves == []


def test_single_item_matches_closed_form_cell():
    inst = Instance("f", 6, 6, [(1, 2)], [(0, 0)], [(0, 0)])
    assert bfs_optimal(inst).objective == 9


def test_single_item_separate_equals_joint():
    for inst in generate(series("R412", 5), seed=2):
        assert separate_retrieval_best(inst)[0] == bfs_optimal(inst).objective


def test_exhausted_when_cap_too_small(anchor):
    with pytest.raises(Exhausted) as info:
        bfs_optimal(anchor, cap=12)
    assert info.value.cap == 12


def test_budget_guard():
    inst = generate(series("R623", 1), seed=0)[0]
    with pytest.raises(SearchTooLarge):
        bfs_optimal(inst, budget=1000)


def test_bfs_agrees_with_independent_dfs_on_3x3():
    for inst in generate(series("R322", 25), seed=4):
        opt = bfs_optimal(inst).objective
        assert dfs_optimal_objective(inst, opt) == opt
        if opt > 0:
            assert dfs_optimal_objective(inst, opt - 1) is None


def test_joint_never_worse_than_separate_or_heuristic():
    rng = np.random.default_rng(0)
    for inst in generate(series("R422", 6), seed=8):
        opt = bfs_optimal(inst).objective
        assert opt <= separate_retrieval_best(inst)[0]
        assert opt <= greedy_rollout(inst, 500, rng).objective
