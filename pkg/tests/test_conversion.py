import numpy as np
import pytest

from pbslab.conversion import Schedule, check_against_plan, convert, replay_schedule
from pbslab.grid import MoveRecord, PbsState
from pbslab.heuristics import greedy_rollout
from pbslab.instances import elimination_bound, generate, series
from pbslab.plan import InvalidPlan, Plan


def test_anchor_compresses_to_eight(anchor, anchor_plan):
    sched = convert(anchor_plan, anchor.state())
    assert sched.makespan == 8
    assert sched.move_count == 13
    assert [[mv.escort_id for mv in g] for g in sched.groups] == [
        [1, 0], [0, 1], [0, 1], [1, 0], [1, 0], [0], [0], [0]]
    final, verdict = replay_schedule(anchor.state(), sched)
    assert verdict.ok, verdict.failures
    assert final.is_terminal()
    assert check_against_plan(anchor_plan, sched).ok


def test_single_move_is_one_group():
    s = PbsState(3, 3, [(0, 1)], [(0, 0)], [(0, 0)])
    plan = Plan("one", [MoveRecord((0, 0), (0, 1), 0, 0)])
    sched = convert(plan, s)
    assert sched.makespan == 1
    assert replay_schedule(s, sched)[1].ok


def test_disjoint_moves_share_a_timestamp():
    s = PbsState(4, 4, [(3, 3)], [(0, 0), (2, 2)], [(3, 2)])
    plan = Plan("pair", [MoveRecord((0, 0), (0, 1), 0), MoveRecord((2, 2), (3, 2), 1, None)])
    # second move pulls nothing from the item, it is a plain stock cell
    sched = convert(plan)
    assert sched.makespan == 1
    assert len(sched.groups[0]) == 2


def test_dependent_moves_are_not_merged():
    # escort 0 pushes the load at (0,1) into (0,0); escort 1 then wants (0,0)
    s = PbsState(2, 3, [(1, 2)], [(0, 0), (1, 0)], [(1, 2)])
    plan = Plan("dep", [MoveRecord((0, 0), (0, 1), 0), MoveRecord((1, 0), (0, 0), 1)])
    sched = convert(plan, s)
    assert sched.makespan == 2
    assert replay_schedule(s, sched)[1].ok


def test_conflict_one_is_reported():
    s = PbsState(2, 3, [(1, 2)], [(0, 0), (1, 0)], [(0, 0)])
    merged = Schedule("bad", [[MoveRecord((0, 0), (0, 1), 0), MoveRecord((1, 0), (0, 0), 1)]])
    _, verdict = replay_schedule(s, merged)
    assert not verdict.ok
    assert "conflict 1" in verdict.first


def test_conflict_two_is_reported():
    s = PbsState(2, 3, [(1, 2)], [(0, 0), (1, 0)], [(0, 0)])
    stale = Schedule("bad", [[MoveRecord((0, 1), (0, 2), 0)]])
    _, verdict = replay_schedule(s, stale)
    assert "conflict 2" in verdict.first


def test_broken_chain_rejected_without_state():
    plan = Plan("x", [MoveRecord((0, 0), (0, 1), 0), MoveRecord((1, 1), (1, 2), 0)])
    with pytest.raises(InvalidPlan):
        convert(plan)


def test_invariants_on_heuristic_plans():
    rng = np.random.default_rng(11)
    for name in ("R422", "R633", "R523"):
        for inst in generate(series(name, 40), seed=5):
            plan = greedy_rollout(inst, 4 * elimination_bound(max(inst.m, inst.n), inst.d), rng)
            sched = convert(plan, inst.state())
            assert sched.makespan <= plan.objective
            assert sched.move_count == plan.objective
            assert all(len({mv.escort_id for mv in g}) == len(g) for g in sched.groups)
            assert replay_schedule(inst.state(), sched)[1].ok
            assert check_against_plan(plan, sched).ok
            assert Schedule.from_json(sched.to_json()) == sched
