import re
from collections import Counter

import pytest

from conftest import GOLDEN, check_golden
from pbslab.conversion import convert
from pbslab.instances import Instance, generate, series
from pbslab.milp import (
    Mode,
    ModelSpec,
    Violation,
    constraint_rows,
    count_declared,
    default_K,
    export_lp,
    format_assignment,
    groups_to_assignment,
    parse_solution,
    plan_to_assignment,
    validate_solution,
    variable_names,
)
from pbslab.oracle import bfs_optimal


def directed_edges(m, n):
    return 2 * (2 * m * n - m - n)


@pytest.mark.parametrize("m,n,d,K", [(4, 4, 2, 13), (3, 5, 1, 4), (2, 2, 1, 0)])
def test_variable_counts(m, n, d, K):
    items = [(m - 1, n - 1 - i) for i in range(d)]
    io = [(0, i) for i in range(d)]
    inst = Instance("c", m, n, items, [(m - 1, 0)], io)
    for mode in Mode:
        lp = export_lp(ModelSpec(inst, K, mode))
        E = directed_edges(m, n)
        assert count_declared(lp, "x_") == m * n * (K + 1)
        assert count_declared(lp, "y_") == m * n * d * (K + 1)
        assert count_declared(lp, "z_") == E * (K + 1)
        assert count_declared(lp, "w_") == E * d * (K + 1)
        assert count_declared(lp, "f_") == (K if mode is Mode.SIMULTANEOUS else 0)


def test_four_by_four_has_48_moves_per_step(anchor):
    assert len(ModelSpec(anchor, 1).edges()) == 48


def test_lp_is_well_formed(anchor):
    spec = ModelSpec(anchor, 6, Mode.SIMULTANEOUS)
    lp = export_lp(spec)
    assert lp.index("Minimize") < lp.index("Subject To") < lp.index("Binaries") < lp.rindex("End")
    declared = set(variable_names(spec))
    names = [row[0] for row in constraint_rows(spec)]
    assert len(names) == len(set(names))
    body = lp.split("Subject To")[1].split("Binaries")[0]
    used = set(re.findall(r"\b[xyzwf]_[0-9_]+\b", body))
    assert used <= declared
    assert {row[1] for row in constraint_rows(spec)} == {str(i) for i in range(1, 16)} - {"13"} | {"f"}


def test_anchor_lp_golden(anchor, update_golden):
    lp = export_lp(ModelSpec(anchor, 13))
    assert lp == export_lp(ModelSpec(anchor, 13))
    check_golden(GOLDEN / "anchor_k13.lp", lp, update_golden)


def test_oracle_plan_round_trip(anchor):
    plan = bfs_optimal(anchor)
    spec = ModelSpec(anchor, plan.objective)
    back = validate_solution(spec, plan_to_assignment(spec, plan))
    assert back.objective == plan.objective == 13
    assert Counter(back.moves) == Counter(plan.moves)


def test_round_trip_through_text_with_slack_steps(anchor, anchor_plan):
    spec = ModelSpec(anchor, 16)
    text = format_assignment(plan_to_assignment(spec, anchor_plan))
    back = validate_solution(spec, parse_solution("# solver output\n" + text))
    assert back.moves == anchor_plan.moves


def test_two_moves_in_one_step_violate_13(anchor, anchor_plan):
    sched = convert(anchor_plan, anchor.state())
    spec = ModelSpec(anchor, 13)
    with pytest.raises(Violation) as exc:
        validate_solution(spec, groups_to_assignment(spec, sched.groups))
    assert exc.value.family == "13"
    assert exc.value.index == (1,)


def test_simultaneous_model_accepts_schedule(anchor, anchor_plan):
    sched = convert(anchor_plan, anchor.state())
    spec = ModelSpec(anchor, 13, Mode.SIMULTANEOUS)
    vals = groups_to_assignment(spec, sched.groups)
    validate_solution(spec, vals)
    assert sum(v for k, v in vals.items() if k.startswith("f_")) == 8


def test_non_adjacent_move_violates_11(anchor, anchor_plan):
    spec = ModelSpec(anchor, 13)
    vals = plan_to_assignment(spec, anchor_plan)
    vals["z_0_5_3"] = 1
    with pytest.raises(Violation) as exc:
        validate_solution(spec, vals)
    assert exc.value.family == "11"


def test_fractional_value_rejected(anchor, anchor_plan):
    spec = ModelSpec(anchor, 13)
    vals = dict(plan_to_assignment(spec, anchor_plan))
    vals["x_0_0"] = 0.5
    with pytest.raises(Violation):
        validate_solution(spec, vals)


def test_short_horizon_cannot_hold_plan(anchor, anchor_plan):
    with pytest.raises(ValueError):
        plan_to_assignment(ModelSpec(anchor, 12), anchor_plan)


def test_round_trips_on_random_instances():
    for inst in generate(series("R322", 20), seed=4):
        plan = bfs_optimal(inst)
        spec = ModelSpec(inst, plan.objective)
        assert validate_solution(spec, plan_to_assignment(spec, plan)).moves == plan.moves


def test_default_K():
    done = Instance("t", 4, 4, [(0, 0)], [(2, 2)], [(0, 0)])
    assert default_K(done) == 0
    assert export_lp(ModelSpec(done, 0)).count("z_") > 0
    fig = Instance("f", 4, 4, [(2, 2), (1, 1)], [(0, 1), (1, 2)], [(0, 0), (0, 3)])
    assert default_K(fig) >= 13
    with pytest.raises(ValueError):
        ModelSpec(fig, -1)
