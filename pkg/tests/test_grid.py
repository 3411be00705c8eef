import pytest

from pbslab.grid import (
    Direction,
    EscortAction,
    IllegalAction,
    InvalidState,
    MoveRecord,
    PbsState,
    Position,
    apply_action,
    blocking_indicator,
    escort_manhattan,
    is_legal,
    item_manhattan,
    legal_actions,
    legal_mask,
    render_ascii,
    useful_points,
)

from conftest import GOLDEN, check_golden

UP, DOWN, LEFT, RIGHT = Direction


def anchor_state() -> PbsState:
    return PbsState(4, 4, [(2, 2), (1, 1)], [(0, 1), (1, 2)], [(0, 0), (0, 3)])


def test_validation_rejects_overlaps_and_out_of_bounds():
    with pytest.raises(InvalidState):
        PbsState(3, 3, [(1, 1)], [(1, 1)], [(0, 0)])
    with pytest.raises(InvalidState):
        PbsState(3, 3, [(3, 0)], [(1, 1)], [(0, 0)])
    with pytest.raises(InvalidState):
        PbsState(3, 3, [(1, 1)], [(0, 1)], [(0, 0), (0, 2)])
    with pytest.raises(InvalidState):
        PbsState(3, 3, [(1, 1)], [], [(0, 0)])
    # an item may stand on its own I/O point
    PbsState(3, 3, [(0, 0)], [(1, 1)], [(0, 0)])


def test_action_index_round_trip():
    for idx in range(12):
        assert EscortAction.from_index(idx).index == idx
    assert EscortAction(1, DOWN).index == 5


def test_anchor_first_move_is_legal_and_lifts_item():
    s = anchor_state()
    a = EscortAction(1, DOWN)
    assert a in legal_actions(s)
    nxt, reward, done, rec = apply_action(s, a)
    assert nxt.items == (Position(1, 2), Position(1, 1))
    assert set(nxt.escorts) == {Position(0, 1), Position(2, 2)}
    assert (reward, done) == (0, False)
    assert rec == MoveRecord(Position(1, 2), Position(2, 2), 1, 0)


def test_boundary_and_escort_targets_excluded():
    s = PbsState(4, 4, [(3, 3)], [(0, 0), (2, 2), (2, 3)], [(0, 3)])
    acts = legal_actions(s)
    assert EscortAction(0, UP) not in acts and EscortAction(0, LEFT) not in acts
    assert EscortAction(1, RIGHT) not in acts
    assert EscortAction(2, LEFT) not in acts
    assert all(is_legal(s, a) for a in acts)
    assert sum(legal_mask(s)) == len(acts) <= 4 * s.e
    with pytest.raises(IllegalAction):
        apply_action(s, EscortAction(1, RIGHT))


def test_legal_action_order_is_escort_then_direction():
    s = PbsState(3, 3, [(0, 0)], [(1, 1), (2, 2)], [(0, 2)])
    acts = legal_actions(s)
    assert acts == sorted(acts, key=lambda a: a.index)
    assert [a.direction for a in acts if a.escort_id == 0] == [UP, DOWN, LEFT, RIGHT]


def test_reverse_action_restores_state():
    s = anchor_state()
    for a in legal_actions(s):
        nxt = apply_action(s, a)[0]
        back = apply_action(nxt, EscortAction(a.escort_id, a.direction.opposite))[0]
        assert back == s


def test_final_move_reports_done():
    s = PbsState(4, 4, [(0, 1), (0, 3)], [(0, 0), (0, 2)], [(0, 0), (0, 3)])
    nxt, reward, done, _ = apply_action(s, EscortAction(0, RIGHT))
    assert done and reward == 1 and nxt.is_terminal()


def test_item_manhattan():
    s = anchor_state()
    assert item_manhattan(s, 0) == 4
    assert item_manhattan(s, 1) == 3
    assert item_manhattan(PbsState(4, 4, [(1, 1)], [(0, 1)], [(0, 0)]), 0) == 2
    assert item_manhattan(PbsState(4, 4, [(0, 0)], [(0, 1)], [(0, 0)]), 0) == 0


def test_useful_points():
    s = PbsState(4, 4, [(1, 1)], [(2, 2)], [(0, 0)])
    assert useful_points(s, 0) == [Position(0, 1), Position(1, 0)]
    assert useful_points(PbsState(4, 4, [(0, 1)], [(2, 2)], [(0, 0)]), 0) == [Position(0, 0)]
    assert useful_points(PbsState(4, 4, [(0, 0)], [(2, 2)], [(0, 0)]), 0) == []


def test_escort_manhattan_worked_examples():
    a = PbsState(4, 4, [(1, 1)], [(2, 2)], [(0, 0)])
    assert escort_manhattan(a, 0, (0, 1), 0) == 3
    b = PbsState(4, 4, [(1, 1)], [(2, 1)], [(0, 0)])
    assert escort_manhattan(b, 0, (0, 1), 0) == 4
    c = PbsState(4, 4, [(1, 1)], [(0, 1)], [(0, 0)])
    assert escort_manhattan(c, 0, (0, 1), 0) == 0
    assert escort_manhattan(c, 0, None, 0) == float("inf")


def test_blocking_needs_strict_collinear_betweenness():
    assert blocking_indicator((2, 1), (0, 1), (1, 1)) == 1
    assert blocking_indicator((1, 3), (1, 0), (1, 1)) == 1
    # inside the bounding box but not on the line
    assert blocking_indicator((2, 2), (0, 1), (1, 1)) == 0
    assert blocking_indicator((1, 1), (0, 1), (1, 1)) == 0


def test_item_distance_drops_by_one_on_useful_point():
    s = PbsState(4, 4, [(1, 1)], [(0, 1)], [(0, 0)])
    nxt = apply_action(s, EscortAction(0, DOWN))[0]
    assert nxt.items[0] == Position(0, 1)
    assert item_manhattan(nxt, 0) == item_manhattan(s, 0) - 1


def test_render_golden(update_golden):
    text = render_ascii(anchor_state())
    check_golden(GOLDEN / "anchor_render.txt", text, update_golden)
    assert text.splitlines()[0].split() == ["IO0", "IO1"]
    side = render_ascii(PbsState(3, 3, [(2, 2)], [(0, 0)], [(1, 0)]))
    assert side.splitlines()[-1] == "IO0@[1, 0]"
