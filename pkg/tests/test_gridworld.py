import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gazeplay.gridworld.layout import LAYOUT_NAMES, LayoutError, Tile, load_layout, parse_layout
from gazeplay.gridworld.planner import PolicyKind, bfs, plan, scripted_policy, tile_distance
from gazeplay.gridworld.state import (
    ACTIONS, COOK_TIME, ROUND_LENGTH, Action, Direction, GameState, InvalidStateError, Item,
    PlayerState, PotState, Subtask, initial_state, step, validate_state,
)

TINY = """\
XXPXX
O1 2D
XX  X
XXSXX
"""


@pytest.fixture
def tiny():
    return parse_layout(TINY, "tiny")


def put(state, i, pos=None, d=None, held="keep"):
    p = state.players[i]
    return state.with_player(i, PlayerState(pos or p.position, d or p.orientation,
                                            p.held if held == "keep" else held))


# ---------------------------------------------------------------- layouts

@pytest.mark.parametrize("name", LAYOUT_NAMES)
def test_shipped_layouts_load(name):
    lay = load_layout(name)
    assert lay.name == name
    assert len(lay.pots) >= 1
    for kind in (Tile.ONION_DISPENSER, Tile.DISH_DISPENSER, Tile.SERVING):
        assert lay.tiles_of(kind)
    assert parse_layout(lay.to_ascii(), name).to_ascii() == lay.to_ascii()


def test_layout_errors():
    with pytest.raises(LayoutError, match="unknown layout"):
        load_layout("kitchen")
    with pytest.raises(LayoutError, match="spawn"):
        parse_layout("XXXX\nX1 X\nXPDX\nXOSX\n")
    with pytest.raises(LayoutError, match="enclosed"):
        parse_layout("XXPXX\nO1 2 \nXXSDX\n")
    with pytest.raises(LayoutError, match="unknown tile"):
        parse_layout("XXPXX\nO1?2D\nXXSXX\n")
    # serving window walled off from both spawns
    with pytest.raises(LayoutError, match="unreachable"):
        parse_layout("XXXPXX\nO1 2DX\nXXXXXX\nXXSXXX\n")


def test_out_of_bounds_is_counter(tiny):
    assert tiny.tile((-1, 0)) == Tile.COUNTER
    assert not tiny.is_floor((10, 10))


# --------------------------------------------------------------- dynamics

def test_move_and_wall_bump_turns(tiny):
    s = initial_state(tiny)
    nxt, _, ev = step(s, tiny, (Action.DOWN, Action.STAY))
    # (2,1) is a counter: the player turns but stays
    assert nxt.players[0].position == (1, 1)
    assert nxt.players[0].orientation == Direction.DOWN
    assert ev == []
    nxt, _, _ = step(s, tiny, (Action.RIGHT, Action.STAY))
    assert nxt.players[0].position == (1, 2)


def test_collision_same_target(tiny):
    s = initial_state(tiny)
    nxt, _, ev = step(s, tiny, (Action.RIGHT, Action.LEFT))
    assert [p.position for p in nxt.players] == [(1, 1), (1, 3)]
    assert [e.kind for e in ev] == ["collision"]
    # both still turn toward where they tried to go
    assert nxt.players[0].orientation == Direction.RIGHT
    assert nxt.players[1].orientation == Direction.LEFT


def test_collision_swap(tiny):
    s = put(initial_state(tiny), 0, pos=(1, 2))
    nxt, _, ev = step(s, tiny, (Action.RIGHT, Action.LEFT))
    assert [p.position for p in nxt.players] == [(1, 2), (1, 3)]
    assert ev[-1].kind == "collision"


def test_moving_into_partner_who_stays_is_blocked(tiny):
    s = put(initial_state(tiny), 0, pos=(1, 2))
    nxt, _, ev = step(s, tiny, (Action.RIGHT, Action.STAY))
    assert nxt.players[0].position == (1, 2)
    assert ev[-1].kind == "collision"


def test_following_partner_is_allowed(tiny):
    # p1 steps down into (2,3); p0 steps into the tile p1 vacated
    s = put(initial_state(tiny), 0, pos=(1, 2))
    nxt, _, ev = step(s, tiny, (Action.RIGHT, Action.DOWN))
    assert [p.position for p in nxt.players] == [(1, 3), (2, 3)]
    assert ev == []


def test_full_soup_cycle(tiny):
    """Onion x3 -> cook 20 steps -> plate -> serve, checking every subtask and the reward."""
    s = initial_state(tiny)
    pot = (0, 2)
    events = []

    def go(state, a0, a1=Action.STAY):
        nxt, r, ev = step(state, tiny, (a0, a1))
        events.extend(e.subtask for e in ev if e.kind == "subtask")
        return nxt, r

    for _ in range(3):
        s = put(s, 0, pos=(1, 1), d=Direction.LEFT)
        s, _ = go(s, Action.INTERACT)
        assert s.players[0].held == Item.ONION
        s = put(s, 0, pos=(1, 2), d=Direction.UP)
        s, _ = go(s, Action.INTERACT)
    assert s.pots[pot] == PotState(3, COOK_TIME)
    for k in range(COOK_TIME):
        assert s.pots[pot].cooking
        s, _ = go(s, Action.STAY)
    assert s.pots[pot].done
    s = put(s, 1, pos=(1, 3), d=Direction.RIGHT)
    s, _ = go(s, Action.STAY, Action.INTERACT)
    assert s.players[1].held == Item.DISH
    s = put(s, 1, pos=(1, 2), d=Direction.UP)
    s = put(s, 0, pos=(1, 1))
    s, _ = go(s, Action.STAY, Action.INTERACT)
    assert s.players[1].held == Item.SOUP and s.pots[pot] == PotState()
    s = put(s, 1, pos=(2, 2), d=Direction.DOWN)
    score = s.score
    s, r = go(s, Action.STAY, Action.INTERACT)
    assert r == 20 and s.score == score + 20 and s.players[1].held is None
    assert events == [Subtask.GET_ONION_FROM_DISPENSER, Subtask.PUT_ONION_IN_POT] * 3 + [
        Subtask.GET_DISH_FROM_DISPENSER, Subtask.GET_SOUP_FROM_POT, Subtask.SERVE_SOUP]


def test_counter_place_and_pick(tiny):
    s = put(initial_state(tiny), 0, d=Direction.DOWN, held=Item.DISH)
    s, _, ev = step(s, tiny, (Action.INTERACT, Action.STAY))
    assert s.counters == {(2, 1): Item.DISH}
    assert ev[0].subtask == Subtask.PUT_DISH_ON_COUNTER
    s, _, ev = step(s, tiny, (Action.INTERACT, Action.STAY))
    assert s.players[0].held == Item.DISH and not s.counters
    assert ev[0].subtask == Subtask.GET_DISH_FROM_COUNTER


def test_noop_interacts(tiny):
    s = put(initial_state(tiny), 0, d=Direction.UP)  # facing a bare counter, empty hands
    nxt, r, ev = step(s, tiny, (Action.INTERACT, Action.STAY))
    assert ev == [] and r == 0
    # dish into an empty pot does nothing
    s = put(s, 0, pos=(1, 2), d=Direction.UP, held=Item.DISH)
    nxt, _, ev = step(s, tiny, (Action.INTERACT, Action.STAY))
    assert ev == [] and nxt.players[0].held == Item.DISH


def test_step_rejects_bad_input(tiny):
    s = initial_state(tiny)
    with pytest.raises(InvalidStateError):
        step(s, tiny, (Action.STAY,))
    with pytest.raises(ValueError):
        step(s, tiny, ("jump", Action.STAY))
    over = GameState(s.players, s.pots, {}, 0, ROUND_LENGTH)
    with pytest.raises(InvalidStateError, match="over"):
        step(over, tiny, (Action.STAY, Action.STAY))
    bad = put(s, 1, pos=(1, 1))
    with pytest.raises(InvalidStateError, match="share"):
        validate_state(bad, tiny)


@settings(max_examples=40, deadline=None)
@given(name=st.sampled_from(LAYOUT_NAMES),
       actions=st.lists(st.tuples(st.sampled_from(ACTIONS), st.sampled_from(ACTIONS)),
                        min_size=1, max_size=120))
def test_random_play_keeps_invariants(name, actions):
    lay = load_layout(name)
    s = initial_state(lay)
    served = 0
    for a in actions:
        s, r, ev = step(s, lay, a)
        validate_state(s, lay)
        served += sum(e.subtask == Subtask.SERVE_SOUP for e in ev if e.kind == "subtask")
        assert sum(e.kind == "collision" for e in ev) <= 1
        assert r == 20 * sum(e.subtask == Subtask.SERVE_SOUP for e in ev if e.kind == "subtask")
    assert s.score == 20 * served
    assert s.t == len(actions)


# ---------------------------------------------------------------- planners

def test_bfs_distances(tiny):
    d = bfs(tiny, (1, 1))
    assert d[(1, 1)] == (0, None)
    assert d[(1, 3)][0] == 2 and d[(1, 3)][1] == Action.RIGHT
    assert d[(2, 3)][0] == 3 and d[(2, 2)][0] == 2
    assert tile_distance(tiny, (1, 1), (1, 0)) == 0  # already adjacent to the onion dispenser


def test_rigid_fetches_onion_first(layouts):
    for lay in layouts.values():
        p = plan("rigid", initial_state(lay), lay, 1)
        assert lay.tile(p.target) == Tile.ONION_DISPENSER


def test_skill_draws_are_branch_independent(layouts, rng):
    lay = layouts["counter_circuit"]
    s = initial_state(lay)
    a, b = np.random.default_rng(5), np.random.default_rng(5)
    scripted_policy(PolicyKind("rigid", 1.0), s, lay, a)
    scripted_policy(PolicyKind("adaptive", 0.0), s, lay, b)
    assert a.random() == b.random()


def test_skill_zero_equals_random_pick(layouts):
    lay = layouts["coordination_ring"]
    s = initial_state(lay)
    picks = {scripted_policy(PolicyKind("rigid", 0.0), s, lay, np.random.default_rng(i)) for i in range(60)}
    assert len(picks) == len(ACTIONS)


def test_policy_kind_validation():
    with pytest.raises(ValueError):
        PolicyKind("greedy")
    with pytest.raises(ValueError):
        PolicyKind("rigid", 1.5)


@pytest.mark.parametrize("name", LAYOUT_NAMES)
def test_adaptive_pair_outscores_random(name):
    lay = load_layout(name)

    def play(kind, seed):
        rng = np.random.default_rng(seed)
        s = initial_state(lay)
        for _ in range(ROUND_LENGTH):
            acts = (scripted_policy(PolicyKind(kind), s, lay, rng, 0),
                    scripted_policy(PolicyKind(kind), s, lay, rng, 1))
            s = step(s, lay, acts)[0]
        return s.score

    assert play("adaptive", 0) >= 100 > play("random", 0)
