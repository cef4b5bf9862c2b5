"""Game state and the deterministic two-player transition function."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import Enum, IntEnum
from typing import Optional, Sequence

from .layout import Coord, Layout, Tile

ROUND_LENGTH = 400
FPS = 5
COOK_TIME = 20
SOUP_REWARD = 20
ONIONS_PER_SOUP = 3

HUMAN = 0
TEAMMATE = 1


class Action(str, Enum):
    UP = "up"
    DOWN = "down"
    LEFT = "left"
    RIGHT = "right"
    INTERACT = "interact"
    STAY = "stay"


ACTIONS = tuple(Action)


class Direction(str, Enum):
    UP = "up"
    DOWN = "down"
    LEFT = "left"
    RIGHT = "right"

    @property
    def delta(self) -> Coord:
        return _DELTAS[self]


_DELTAS = {
    Direction.UP: (-1, 0),
    Direction.DOWN: (1, 0),
    Direction.LEFT: (0, -1),
    Direction.RIGHT: (0, 1),
}

DIRECTIONS = tuple(Direction)

MOVE_DIRECTION = {
    Action.UP: Direction.UP,
    Action.DOWN: Direction.DOWN,
    Action.LEFT: Direction.LEFT,
    Action.RIGHT: Direction.RIGHT,
}


class Item(str, Enum):
    ONION = "onion"
    DISH = "dish"
    SOUP = "soup"


class Subtask(IntEnum):
    GET_ONION_FROM_DISPENSER = 0
    GET_ONION_FROM_COUNTER = 1
    PUT_ONION_IN_POT = 2
    PUT_ONION_ON_COUNTER = 3
    GET_DISH_FROM_DISPENSER = 4
    GET_DISH_FROM_COUNTER = 5
    PUT_DISH_ON_COUNTER = 6
    GET_SOUP_FROM_POT = 7
    GET_SOUP_FROM_COUNTER = 8
    PUT_SOUP_ON_COUNTER = 9
    SERVE_SOUP = 10


N_SUBTASKS = len(Subtask)


class InvalidStateError(ValueError):
    """A GameState that cannot occur in the given layout."""


def add(pos: Coord, delta: Coord) -> Coord:
    return pos[0] + delta[0], pos[1] + delta[1]


@dataclass(frozen=True)
class PlayerState:
    position: Coord
    orientation: Direction = Direction.UP
    held: Optional[Item] = None

    @property
    def facing(self) -> Coord:
        return add(self.position, self.orientation.delta)


@dataclass(frozen=True)
class PotState:
    onion_count: int = 0
    cook_timer: int = 0  # remaining timesteps; meaningful once onion_count == 3

    @property
    def full(self) -> bool:
        return self.onion_count == ONIONS_PER_SOUP

    @property
    def done(self) -> bool:
        return self.full and self.cook_timer == 0

    @property
    def cooking(self) -> bool:
        return self.full and self.cook_timer > 0


@dataclass(frozen=True)
class Event:
    kind: str  # "subtask" or "collision"
    player: Optional[int] = None
    subtask: Optional[Subtask] = None

    def to_json(self) -> dict:
        if self.kind == "collision":
            return {"type": "collision"}
        return {"type": "subtask", "player": self.player, "subtask": int(self.subtask)}

    @classmethod
    def from_json(cls, obj: dict) -> "Event":
        if obj["type"] == "collision":
            return cls("collision")
        if obj["type"] != "subtask":
            raise ValueError(f"unknown event type {obj['type']!r}")
        return cls("subtask", int(obj["player"]), Subtask(int(obj["subtask"])))


@dataclass(frozen=True)
class GameState:
    players: tuple[PlayerState, PlayerState]
    pots: dict = field(default_factory=dict)  # Coord -> PotState
    counters: dict = field(default_factory=dict)  # Coord -> Item
    score: int = 0
    t: int = 0

    def with_player(self, i: int, player: PlayerState) -> "GameState":
        players = list(self.players)
        players[i] = player
        return replace(self, players=tuple(players))


def initial_state(layout: Layout) -> GameState:
    players = tuple(PlayerState(p, Direction.UP, None) for p in layout.spawn_points)
    return GameState(players, {p: PotState() for p in layout.pots}, {}, 0, 0)


def validate_state(state: GameState, layout: Layout) -> None:
    if len(state.players) != 2:
        raise InvalidStateError("exactly two players required")
    for i, p in enumerate(state.players):
        if not layout.is_floor(p.position):
            raise InvalidStateError(f"player {i} at {p.position} is not on floor")
        if not isinstance(p.orientation, Direction):
            raise InvalidStateError(f"player {i} has bad orientation {p.orientation!r}")
        if p.held is not None and not isinstance(p.held, Item):
            raise InvalidStateError(f"player {i} holds unknown item {p.held!r}")
    if state.players[0].position == state.players[1].position:
        raise InvalidStateError("players share a tile")
    if set(state.pots) != set(layout.pots):
        raise InvalidStateError("pot map does not match the layout's pots")
    for tile, pot in state.pots.items():
        if not 0 <= pot.onion_count <= ONIONS_PER_SOUP:
            raise InvalidStateError(f"pot {tile} onion_count {pot.onion_count} out of range")
        if not 0 <= pot.cook_timer <= COOK_TIME or (pot.cook_timer and not pot.full):
            raise InvalidStateError(f"pot {tile} cook_timer {pot.cook_timer} inconsistent")
    for tile, item in state.counters.items():
        if layout.tile(tile) != Tile.COUNTER:
            raise InvalidStateError(f"item placed on non-counter tile {tile}")
        if not isinstance(item, Item):
            raise InvalidStateError(f"unknown counter item {item!r}")
    if state.score < 0 or state.score % SOUP_REWARD:
        raise InvalidStateError(f"score {state.score} is not a non-negative multiple of 20")
    if not 0 <= state.t <= ROUND_LENGTH:
        raise InvalidStateError(f"timestep {state.t} out of range")


def _interact(player: PlayerState, layout: Layout, pots: dict, counters: dict):
    """Apply one interact in place on pots/counters; return (player, reward, subtask)."""
    target = player.facing
    kind = layout.tile(target)
    held = player.held
    if kind == Tile.ONION_DISPENSER and held is None:
        return replace(player, held=Item.ONION), 0, Subtask.GET_ONION_FROM_DISPENSER
    if kind == Tile.DISH_DISPENSER and held is None:
        return replace(player, held=Item.DISH), 0, Subtask.GET_DISH_FROM_DISPENSER
    if kind == Tile.COUNTER:
        on_counter = counters.get(target)
        if held is None and on_counter is not None:
            del counters[target]
            sub = {Item.ONION: Subtask.GET_ONION_FROM_COUNTER,
                   Item.DISH: Subtask.GET_DISH_FROM_COUNTER,
                   Item.SOUP: Subtask.GET_SOUP_FROM_COUNTER}[on_counter]
            return replace(player, held=on_counter), 0, sub
        if held is not None and on_counter is None:
            counters[target] = held
            sub = {Item.ONION: Subtask.PUT_ONION_ON_COUNTER,
                   Item.DISH: Subtask.PUT_DISH_ON_COUNTER,
                   Item.SOUP: Subtask.PUT_SOUP_ON_COUNTER}[held]
            return replace(player, held=None), 0, sub
    if kind == Tile.POT:
        pot = pots[target]
        if held == Item.ONION and not pot.full:
            count = pot.onion_count + 1
            pots[target] = PotState(count, COOK_TIME if count == ONIONS_PER_SOUP else 0)
            return replace(player, held=None), 0, Subtask.PUT_ONION_IN_POT
        if held == Item.DISH and pot.done:
            pots[target] = PotState()
            return replace(player, held=Item.SOUP), 0, Subtask.GET_SOUP_FROM_POT
    if kind == Tile.SERVING and held == Item.SOUP:
        return replace(player, held=None), SOUP_REWARD, Subtask.SERVE_SOUP
    return player, 0, None


def step(state: GameState, layout: Layout, actions: Sequence) -> tuple[GameState, int, list[Event]]:
    """Advance one timestep.

    Cook timers tick first, then movement (with the symmetric collision rule),
    then interacts in player order.
    """
    validate_state(state, layout)
    if state.t >= ROUND_LENGTH:
        raise InvalidStateError(f"round is over at t={state.t}")
    if len(actions) != 2:
        raise InvalidStateError("need one action per player")
    acts = [Action(a) for a in actions]

    pots = {tile: (PotState(p.onion_count, p.cook_timer - 1) if p.cooking else p)
            for tile, p in state.pots.items()}
    counters = dict(state.counters)
    events: list[Event] = []

    players = list(state.players)
    old = [p.position for p in players]
    new = list(old)
    for i, act in enumerate(acts):
        if act in MOVE_DIRECTION:
            d = MOVE_DIRECTION[act]
            players[i] = replace(players[i], orientation=d)
            target = add(old[i], d.delta)
            if layout.is_floor(target):
                new[i] = target
    collided = new[0] == new[1] or (new[0] == old[1] and new[1] == old[0])
    if collided:
        new = old
    for i in range(2):
        players[i] = replace(players[i], position=new[i])

    reward = 0
    for i, act in enumerate(acts):
        if act == Action.INTERACT:
            players[i], r, sub = _interact(players[i], layout, pots, counters)
            reward += r
            if sub is not None:
                events.append(Event("subtask", i, sub))
    if collided:
        events.append(Event("collision"))

    nxt = GameState(tuple(players), pots, counters, state.score + reward, state.t + 1)
    return nxt, reward, events
