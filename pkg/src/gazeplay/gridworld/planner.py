"""Scripted teammate and human-proxy policies.

``random`` draws one of the six actions uniformly. ``rigid`` walks a fixed
subtask priority list and ignores its partner entirely. ``adaptive`` replans
every step: it skips subtasks the partner has visibly claimed (by what the
partner is carrying) and routes around the partner's current and predicted
next tile.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional

import numpy as np

from .layout import Coord, Layout, Tile
from .state import ACTIONS, DIRECTIONS, Action, GameState, Item, add

POLICY_KINDS = ("random", "rigid", "adaptive")

_DIR_TO_ACTION = {d: Action(d.value) for d in DIRECTIONS}


@dataclass(frozen=True)
class PolicyKind:
    kind: str
    skill: float = 1.0

    def __post_init__(self):
        if self.kind not in POLICY_KINDS:
            raise ValueError(f"unknown policy kind {self.kind!r}")
        if not 0.0 <= self.skill <= 1.0:
            raise ValueError(f"skill must lie in [0, 1], got {self.skill}")


@dataclass(frozen=True)
class Plan:
    action: Action
    target: Optional[Coord]  # object tile the plan is heading for
    next_tile: Coord  # tile the player occupies after following the plan


@lru_cache(maxsize=None)
def _spots(layout: Layout, tile: Coord) -> tuple[tuple[Coord, Action], ...]:
    """Floor tiles adjacent to ``tile`` with the action that faces it."""
    out = []
    for d in DIRECTIONS:
        spot = add(tile, (-d.delta[0], -d.delta[1]))
        if layout.is_floor(spot):
            out.append((spot, _DIR_TO_ACTION[d]))
    return tuple(out)


def bfs(layout: Layout, start: Coord, blocked: frozenset = frozenset()) -> dict[Coord, tuple[int, Optional[Action]]]:
    """Distances over floor tiles with the first action of one shortest path."""
    out: dict[Coord, tuple[int, Optional[Action]]] = {start: (0, None)}
    queue = deque([start])
    while queue:
        cur = queue.popleft()
        dist, first = out[cur]
        for d in DIRECTIONS:
            nxt = add(cur, d.delta)
            if nxt in out or nxt in blocked or not layout.is_floor(nxt):
                continue
            out[nxt] = (dist + 1, first if first is not None else _DIR_TO_ACTION[d])
            queue.append(nxt)
    return out


@lru_cache(maxsize=4096)
def _free_bfs(layout: Layout, start: Coord):
    return bfs(layout, start)


def tile_distance(layout: Layout, start: Coord, tile: Coord) -> float:
    """Steps needed to stand next to ``tile`` starting from ``start``."""
    dist = _free_bfs(layout, start)
    best = min((dist[s][0] for s, _ in _spots(layout, tile) if s in dist), default=None)
    return float("inf") if best is None else float(best)


def _nearest(layout: Layout, start: Coord, tiles) -> Optional[Coord]:
    best, best_d = None, float("inf")
    for tile in sorted(tiles):
        d = tile_distance(layout, start, tile)
        if d < best_d:
            best, best_d = tile, d
    return best


def route(layout: Layout, pos: Coord, orientation, target: Coord,
          blocked: frozenset = frozenset()) -> Optional[tuple[Action, Coord]]:
    """First action toward interacting with ``target`` and the next tile.

    ``None`` when every approach is cut off by ``blocked``.
    """
    for spot, face in _spots(layout, target):
        if spot == pos:
            if add(pos, orientation.delta) == target:
                return Action.INTERACT, pos
            return face, pos  # facing a non-floor tile turns without moving
    spots = {s for s, _ in _spots(layout, target)}
    dist = bfs(layout, pos, blocked) if blocked else _free_bfs(layout, pos)
    reachable = [(dist[s][0], s) for s in spots if s in dist]
    if not reachable:
        return None
    _, spot = min(reachable)
    act = dist[spot][1]
    return act, add(pos, _DIR_TO_ACTION_INV[act].delta)


_DIR_TO_ACTION_INV = {a: d for d, a in _DIR_TO_ACTION.items()}


def _sources(state: GameState, layout: Layout, item: Item, dispenser: Tile) -> list[Coord]:
    return list(layout.tiles_of(dispenser)) + [t for t, it in state.counters.items() if it == item]


def _empty_counters(state: GameState, layout: Layout) -> list[Coord]:
    return [t for t in layout.counters if t not in state.counters]


def _rigid_target(state: GameState, layout: Layout, me: int) -> Optional[Coord]:
    p = state.players[me]
    pots = state.pots
    if p.held == Item.SOUP:
        return _nearest(layout, p.position, layout.tiles_of(Tile.SERVING))
    if p.held == Item.DISH:
        ready = [t for t, pot in pots.items() if pot.full]
        return _nearest(layout, p.position, ready or _empty_counters(state, layout))
    if p.held == Item.ONION:
        room = [t for t, pot in pots.items() if not pot.full]
        return _nearest(layout, p.position, room or _empty_counters(state, layout))
    soups = [t for t, it in state.counters.items() if it == Item.SOUP]
    if soups:
        return _nearest(layout, p.position, soups)
    if any(pot.full for pot in pots.values()):
        return _nearest(layout, p.position, _sources(state, layout, Item.DISH, Tile.DISH_DISPENSER))
    if any(not pot.full for pot in pots.values()):
        return _nearest(layout, p.position, _sources(state, layout, Item.ONION, Tile.ONION_DISPENSER))
    return None


def _adaptive_target(state: GameState, layout: Layout, me: int) -> Optional[Coord]:
    p, q = state.players[me], state.players[1 - me]
    pots = state.pots
    # what the partner's load says it is about to do
    onion_claims = {t: 0 for t in pots}
    dish_claim = None
    if q.held == Item.ONION:
        room = [t for t, pot in pots.items() if not pot.full]
        if room:
            onion_claims[_nearest(layout, q.position, room)] += 1
    elif q.held == Item.DISH:
        ready = [t for t, pot in pots.items() if pot.full]
        if ready:
            dish_claim = _nearest(layout, q.position, ready)

    ready = [t for t, pot in pots.items() if pot.full and t != dish_claim]
    room = [t for t, pot in pots.items() if pot.onion_count + onion_claims[t] < 3]
    if p.held == Item.SOUP:
        return _nearest(layout, p.position, layout.tiles_of(Tile.SERVING))
    if p.held == Item.DISH:
        ready_any = ready or [t for t, pot in pots.items() if pot.full]
        return _nearest(layout, p.position, ready_any or _empty_counters(state, layout))
    if p.held == Item.ONION:
        room_any = room or [t for t, pot in pots.items() if not pot.full]
        return _nearest(layout, p.position, room_any or _empty_counters(state, layout))
    soups = [t for t, it in state.counters.items() if it == Item.SOUP]
    if soups and q.held is not None:
        return _nearest(layout, p.position, soups)
    if ready:
        return _nearest(layout, p.position, _sources(state, layout, Item.DISH, Tile.DISH_DISPENSER))
    if room:
        return _nearest(layout, p.position, _sources(state, layout, Item.ONION, Tile.ONION_DISPENSER))
    if soups:
        return _nearest(layout, p.position, soups)
    return None


def plan(kind: str, state: GameState, layout: Layout, player: int) -> Plan:
    """Deterministic plan for a planning policy (``rigid`` or ``adaptive``)."""
    p = state.players[player]
    if kind == "rigid":
        target = _rigid_target(state, layout, player)
        blocked = frozenset()
    elif kind == "adaptive":
        target = _adaptive_target(state, layout, player)
        q = state.players[1 - player]
        predicted = plan("rigid", state, layout, 1 - player).next_tile
        blocked = frozenset({q.position, predicted}) - {p.position}
    else:
        raise ValueError(f"{kind!r} is not a planning policy")
    if target is None:
        return Plan(Action.STAY, None, p.position)
    routed = route(layout, p.position, p.orientation, target, blocked)
    if routed is None:
        routed = (Action.STAY, p.position) if kind == "rigid" else (None, None)
    act, nxt = routed
    if kind == "adaptive":
        if act == Action.INTERACT and _useless_interact(state, layout, player, target):
            act = Action.STAY
        if act is None or (p.position in blocked and nxt == p.position and act != Action.INTERACT):
            # deterministic coin keeps two adaptive players from yielding in lockstep
            if _coin(state.t, player):
                act, nxt = _step_aside(layout, p.position, target, blocked)
            else:
                act, nxt = Action.STAY, p.position
    return Plan(act, target, nxt)


def _coin(t: int, player: int) -> bool:
    h = (t * 2654435761 + player * 2246822519 + 374761393) & 0xFFFFFFFF
    h = ((h ^ (h >> 15)) * 2246822519) & 0xFFFFFFFF
    return bool((h >> 13) & 1)


def _step_aside(layout: Layout, pos: Coord, target: Coord, blocked: frozenset) -> tuple[Action, Coord]:
    """Yield to the partner: move to a free neighbour, preferring ones near the target."""
    options = []
    for d in DIRECTIONS:
        nxt = add(pos, d.delta)
        if layout.is_floor(nxt) and nxt not in blocked:
            options.append((tile_distance(layout, nxt, target), nxt, _DIR_TO_ACTION[d]))
    if not options:
        return Action.STAY, pos
    _, nxt, act = min(options)
    return act, nxt


def _useless_interact(state: GameState, layout: Layout, player: int, target: Coord) -> bool:
    p = state.players[player]
    if layout.tile(target) == Tile.POT:
        pot = state.pots[target]
        return (p.held == Item.DISH and not pot.done) or (p.held == Item.ONION and pot.full)
    return False


def act_with_plan(kind: PolicyKind, state: GameState, layout: Layout,
                  rng: np.random.Generator, player: int) -> tuple[Action, Optional[Plan]]:
    """Like ``scripted_policy`` but also return the underlying plan (None for random)."""
    if kind.kind == "random":
        return ACTIONS[int(rng.integers(len(ACTIONS)))], None
    u = rng.random()
    alt = ACTIONS[int(rng.integers(len(ACTIONS)))]
    p = plan(kind.kind, state, layout, player)
    return (alt if u < 1.0 - kind.skill else p.action), p


def scripted_policy(kind: PolicyKind, state: GameState, layout: Layout,
                    rng: np.random.Generator, player: int = 1) -> Action:
    """One action for ``player``.

    Planning policies with ``skill < 1`` substitute a uniformly random
    action with probability ``1 - skill``. Each call consumes the same
    number of draws from ``rng`` whichever branch is taken.
    """
    return act_with_plan(kind, state, layout, rng, player)[0]
