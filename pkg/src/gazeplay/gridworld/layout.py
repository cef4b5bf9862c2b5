"""ASCII kitchen layouts.

A layout file holds one character per tile:

    X  counter (impassable, items may be placed on it)
    ' ' floor
    O  onion dispenser
    D  dish dispenser
    P  pot
    S  serving window
    1  spawn of player 0 (the human proxy), floor
    2  spawn of player 1 (the AI teammate), floor
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from enum import IntEnum
from functools import cached_property
from importlib import resources

import numpy as np

LAYOUT_NAMES = ("asymmetric_advantages", "coordination_ring", "counter_circuit")


class Tile(IntEnum):
    FLOOR = 0
    COUNTER = 1
    ONION_DISPENSER = 2
    DISH_DISPENSER = 3
    POT = 4
    SERVING = 5


_CHAR_TO_TILE = {
    " ": Tile.FLOOR,
    "1": Tile.FLOOR,
    "2": Tile.FLOOR,
    "X": Tile.COUNTER,
    "O": Tile.ONION_DISPENSER,
    "D": Tile.DISH_DISPENSER,
    "P": Tile.POT,
    "S": Tile.SERVING,
}


class LayoutError(ValueError):
    pass


Coord = tuple[int, int]


@dataclass(frozen=True, eq=False)
class Layout:
    name: str
    grid: np.ndarray  # (H, W) int array of Tile values
    spawn_points: tuple[Coord, Coord]

    @property
    def shape(self) -> tuple[int, int]:
        return int(self.grid.shape[0]), int(self.grid.shape[1])

    def tile(self, pos: Coord) -> Tile:
        r, c = pos
        h, w = self.shape
        if not (0 <= r < h and 0 <= c < w):
            return Tile.COUNTER
        return Tile(int(self.grid[r, c]))

    def is_floor(self, pos: Coord) -> bool:
        return self.tile(pos) == Tile.FLOOR

    def tiles_of(self, kind: Tile) -> tuple[Coord, ...]:
        rows, cols = np.nonzero(self.grid == kind)
        return tuple((int(r), int(c)) for r, c in zip(rows, cols))

    @cached_property
    def pots(self) -> tuple[Coord, ...]:
        return self.tiles_of(Tile.POT)

    @cached_property
    def counters(self) -> tuple[Coord, ...]:
        return self.tiles_of(Tile.COUNTER)

    @cached_property
    def floor(self) -> tuple[Coord, ...]:
        return self.tiles_of(Tile.FLOOR)

    def to_ascii(self) -> str:
        inv = {Tile.FLOOR: " ", Tile.COUNTER: "X", Tile.ONION_DISPENSER: "O",
               Tile.DISH_DISPENSER: "D", Tile.POT: "P", Tile.SERVING: "S"}
        rows = [[inv[Tile(int(v))] for v in row] for row in self.grid]
        for i, (r, c) in enumerate(self.spawn_points):
            rows[r][c] = str(i + 1)
        return "\n".join("".join(row) for row in rows) + "\n"


def parse_layout(text: str, name: str = "custom") -> Layout:
    lines = [ln for ln in text.split("\n")]
    while lines and lines[-1] == "":
        lines.pop()
    if not lines:
        raise LayoutError(f"{name}: empty layout")
    width = max(len(ln) for ln in lines)
    grid = np.zeros((len(lines), width), dtype=np.int8)
    spawns: dict[str, Coord] = {}
    for r, line in enumerate(lines):
        for c, ch in enumerate(line.ljust(width)):
            if ch not in _CHAR_TO_TILE:
                raise LayoutError(f"{name}: unknown tile {ch!r} at row {r}, col {c}")
            grid[r, c] = _CHAR_TO_TILE[ch]
            if ch in "12":
                if ch in spawns:
                    raise LayoutError(f"{name}: duplicate spawn {ch}")
                spawns[ch] = (r, c)
    if set(spawns) != {"1", "2"}:
        raise LayoutError(f"{name}: need exactly the two spawns '1' and '2'")
    layout = Layout(name, grid, (spawns["1"], spawns["2"]))
    _check_layout(layout)
    return layout


def _check_layout(layout: Layout) -> None:
    g = layout.grid
    border = np.concatenate([g[0], g[-1], g[:, 0], g[:, -1]])
    if np.any(border == Tile.FLOOR):
        raise LayoutError(f"{layout.name}: grid is not enclosed")
    for spawn in layout.spawn_points:
        reach = reachable_floor(layout, spawn)
        for kind in (Tile.ONION_DISPENSER, Tile.DISH_DISPENSER, Tile.POT, Tile.SERVING):
            if not any(_adjacent_floor(layout, t) & reach for t in layout.tiles_of(kind)):
                raise LayoutError(f"{layout.name}: {kind.name} unreachable from {spawn}")


def _adjacent_floor(layout: Layout, tile: Coord) -> set[Coord]:
    r, c = tile
    out = set()
    for dr, dc in ((-1, 0), (1, 0), (0, -1), (0, 1)):
        if layout.is_floor((r + dr, c + dc)):
            out.add((r + dr, c + dc))
    return out


def reachable_floor(layout: Layout, start: Coord) -> set[Coord]:
    seen = {start}
    queue = deque([start])
    while queue:
        r, c = queue.popleft()
        for dr, dc in ((-1, 0), (1, 0), (0, -1), (0, 1)):
            nxt = (r + dr, c + dc)
            if nxt not in seen and layout.is_floor(nxt):
                seen.add(nxt)
                queue.append(nxt)
    return seen


_CACHE: dict[str, Layout] = {}


def load_layout(name: str) -> Layout:
    """Load one of the bundled layouts by name."""
    if name not in LAYOUT_NAMES:
        raise LayoutError(f"unknown layout {name!r}; expected one of {LAYOUT_NAMES}")
    if name not in _CACHE:
        text = resources.files("gazeplay.gridworld") / "layouts" / f"{name}.layout"
        text = text.read_text(encoding="utf-8")
        _CACHE[name] = parse_layout(text, name)
    return _CACHE[name]
