"""Model inputs built from a session: state grids, gaze heatmaps and their summaries.

Channel layout of the 27-channel state encoding (all other cells zero):

    0      human position              1      teammate position
    2-5    human orientation (up, down, left, right), at the human's tile
    6-9    teammate orientation, at the teammate's tile
    10-12  held onion / dish / soup, at the holder's tile
    13     soup resting on a counter (mirror of 24)
    14-18  static masks: counter, onion dispenser, dish dispenser, pot, serving window
    19     onions in pot               20     cook timer remaining
    21     pot done
    22-24  onion / dish / soup resting on a counter
    25     soups served so far (score / 20), every cell
    26     t / 400, every cell
"""

from __future__ import annotations

import json
import os
import struct
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .gridworld.layout import Coord, Layout, Tile, load_layout
from .gridworld.state import (
    DIRECTIONS, HUMAN, ROUND_LENGTH, SOUP_REWARD, FPS, GameState, InvalidStateError, Item,
    PlayerState, PotState, validate_state,
)
from .sessions import GazeSample, GazeStream, SessionLog, ViewportMap, atomic_write_text

N_CHANNELS = 27
CH_POS = (0, 1)
CH_DIR = (2, 6)
CH_HELD = 10
CH_SOUP_ON_COUNTER = 13
CH_STATIC = 14
CH_POT_ONIONS, CH_POT_TIMER, CH_POT_DONE = 19, 20, 21
CH_LOOSE = 22
CH_SERVED = 25
CH_TIME = 26

_ITEMS = (Item.ONION, Item.DISH, Item.SOUP)
_STATIC = (Tile.COUNTER, Tile.ONION_DISPENSER, Tile.DISH_DISPENSER, Tile.POT, Tile.SERVING)

KINDS = ("game", "gaze", "game_plus_gaze", "collapsed_gaze", "gaze_object")
SEQUENCE_KINDS = ("game", "gaze", "game_plus_gaze")
AGGREGATE_KINDS = ("collapsed_gaze", "gaze_object")


class DecodeError(ValueError):
    pass


# ------------------------------------------------------------ state encoding

def static_channels(layout: Layout) -> np.ndarray:
    return np.stack([(layout.grid == k) for k in _STATIC], axis=-1).astype(np.float32)


def encode_state(state: GameState, layout: Layout, dtype=np.float32) -> np.ndarray:
    """Lossless (H, W, 27) grid for one timestep."""
    h, w = layout.shape
    enc = np.zeros((h, w, N_CHANNELS), dtype=dtype)
    for i, p in enumerate(state.players):
        r, c = p.position
        enc[r, c, CH_POS[i]] = 1
        enc[r, c, CH_DIR[i] + DIRECTIONS.index(p.orientation)] = 1
        if p.held is not None:
            enc[r, c, CH_HELD + _ITEMS.index(p.held)] = 1
    enc[:, :, CH_STATIC:CH_STATIC + 5] = static_channels(layout)
    for (r, c), pot in state.pots.items():
        enc[r, c, CH_POT_ONIONS] = pot.onion_count
        enc[r, c, CH_POT_TIMER] = pot.cook_timer
        enc[r, c, CH_POT_DONE] = pot.done
    for (r, c), item in state.counters.items():
        enc[r, c, CH_LOOSE + _ITEMS.index(item)] = 1
        if item == Item.SOUP:
            enc[r, c, CH_SOUP_ON_COUNTER] = 1
    enc[:, :, CH_SERVED] = state.score // SOUP_REWARD
    enc[:, :, CH_TIME] = state.t / ROUND_LENGTH
    return enc


def _one_hot_cell(plane: np.ndarray, what: str) -> Coord:
    hits = np.argwhere(plane != 0)
    if len(hits) != 1 or plane[tuple(hits[0])] != 1:
        raise DecodeError(f"{what}: expected exactly one cell set to 1, found {len(hits)} nonzero")
    return int(hits[0][0]), int(hits[0][1])


def _int_value(x, what: str) -> int:
    v = float(x)
    if v != round(v):
        raise DecodeError(f"{what}: non-integer value {v}")
    return int(round(v))


def decode_state(enc: np.ndarray, layout: Layout) -> GameState:
    """Exact inverse of ``encode_state``; raises DecodeError on inconsistent input."""
    enc = np.asarray(enc)
    h, w = layout.shape
    if enc.shape != (h, w, N_CHANNELS):
        raise DecodeError(f"expected shape {(h, w, N_CHANNELS)}, got {enc.shape}")
    if not np.all(np.isfinite(enc)):
        raise DecodeError("non-finite values")
    used = np.zeros((h, w, N_CHANNELS), dtype=bool)

    players = []
    for i in range(2):
        pos = _one_hot_cell(enc[:, :, CH_POS[i]], f"player {i} position")
        used[:, :, CH_POS[i]] = True
        dirs = enc[pos[0], pos[1], CH_DIR[i]:CH_DIR[i] + 4]
        if sorted(dirs.tolist()) != [0, 0, 0, 1]:
            raise DecodeError(f"player {i} orientation is not one-hot")
        used[pos[0], pos[1], CH_DIR[i]:CH_DIR[i] + 4] = True
        held_vec = enc[pos[0], pos[1], CH_HELD:CH_HELD + 3]
        if np.any((held_vec != 0) & (held_vec != 1)) or held_vec.sum() > 1:
            raise DecodeError(f"player {i} held item is not one-hot")
        used[pos[0], pos[1], CH_HELD:CH_HELD + 3] = True
        held = _ITEMS[int(np.argmax(held_vec))] if held_vec.sum() == 1 else None
        players.append(PlayerState(pos, DIRECTIONS[int(np.argmax(dirs))], held))
    # held-item cells off both players must be empty
    held_planes = enc[:, :, CH_HELD:CH_HELD + 3].copy()
    for p in players:
        held_planes[p.position[0], p.position[1]] = 0
    if np.any(held_planes):
        raise DecodeError("held item away from any player")
    for i in range(2):
        away = enc[:, :, CH_DIR[i]:CH_DIR[i] + 4].copy()
        away[players[i].position[0], players[i].position[1]] = 0
        if np.any(away):
            raise DecodeError(f"player {i} orientation set away from its tile")

    if not np.array_equal(enc[:, :, CH_STATIC:CH_STATIC + 5], static_channels(layout)):
        raise DecodeError("static masks do not match the layout")

    pots = {}
    pot_mask = layout.grid == Tile.POT
    for ch in (CH_POT_ONIONS, CH_POT_TIMER, CH_POT_DONE):
        if np.any(enc[:, :, ch][~pot_mask]):
            raise DecodeError(f"channel {ch} set outside pots")
    for (r, c) in layout.pots:
        pot = PotState(_int_value(enc[r, c, CH_POT_ONIONS], f"pot {(r, c)} onions"),
                       _int_value(enc[r, c, CH_POT_TIMER], f"pot {(r, c)} timer"))
        if float(enc[r, c, CH_POT_DONE]) != float(pot.done):
            raise DecodeError(f"pot {(r, c)} done flag inconsistent")
        pots[(r, c)] = pot

    loose = enc[:, :, CH_LOOSE:CH_LOOSE + 3]
    if np.any((loose != 0) & (loose != 1)) or np.any(loose.sum(axis=-1) > 1):
        raise DecodeError("counter items are not one-hot")
    if not np.array_equal(enc[:, :, CH_SOUP_ON_COUNTER], loose[:, :, 2]):
        raise DecodeError("soup-on-counter mirror disagrees with counter items")
    counters = {}
    for r, c, k in np.argwhere(loose == 1):
        counters[(int(r), int(c))] = _ITEMS[int(k)]

    for ch in (CH_SERVED, CH_TIME):
        if np.ptp(enc[:, :, ch]) != 0:
            raise DecodeError(f"channel {ch} is not constant")
    served = _int_value(enc[0, 0, CH_SERVED], "soups served")
    t = int(round(float(enc[0, 0, CH_TIME]) * ROUND_LENGTH))
    if abs(t / ROUND_LENGTH - float(enc[0, 0, CH_TIME])) > 1e-6:
        raise DecodeError("time channel is not a multiple of 1/400")

    state = GameState(tuple(players), pots, counters, served * SOUP_REWARD, t)
    try:
        validate_state(state, layout)
    except InvalidStateError as exc:
        raise DecodeError(str(exc)) from None
    return state


# ----------------------------------------------------------------- gaze

def preprocess_gaze(sample: GazeSample, viewport: ViewportMap) -> Optional[Coord]:
    """Tile looked at: binocular average, else the one valid eye; None if null or off-grid."""
    eyes = [e for e in (sample.left, sample.right) if e is not None]
    if not eyes:
        return None
    x = sum(e[0] for e in eyes) / len(eyes)
    y = sum(e[1] for e in eyes) / len(eyes)
    return viewport.pixel_to_tile(x, y)


def gaze_points(stream: GazeStream) -> np.ndarray:
    """(n, 2) screen points: the eye average, the single valid eye, or NaN."""
    l_ok = ~np.isnan(stream.left[:, 0])
    r_ok = ~np.isnan(stream.right[:, 0])
    pts = np.full((len(stream), 2), np.nan)
    both = l_ok & r_ok
    pts[both] = (stream.left[both] + stream.right[both]) / 2
    pts[l_ok & ~r_ok] = stream.left[l_ok & ~r_ok]
    pts[r_ok & ~l_ok] = stream.right[r_ok & ~l_ok]
    return pts


def gaze_tiles(stream: GazeStream, viewport: ViewportMap) -> np.ndarray:
    """(n, 2) tiles per sample; rows of -1 for null or off-grid samples."""
    return viewport.pixels_to_tiles(gaze_points(stream))


def gaze_heatmap(samples: GazeStream, viewport: ViewportMap, grid_dims=None) -> np.ndarray:
    """Share of the valid in-bounds samples that land on each tile (zeros if none do)."""
    h, w = grid_dims or viewport.grid_dims
    tiles = gaze_tiles(samples, viewport)
    ok = tiles[:, 0] >= 0
    counts = np.bincount(tiles[ok, 0] * w + tiles[ok, 1], minlength=h * w).astype(np.float64)
    total = counts.sum()
    if total == 0:
        return np.zeros((h, w))
    return (counts / total).reshape(h, w)


def gaze_object_ratios(samples: GazeStream, state: GameState, viewport: ViewportMap,
                       player: int = HUMAN) -> np.ndarray:
    """(own agent, teammate, environment) shares of the valid in-bounds samples."""
    tiles = gaze_tiles(samples, viewport)
    tiles = tiles[tiles[:, 0] >= 0]
    if len(tiles) == 0:
        return np.zeros(3)
    own = np.all(tiles == state.players[player].position, axis=1)
    mate = np.all(tiles == state.players[1 - player].position, axis=1)
    n = len(tiles)
    n_own, n_mate = int(own.sum()), int(mate.sum())
    return np.array([n_own / n, n_mate / n, (n - n_own - n_mate) / n])


def timestep_slices(session: SessionLog) -> np.ndarray:
    """(T, 2) [start, stop) gaze indices per game timestep.

    A sample belongs to timestep t when game[t].ts <= ts < game[t+1].ts; the
    last timestep closes one frame after its start.
    """
    edges = np.array([r.ts for r in session.game] + [session.game[-1].ts + 1.0 / FPS])
    idx = np.searchsorted(session.gaze.ts, edges, side="left")
    return np.stack([idx[:-1], idx[1:]], axis=1)


# -------------------------------------------------------- representations

@dataclass(frozen=True)
class WindowSpec:
    start_t: int = 0
    length: int = 20

    def __post_init__(self):
        if self.start_t < 0 or self.length < 1 or self.start_t + self.length > ROUND_LENGTH:
            raise ValueError(f"window [{self.start_t}, {self.start_t + self.length}) outside the round")

    @property
    def stop_t(self) -> int:
        return self.start_t + self.length

    @property
    def tag(self) -> str:
        return f"w{self.start_t:03d}-{self.length:02d}"


@dataclass(frozen=True)
class Representation:
    kind: str
    window: WindowSpec
    data: np.ndarray

    def model_input(self) -> np.ndarray:
        """Flattened per timestep (L, D) for sequence kinds, a vector otherwise."""
        if self.kind in SEQUENCE_KINDS:
            return self.data.reshape(self.data.shape[0], -1)
        return self.data.reshape(-1)


class SessionFeaturizer:
    """Caches per-timestep encodings so several kinds and windows share the work."""

    def __init__(self, session: SessionLog, viewport: Optional[ViewportMap] = None,
                 layout: Optional[Layout] = None):
        self.session = session
        self.layout = layout or load_layout(session.meta.layout)
        self.viewport = viewport or ViewportMap.centered(self.layout)
        self._slices = timestep_slices(session)
        self._tiles = gaze_tiles(session.gaze, self.viewport)

    def state_grid(self, t: int) -> np.ndarray:
        return encode_state(self.session.game[t].state, self.layout)

    def samples(self, t: int) -> GazeStream:
        a, b = self._slices[t]
        return self.session.gaze[a:b]

    def heatmap(self, t: int) -> np.ndarray:
        h, w = self.layout.shape
        a, b = self._slices[t]
        tiles = self._tiles[a:b]
        tiles = tiles[tiles[:, 0] >= 0]
        if len(tiles) == 0:
            return np.zeros((h, w))
        counts = np.bincount(tiles[:, 0] * w + tiles[:, 1], minlength=h * w).astype(np.float64)
        return (counts / counts.sum()).reshape(h, w)

    def object_ratios(self, t: int) -> np.ndarray:
        return gaze_object_ratios(self.samples(t), self.session.game[t].state, self.viewport)

    def build(self, window: WindowSpec, kind: str) -> Representation:
        ts = range(window.start_t, window.stop_t)
        if kind == "game":
            data = np.stack([self.state_grid(t) for t in ts])
        elif kind == "gaze":
            data = np.stack([self.heatmap(t) for t in ts])
        elif kind == "game_plus_gaze":
            data = np.concatenate([np.stack([self.state_grid(t) for t in ts]).astype(np.float64),
                                   np.stack([self.heatmap(t) for t in ts])[..., None]], axis=-1)
        elif kind == "collapsed_gaze":
            data = np.stack([self.heatmap(t) for t in ts]).mean(axis=0)
        elif kind == "gaze_object":
            ratios = np.stack([self.object_ratios(t) for t in ts])
            seen = ratios.sum(axis=1) > 0
            data = ratios[seen].mean(axis=0) if seen.any() else np.zeros(3)
        else:
            raise ValueError(f"unknown representation kind {kind!r}")
        return Representation(kind, window, data)


def build_representation(session: SessionLog, window: WindowSpec, kind: str,
                         viewport: Optional[ViewportMap] = None) -> Representation:
    return SessionFeaturizer(session, viewport).build(window, kind)


# --------------------------------------------------------------- archives

_MAGIC = b"GZT1"


def write_archive(path, array: np.ndarray, sidecar: dict) -> None:
    """Tensor as magic + uint32 ndim + uint32 dims + little-endian float32, plus a JSON sidecar."""
    arr = np.ascontiguousarray(array, dtype="<f4")
    header = _MAGIC + struct.pack("<I", arr.ndim) + struct.pack(f"<{arr.ndim}I", *arr.shape)
    path = os.fspath(path)
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    tmp = path + ".tmp"
    with open(tmp, "wb") as fh:
        fh.write(header + arr.tobytes())
    os.replace(tmp, path)
    atomic_write_text(sidecar_path(path), json.dumps(sidecar, sort_keys=True, indent=1) + "\n")


def sidecar_path(path) -> str:
    return os.fspath(path) + ".json"


def read_archive(path) -> tuple[np.ndarray, dict]:
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:4] != _MAGIC:
        raise ValueError(f"{path}: not a tensor archive")
    (ndim,) = struct.unpack_from("<I", blob, 4)
    shape = struct.unpack_from(f"<{ndim}I", blob, 8)
    offset = 8 + 4 * ndim
    arr = np.frombuffer(blob, dtype="<f4", offset=offset).reshape(shape).astype(np.float32)
    with open(sidecar_path(path), encoding="utf-8") as fh:
        sidecar = json.load(fh)
    return arr, sidecar


def stack_inputs(kind: str, arrays) -> np.ndarray:
    """Stack representation data from many sessions as float32 model inputs.

    Grids from differently sized layouts are zero-padded at the bottom and
    right to the largest grid; sequence kinds become (N, L, D), aggregated
    kinds (N, D).
    """
    arrays = list(arrays)
    if kind == "gaze_object":
        return np.stack(arrays).astype(np.float32)
    grid_axes = (1, 2) if kind in SEQUENCE_KINDS else (0, 1)
    h = max(a.shape[grid_axes[0]] for a in arrays)
    w = max(a.shape[grid_axes[1]] for a in arrays)
    out = []
    for a in arrays:
        pad = [(0, 0)] * a.ndim
        pad[grid_axes[0]] = (0, h - a.shape[grid_axes[0]])
        pad[grid_axes[1]] = (0, w - a.shape[grid_axes[1]])
        a = np.pad(a.astype(np.float32), pad)
        out.append(a.reshape(a.shape[0], -1) if kind in SEQUENCE_KINDS else a.reshape(-1))
    return np.stack(out)


def modality_blocks(kind: str, dim: int) -> np.ndarray:
    """Per-column modality id of a stacked input: 0 for game state, 1 for gaze.

    Only ``game_plus_gaze`` mixes the two; its flattened columns cycle through
    the 27 game channels followed by the heatmap channel.
    """
    if kind == "game_plus_gaze":
        return (np.arange(dim) % (N_CHANNELS + 1) == N_CHANNELS).astype(np.int64)
    return np.full(dim, 0 if kind == "game" else 1, dtype=np.int64)
