"""Session logs: one 400-step round of paired gameplay and eye-gaze data.

On disk a session is UTF-8 JSON lines::

    {"version":1,"meta":{...}}
    {"k":"game","t":0,"ts":0.000000,"state":{...},"actions":[...],"reward":0,"events":[...]}
    ...
    {"k":"gaze","ts":0.003333,"left":[x,y],"right":null,"pupil":3.41}
    ...
    {"k":"survey","fluency":4,"significance":3,"trust":5,"understanding":4,"cooperativeness":5}

A null eye is JSON ``null``. Timestamps are written as plain decimals with at
least six fractional digits, and with as many more as needed to read back the
exact same float.
"""

from __future__ import annotations

import json
import math
import os
import tempfile
from dataclasses import dataclass, field
from decimal import Decimal
from typing import Iterable, Iterator, Optional, Sequence

import numpy as np

from .gridworld.layout import Coord, Layout, load_layout
from .gridworld.state import (
    ROUND_LENGTH, SOUP_REWARD, Action, Direction, Event, GameState, InvalidStateError,
    Item, PlayerState, PotState, validate_state,
)

FORMAT_VERSION = 1
SAMPLES_PER_STEP = 60
EXPECTED_SAMPLES = SAMPLES_PER_STEP * ROUND_LENGTH
MAX_MISSING_FRACTION = 0.40
SURVEY_ITEMS = ("fluency", "significance", "trust", "understanding", "cooperativeness")


class SessionError(Exception):
    pass


class SessionParseError(SessionError):
    def __init__(self, line: int, msg: str):
        super().__init__(f"line {line}: {msg}")
        self.line = line


class SessionValidationError(SessionError):
    def __init__(self, path: str, msg: str):
        super().__init__(f"{path}: {msg}" if path else msg)
        self.path = path


@dataclass(frozen=True)
class ViewportMap:
    """Where the game grid sits on the display."""

    origin_px: tuple[float, float]  # (x, y) of the top-left corner of tile (0, 0)
    tile_px: float
    grid_dims: tuple[int, int]  # (H, W)

    def __post_init__(self):
        if not self.tile_px > 0:
            raise ValueError("tile_px must be positive")

    @classmethod
    def centered(cls, layout: Layout, screen_px=(1920, 1080), tile_px: float = 100.0) -> "ViewportMap":
        h, w = layout.shape
        ox = (screen_px[0] - w * tile_px) / 2
        oy = (screen_px[1] - h * tile_px) / 2
        return cls((ox, oy), tile_px, (h, w))

    def tile_center(self, tile: Coord) -> tuple[float, float]:
        r, c = tile
        return (self.origin_px[0] + (c + 0.5) * self.tile_px,
                self.origin_px[1] + (r + 0.5) * self.tile_px)

    def pixel_to_tile(self, x: float, y: float) -> Optional[Coord]:
        col = math.floor((x - self.origin_px[0]) / self.tile_px)
        row = math.floor((y - self.origin_px[1]) / self.tile_px)
        h, w = self.grid_dims
        if 0 <= row < h and 0 <= col < w:
            return row, col
        return None

    def pixels_to_tiles(self, xy: np.ndarray) -> np.ndarray:
        """Vectorised ``pixel_to_tile``: (n, 2) pixels -> (n, 2) int tiles, -1 where off-grid or NaN."""
        xy = np.asarray(xy, dtype=np.float64)
        out = np.full(xy.shape, -1, dtype=np.int64)
        with np.errstate(invalid="ignore"):
            col = np.floor((xy[:, 0] - self.origin_px[0]) / self.tile_px)
            row = np.floor((xy[:, 1] - self.origin_px[1]) / self.tile_px)
            h, w = self.grid_dims
            ok = (row >= 0) & (row < h) & (col >= 0) & (col < w)
        out[ok, 0] = row[ok]
        out[ok, 1] = col[ok]
        return out


@dataclass(frozen=True)
class GazeSample:
    ts: float
    left: Optional[tuple[float, float]]
    right: Optional[tuple[float, float]]
    pupil: Optional[float] = None


def _eye(a: np.ndarray) -> Optional[tuple[float, float]]:
    if np.isnan(a[0]):
        return None
    return float(a[0]), float(a[1])


class GazeStream:
    """Column-oriented gaze samples; a null eye or pupil is stored as NaN."""

    __slots__ = ("ts", "left", "right", "pupil")

    def __init__(self, ts, left, right, pupil=None):
        self.ts = np.asarray(ts, dtype=np.float64).reshape(-1)
        n = len(self.ts)
        self.left = np.asarray(left, dtype=np.float64).reshape(n, 2)
        self.right = np.asarray(right, dtype=np.float64).reshape(n, 2)
        self.pupil = (np.full(n, np.nan) if pupil is None
                      else np.asarray(pupil, dtype=np.float64).reshape(n))
        for a in (self.ts, self.left, self.right, self.pupil):
            a.flags.writeable = False

    @classmethod
    def from_samples(cls, samples: Iterable[GazeSample]) -> "GazeStream":
        samples = list(samples)
        nan2 = (np.nan, np.nan)
        return cls([s.ts for s in samples],
                   [s.left if s.left is not None else nan2 for s in samples],
                   [s.right if s.right is not None else nan2 for s in samples],
                   [s.pupil if s.pupil is not None else np.nan for s in samples])

    @classmethod
    def empty(cls) -> "GazeStream":
        return cls(np.zeros(0), np.zeros((0, 2)), np.zeros((0, 2)), np.zeros(0))

    def __len__(self) -> int:
        return len(self.ts)

    def __getitem__(self, i):
        if isinstance(i, slice) or isinstance(i, np.ndarray):
            return GazeStream(self.ts[i], self.left[i], self.right[i], self.pupil[i])
        p = self.pupil[i]
        return GazeSample(float(self.ts[i]), _eye(self.left[i]), _eye(self.right[i]),
                          None if np.isnan(p) else float(p))

    def __iter__(self) -> Iterator[GazeSample]:
        for i in range(len(self)):
            yield self[i]

    def __eq__(self, other) -> bool:
        if not isinstance(other, GazeStream):
            return NotImplemented
        return all(np.array_equal(a, b, equal_nan=True) for a, b in
                   ((self.ts, other.ts), (self.left, other.left),
                    (self.right, other.right), (self.pupil, other.pupil)))

    def both_null(self) -> np.ndarray:
        return np.isnan(self.left[:, 0]) & np.isnan(self.right[:, 0])


@dataclass(frozen=True)
class GameRecord:
    t: int
    ts: float
    state: GameState  # state at the start of timestep t
    actions: tuple[Action, Action]
    reward: int
    events: tuple[Event, ...] = ()


@dataclass(frozen=True)
class SessionMeta:
    participant_id: str
    trial_id: int
    layout: str
    agent: str
    seed: int
    proxy: dict = field(default_factory=dict)  # policy kind, skill and gaze profile of the human proxy

    @property
    def session_id(self) -> str:
        return f"{self.participant_id}_r{self.trial_id:02d}"


@dataclass(frozen=True)
class SessionLog:
    meta: SessionMeta
    game: tuple[GameRecord, ...]
    gaze: GazeStream
    survey: Optional[dict] = None  # SURVEY_ITEMS -> Likert answer 0..6

    @property
    def session_id(self) -> str:
        return self.meta.session_id

    @property
    def final_score(self) -> int:
        last = self.game[-1]
        return last.state.score + last.reward


# ---------------------------------------------------------------- validation

def validate_session(session: SessionLog, layout: Optional[Layout] = None) -> None:
    """Raise SessionValidationError naming the first offending field."""
    meta = session.meta
    try:
        layout = layout or load_layout(meta.layout)
    except ValueError as exc:
        raise SessionValidationError("meta.layout", str(exc)) from None
    if len(session.game) != ROUND_LENGTH:
        raise SessionValidationError(
            "game", f"expected {ROUND_LENGTH} records, found {len(session.game)}")
    prev_ts = -math.inf
    for i, rec in enumerate(session.game):
        path = f"game[{i}]"
        if rec.t != i:
            raise SessionValidationError(f"{path}.t", f"expected {i}, found {rec.t}")
        if not rec.ts > prev_ts:
            raise SessionValidationError(f"{path}.ts", "timestamps must increase")
        prev_ts = rec.ts
        if rec.state.t != i:
            raise SessionValidationError(f"{path}.state.t", f"expected {i}, found {rec.state.t}")
        try:
            validate_state(rec.state, layout)
        except InvalidStateError as exc:
            raise SessionValidationError(f"{path}.state", str(exc)) from None
        if rec.reward < 0 or rec.reward % SOUP_REWARD or rec.reward > 2 * SOUP_REWARD:
            raise SessionValidationError(f"{path}.reward", f"{rec.reward} is not a serve reward")
        if i and session.game[i - 1].state.score + session.game[i - 1].reward != rec.state.score:
            raise SessionValidationError(f"{path}.state.score", "score does not follow rewards")
    gaze = session.gaze
    if len(gaze):
        bad = np.nonzero(np.diff(gaze.ts) <= 0)[0]
        if len(bad):
            raise SessionValidationError(f"gaze[{bad[0] + 1}].ts", "timestamps must strictly increase")
        for name in ("left", "right"):
            arr = getattr(gaze, name)
            half = np.isnan(arr[:, 0]) != np.isnan(arr[:, 1])
            inf = np.isinf(arr).any(axis=1)
            bad = np.nonzero(half | inf)[0]
            if len(bad):
                raise SessionValidationError(f"gaze[{bad[0]}].{name}", "coordinates must be finite or null")
    if session.survey is not None:
        if set(session.survey) != set(SURVEY_ITEMS):
            raise SessionValidationError("survey", f"expected items {SURVEY_ITEMS}")
        for item in SURVEY_ITEMS:
            v = session.survey[item]
            if isinstance(v, bool) or not isinstance(v, int) or not 0 <= v <= 6:
                raise SessionValidationError(f"survey.{item}", f"survey.{item} ∉ 0..6 (got {v!r})")


def validate_gaze_coverage(session: SessionLog) -> dict:
    """Fraction of the expected 24,000 samples that carry no usable eye.

    Samples with both eyes null count as missing, and so do expected samples
    the stream never delivered. Surplus samples do not lower the fraction.
    """
    gaze = session.gaze
    missing = int(np.count_nonzero(gaze.both_null())) + max(0, EXPECTED_SAMPLES - len(gaze))
    fraction = min(1.0, missing / EXPECTED_SAMPLES)
    return {"missing_fraction": fraction, "acceptable": fraction <= MAX_MISSING_FRACTION}


# ------------------------------------------------------------- serialization

def _fmt_ts(ts: float) -> str:
    for digits in range(6, 30):
        s = f"{ts:.{digits}f}"
        if float(s) == ts:
            return s
    return f"{Decimal(float(ts)):f}"  # exact expansion, only reached for subnormal values


def _dumps(obj) -> str:
    return json.dumps(obj, separators=(",", ":"), ensure_ascii=False, allow_nan=False)


def state_to_json(state: GameState) -> dict:
    return {
        "players": [{"pos": list(p.position), "dir": p.orientation.value,
                     "held": p.held.value if p.held else None} for p in state.players],
        "pots": [{"tile": list(t), "onions": p.onion_count, "timer": p.cook_timer}
                 for t, p in sorted(state.pots.items())],
        "counters": [{"tile": list(t), "item": it.value} for t, it in sorted(state.counters.items())],
        "score": state.score,
        "t": state.t,
    }


def state_from_json(obj: dict) -> GameState:
    players = tuple(PlayerState(tuple(p["pos"]), Direction(p["dir"]),
                                Item(p["held"]) if p["held"] is not None else None)
                    for p in obj["players"])
    pots = {tuple(p["tile"]): PotState(int(p["onions"]), int(p["timer"])) for p in obj["pots"]}
    counters = {tuple(c["tile"]): Item(c["item"]) for c in obj["counters"]}
    return GameState(players, pots, counters, int(obj["score"]), int(obj["t"]))


def _meta_to_json(meta: SessionMeta) -> dict:
    return {"participant_id": meta.participant_id, "trial_id": meta.trial_id,
            "layout": meta.layout, "agent": meta.agent, "seed": meta.seed, "proxy": meta.proxy}


def _xy(a: np.ndarray) -> str:
    if np.isnan(a[0]):
        return "null"
    return _dumps([float(a[0]), float(a[1])])


def session_lines(session: SessionLog) -> Iterator[str]:
    yield _dumps({"version": FORMAT_VERSION, "meta": _meta_to_json(session.meta)})
    for rec in session.game:
        rest = _dumps({"state": state_to_json(rec.state), "actions": [a.value for a in rec.actions],
                       "reward": rec.reward, "events": [e.to_json() for e in rec.events]})
        yield f'{{"k":"game","t":{rec.t},"ts":{_fmt_ts(rec.ts)},{rest[1:]}'
    g = session.gaze
    for i in range(len(g)):
        p = g.pupil[i]
        pupil = "null" if np.isnan(p) else _dumps(float(p))
        yield (f'{{"k":"gaze","ts":{_fmt_ts(float(g.ts[i]))},"left":{_xy(g.left[i])},'
               f'"right":{_xy(g.right[i])},"pupil":{pupil}}}')
    if session.survey is not None:
        yield _dumps({"k": "survey", **{k: session.survey[k] for k in SURVEY_ITEMS}})


def atomic_write_text(path, text: str) -> None:
    path = os.fspath(path)
    d = os.path.dirname(path) or "."
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_session(session: SessionLog, path) -> None:
    """Validate, then write ``session`` atomically in canonical form."""
    validate_session(session)
    atomic_write_text(path, "\n".join(session_lines(session)) + "\n")


def _parse_eye(v, lineno: int, name: str) -> tuple[float, float]:
    if v is None:
        return (np.nan, np.nan)
    if not (isinstance(v, list) and len(v) == 2 and all(isinstance(x, (int, float)) for x in v)):
        raise SessionParseError(lineno, f"{name} must be null or [x, y]")
    return float(v[0]), float(v[1])


def read_session(path) -> SessionLog:
    """Parse and fully validate a session file."""
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines:
        raise SessionParseError(1, "empty file")

    def load(i: int):
        try:
            obj = json.loads(lines[i])
        except json.JSONDecodeError as exc:
            raise SessionParseError(i + 1, f"invalid JSON ({exc.msg})") from None
        if not isinstance(obj, dict):
            raise SessionParseError(i + 1, "expected a JSON object")
        return obj

    header = load(0)
    if header.get("version") != FORMAT_VERSION or not isinstance(header.get("meta"), dict):
        raise SessionParseError(1, f"expected header with version {FORMAT_VERSION} and meta")
    m = header["meta"]
    try:
        meta = SessionMeta(str(m["participant_id"]), int(m["trial_id"]), str(m["layout"]),
                           str(m["agent"]), int(m["seed"]), dict(m.get("proxy", {})))
    except (KeyError, TypeError, ValueError) as exc:
        raise SessionParseError(1, f"bad meta: {exc}") from None

    game: list[GameRecord] = []
    ts, left, right, pupil = [], [], [], []
    survey = None
    for i in range(1, len(lines)):
        obj = load(i)
        kind = obj.get("k")
        try:
            if kind == "game":
                game.append(GameRecord(
                    int(obj["t"]), float(obj["ts"]), state_from_json(obj["state"]),
                    tuple(Action(a) for a in obj["actions"]), int(obj["reward"]),
                    tuple(Event.from_json(e) for e in obj["events"])))
            elif kind == "gaze":
                ts.append(float(obj["ts"]))
                left.append(_parse_eye(obj["left"], i + 1, "left"))
                right.append(_parse_eye(obj["right"], i + 1, "right"))
                p = obj.get("pupil")
                pupil.append(np.nan if p is None else float(p))
            elif kind == "survey":
                if survey is not None:
                    raise SessionParseError(i + 1, "duplicate survey record")
                survey = {k: v for k, v in obj.items() if k != "k"}
            else:
                raise SessionParseError(i + 1, f"unknown record kind {kind!r}")
        except SessionParseError:
            raise
        except (KeyError, TypeError, ValueError, IndexError) as exc:
            raise SessionParseError(i + 1, f"malformed {kind} record: {exc!r}") from None

    gaze = GazeStream(ts, np.array(left).reshape(-1, 2), np.array(right).reshape(-1, 2), pupil)
    session = SessionLog(meta, tuple(game), gaze, survey)
    validate_session(session)
    return session


def sessions_equal(a: SessionLog, b: SessionLog) -> bool:
    return a.meta == b.meta and a.game == b.game and a.gaze == b.gaze and a.survey == b.survey


def replay(initial: GameState, layout: Layout, actions: Sequence) -> list[GameState]:
    """States visited when ``actions`` are applied from ``initial``."""
    from .gridworld.state import step

    states = [initial]
    for pair in actions:
        states.append(step(states[-1], layout, pair)[0])
    return states
