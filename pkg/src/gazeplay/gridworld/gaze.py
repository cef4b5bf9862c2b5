"""Synthetic eye tracker standing in for the human's gaze."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from ..sessions import SAMPLES_PER_STEP, GazeStream, ViewportMap
from .layout import Coord
from .state import FPS, HUMAN, GameState

FIXATION_TARGETS = ("own_agent", "teammate", "current_goal_tile", "uniform_noise")
OWN, MATE, GOAL, NOISE = range(4)
TRACKER_HZ = FPS * SAMPLES_PER_STEP


@dataclass(frozen=True)
class GazeProfile:
    fixation_mix: tuple[float, float, float, float]  # probabilities in FIXATION_TARGETS order
    saccade_latency: int = 0
    dropout_rate: float = 0.0  # per-eye probability of a null sample
    jitter_px: float = 0.0
    pupil_mm: float = 3.5

    def __post_init__(self):
        mix = np.asarray(self.fixation_mix, dtype=float)
        if mix.shape != (4,) or np.any(mix < 0) or abs(mix.sum() - 1.0) > 1e-9:
            raise ValueError(f"fixation_mix must be 4 probabilities summing to 1, got {self.fixation_mix}")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ValueError("dropout_rate must lie in [0, 1)")
        if self.saccade_latency < 0 or self.jitter_px < 0:
            raise ValueError("saccade_latency and jitter_px must be non-negative")

    def to_json(self) -> dict:
        return {"fixation_mix": [float(x) for x in self.fixation_mix],
                "saccade_latency": int(self.saccade_latency),
                "dropout_rate": float(self.dropout_rate), "jitter_px": float(self.jitter_px),
                "pupil_mm": float(self.pupil_mm)}


def synthesize_gaze(trajectory: Sequence[GameState], profile: GazeProfile, viewport: ViewportMap,
                    rng: np.random.Generator, goals: Optional[Sequence[Optional[Coord]]] = None,
                    player: int = HUMAN, t0: float = 0.0) -> GazeStream:
    """Sixty binocular samples per game timestep at synthetic 300 Hz timestamps.

    Before ``saccade_latency`` the human looks at the teammate, at the latency
    step it looks at its own agent, and afterwards each sample picks a target
    from ``fixation_mix``. ``goals[t]`` is the tile the human is heading for;
    a missing goal falls back to the own-agent tile.
    """
    n_steps = len(trajectory)
    if n_steps == 0:
        raise ValueError("trajectory is empty")
    per = SAMPLES_PER_STEP
    n = n_steps * per

    own = np.array([s.players[player].position for s in trajectory], dtype=float)
    mate = np.array([s.players[1 - player].position for s in trajectory], dtype=float)
    goal = own.copy()
    if goals is not None:
        for t, g in enumerate(goals):
            if g is not None:
                goal[t] = g
    tiles = np.stack([own, mate, goal], axis=1)  # (T, 3, 2) as (row, col)

    step_of = np.repeat(np.arange(n_steps), per)
    target = rng.choice(4, size=n, p=np.asarray(profile.fixation_mix, dtype=float))
    lat = profile.saccade_latency
    target[step_of < lat] = MATE
    target[step_of == lat] = OWN

    size = viewport.tile_px
    ox, oy = viewport.origin_px
    h, w = viewport.grid_dims
    # noise covers the grid plus a one-tile margin, so some samples land off-grid
    noise = np.column_stack([rng.uniform(ox - size, ox + (w + 1) * size, n),
                             rng.uniform(oy - size, oy + (h + 1) * size, n)])
    picked = tiles[step_of, np.minimum(target, GOAL)]
    centre = np.column_stack([ox + (picked[:, 1] + 0.5) * size, oy + (picked[:, 0] + 0.5) * size])
    point = np.where((target == NOISE)[:, None], noise, centre)

    left = point + rng.normal(0.0, 1.0, (n, 2)) * profile.jitter_px
    right = point + rng.normal(0.0, 1.0, (n, 2)) * profile.jitter_px
    drop_l = rng.random(n) < profile.dropout_rate
    drop_r = rng.random(n) < profile.dropout_rate
    left[drop_l] = np.nan
    right[drop_r] = np.nan
    pupil = profile.pupil_mm + rng.normal(0.0, 0.15, n)
    pupil[drop_l & drop_r] = np.nan

    # whole-microsecond timestamps so they serialise exactly
    ts = np.round(t0 + step_of / FPS + np.tile(np.arange(per), n_steps) / TRACKER_HZ, 6)
    return GazeStream(ts, np.round(left, 3), np.round(right, 3), np.round(pupil, 4))
