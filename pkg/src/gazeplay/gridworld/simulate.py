"""Generate labelled sessions from scripted teammates and human proxies."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..sessions import SURVEY_ITEMS, GameRecord, SessionLog, SessionMeta, ViewportMap
from .gaze import GazeProfile, synthesize_gaze
from .layout import Layout
from .planner import PolicyKind, act_with_plan
from .state import FPS, HUMAN, ROUND_LENGTH, TEAMMATE, initial_state, step

# Survey model: answer = clamp(round(6 * sigmoid(a * score_z + b * collision_z + noise)), 0, 6)
# with score_z = (score - SCORE_MEAN) / SCORE_STD, collision_z likewise.
SCORE_MEAN, SCORE_STD = 120.0, 80.0
COLLISION_MEAN, COLLISION_STD = 30.0, 30.0
SURVEY_NOISE_STD = 0.6
SURVEY_WEIGHTS = {
    "fluency": (1.0, -0.8),
    "significance": (0.6, -0.2),
    "trust": (1.2, -0.6),
    "understanding": (0.8, -0.5),
    "cooperativeness": (1.0, -0.4),
}


@dataclass(frozen=True)
class HumanProxy:
    policy: PolicyKind
    gaze: GazeProfile


def survey_answer(score: int, collisions: int, weights: tuple[float, float], noise: float) -> int:
    a, b = weights
    z = a * (score - SCORE_MEAN) / SCORE_STD + b * (collisions - COLLISION_MEAN) / COLLISION_STD + noise
    return int(min(6, max(0, math.floor(6.0 / (1.0 + math.exp(-z)) + 0.5))))


def synthetic_survey(score: int, collisions: int, rng: np.random.Generator) -> dict:
    noise = rng.normal(0.0, SURVEY_NOISE_STD, len(SURVEY_ITEMS))
    return {item: survey_answer(score, collisions, SURVEY_WEIGHTS[item], float(e))
            for item, e in zip(SURVEY_ITEMS, noise)}


def simulate_session(layout: Layout, agent: PolicyKind, proxy: HumanProxy, seed: int,
                     participant_id: str = "p000", trial_id: int = 0,
                     viewport: Optional[ViewportMap] = None) -> SessionLog:
    """Play one full round; the same arguments always give the same log."""
    viewport = viewport or ViewportMap.centered(layout)
    policy_rng, gaze_rng, survey_rng = (np.random.default_rng(s)
                                        for s in np.random.SeedSequence(seed).spawn(3))
    state = initial_state(layout)
    records, states, goals = [], [], []
    collisions = 0
    for t in range(ROUND_LENGTH):
        a_h, plan_h = act_with_plan(proxy.policy, state, layout, policy_rng, HUMAN)
        a_m, _ = act_with_plan(agent, state, layout, policy_rng, TEAMMATE)
        nxt, reward, events = step(state, layout, (a_h, a_m))
        collisions += any(e.kind == "collision" for e in events)
        records.append(GameRecord(t, round(t / FPS, 6), state, (a_h, a_m), reward, tuple(events)))
        states.append(state)
        goals.append(plan_h.target if plan_h is not None else None)
        state = nxt

    gaze = synthesize_gaze(states, proxy.gaze, viewport, gaze_rng, goals=goals, player=HUMAN)
    survey = synthetic_survey(state.score, collisions, survey_rng)
    meta = SessionMeta(participant_id, int(trial_id), layout.name, agent.kind, int(seed),
                       {"kind": proxy.policy.kind, "skill": float(proxy.policy.skill),
                        "gaze": proxy.gaze.to_json()})
    return SessionLog(meta, tuple(records), gaze, survey)
