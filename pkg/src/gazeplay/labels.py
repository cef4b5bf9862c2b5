"""Prediction targets: trust rating, proficiency tertile and next-subtask intent."""

from __future__ import annotations

import json
from typing import Iterable, Optional

import numpy as np

from .gridworld.layout import Layout, Tile, load_layout
from .gridworld.state import HUMAN, Action, Item, ROUND_LENGTH, Subtask, step
from .sessions import SessionLog, atomic_write_text

N_TRUST = 7
N_PROFICIENCY = 3
PROFICIENCY_NAMES = ("beginner", "intermediate", "expert")
MASKED = -1


class LabelError(ValueError):
    pass


def trust_label(session: SessionLog) -> int:
    """Likert answer to the trust item (0-6)."""
    if session.survey is None or "trust" not in session.survey:
        raise LabelError(f"{session.session_id}: no trust survey answer")
    value = session.survey["trust"]
    if not isinstance(value, int) or not 0 <= value < N_TRUST:
        raise LabelError(f"{session.session_id}: trust answer {value!r} outside 0..6")
    return value


def proficiency_bins(scores: Iterable[tuple[str, float]], group=None) -> dict[str, int]:
    """Tertile bin per session id within one agent-layout group.

    Position i of n in ascending order nominally gets bin floor(3i/n); every
    score tied across a cutoff takes the lowest bin of its tie group.
    """
    scores = list(scores)
    if len(scores) < 3:
        raise LabelError(f"group {group!r}: need at least 3 sessions, got {len(scores)}")
    ids = [s for s, _ in scores]
    if len(set(ids)) != len(ids):
        raise LabelError(f"group {group!r}: duplicate session ids")
    values = np.array([v for _, v in scores], dtype=float)
    order = np.argsort(values, kind="stable")
    n = len(values)
    nominal = (3 * np.arange(n)) // n
    sorted_vals = values[order]
    # first sorted position of each value's tie group
    first = np.searchsorted(sorted_vals, sorted_vals, side="left")
    bins = nominal[first]
    return {ids[i]: int(b) for i, b in zip(order, bins)}


_FROM_DISPENSER = {Item.ONION: Subtask.GET_ONION_FROM_DISPENSER, Item.DISH: Subtask.GET_DISH_FROM_DISPENSER}
_FROM_COUNTER = {Item.ONION: Subtask.GET_ONION_FROM_COUNTER, Item.DISH: Subtask.GET_DISH_FROM_COUNTER,
                 Item.SOUP: Subtask.GET_SOUP_FROM_COUNTER}
_ONTO_COUNTER = {Item.ONION: Subtask.PUT_ONION_ON_COUNTER, Item.DISH: Subtask.PUT_DISH_ON_COUNTER,
                 Item.SOUP: Subtask.PUT_SOUP_ON_COUNTER}


def classify_interact(before, after, layout: Layout) -> Optional[Subtask]:
    """Subtask implied by one player's held-item change while facing a tile."""
    if before.held == after.held:
        return None
    kind = layout.tile(before.facing)
    held, now = before.held, after.held
    if kind in (Tile.ONION_DISPENSER, Tile.DISH_DISPENSER) and held is None:
        return _FROM_DISPENSER[now]
    if kind == Tile.COUNTER:
        return _FROM_COUNTER[now] if held is None else _ONTO_COUNTER[held]
    if kind == Tile.POT:
        return Subtask.PUT_ONION_IN_POT if held == Item.ONION else Subtask.GET_SOUP_FROM_POT
    if kind == Tile.SERVING:
        return Subtask.SERVE_SOUP
    raise LabelError(f"held item changed while facing {kind!r}")


def detect_subtasks(session: SessionLog, player: int = HUMAN,
                    layout: Optional[Layout] = None) -> list[tuple[int, Subtask]]:
    """(timestep, subtask) for every interact by ``player`` that changed the state."""
    layout = layout or load_layout(session.meta.layout)
    game = session.game
    out = []
    for rec in game:
        if Action(rec.actions[player]) != Action.INTERACT:
            continue
        if rec.t + 1 < len(game):
            after = game[rec.t + 1].state
        else:
            after = step(rec.state, layout, rec.actions)[0]
        sub = classify_interact(rec.state.players[player], after.players[player], layout)
        if sub is not None:
            out.append((rec.t, sub))
    return out


def intent_labels(session: SessionLog, window=None, completions=None) -> np.ndarray:
    """Per-timestep id of the next subtask completed at or after t; MASKED past the last one.

    ``window`` (a WindowSpec) restricts the output to its timesteps.
    """
    if completions is None:
        completions = detect_subtasks(session)
    labels = np.full(len(session.game), MASKED, dtype=np.int64)
    prev = -1
    for t, sub in completions:
        labels[prev + 1:t + 1] = int(sub)
        prev = t
    if window is not None:
        labels = labels[window.start_t:window.stop_t]
    return labels


def label_sidecar(session: SessionLog, proficiency: Optional[int], completions=None) -> dict:
    if completions is None:
        completions = detect_subtasks(session)
    intents = intent_labels(session, completions=completions)
    return {
        "session_id": session.session_id,
        "trust": trust_label(session) if session.survey is not None else None,
        "proficiency": proficiency,
        "intents": [{"t": int(t), "id": int(i)} for t, i in enumerate(intents) if i != MASKED],
        "masked_after": int(completions[-1][0]) if completions else MASKED,
    }


def write_label_sidecar(path, sidecar: dict) -> None:
    atomic_write_text(path, json.dumps(sidecar, sort_keys=True, separators=(",", ":")) + "\n")


def intents_from_sidecar(sidecar: dict, length: int = ROUND_LENGTH) -> np.ndarray:
    labels = np.full(length, MASKED, dtype=np.int64)
    for row in sidecar["intents"]:
        labels[row["t"]] = row["id"]
    return labels
