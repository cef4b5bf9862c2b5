import dataclasses

import numpy as np
import pytest

from gazeplay.gridworld.gaze import GazeProfile
from gazeplay.gridworld.layout import LAYOUT_NAMES, load_layout
from gazeplay.gridworld.planner import PolicyKind
from gazeplay.gridworld.simulate import HumanProxy, simulate_session
from gazeplay.sessions import EXPECTED_SAMPLES, GazeStream

PROFILE = GazeProfile((0.2, 0.1, 0.5, 0.2), saccade_latency=3, dropout_rate=0.05, jitter_px=8.0)


def make_session(layout="counter_circuit", agent="adaptive", skill=0.9, seed=3, profile=PROFILE,
                 participant="p000", trial=0):
    return simulate_session(load_layout(layout), PolicyKind(agent),
                            HumanProxy(PolicyKind("adaptive", skill), profile), seed,
                            participant, trial)


def with_gaze(session, left, right):
    g = session.gaze
    return dataclasses.replace(session, gaze=GazeStream(g.ts, left, right, g.pupil))


def null_both(session, fraction):
    """Copy of ``session`` with the first ``fraction`` of samples blanked in both eyes."""
    n = int(round(fraction * EXPECTED_SAMPLES))
    left, right = session.gaze.left.copy(), session.gaze.right.copy()
    left[:] = right[:] = 500.0
    left[:n] = right[:n] = np.nan
    return with_gaze(session, left, right)


@pytest.fixture(scope="session")
def layouts():
    return {name: load_layout(name) for name in LAYOUT_NAMES}


@pytest.fixture(scope="session")
def session():
    return make_session()


@pytest.fixture(scope="session")
def sessions_mixed():
    """Nine sessions covering every agent-layout pair."""
    out = []
    for i, name in enumerate(LAYOUT_NAMES):
        for j, agent in enumerate(("random", "rigid", "adaptive")):
            out.append(make_session(name, agent, skill=(0.1, 0.5, 0.9)[j], seed=10 * i + j,
                                    trial=3 * i + j))
    return out


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    """One PASS/FAIL line per acceptance criterion that ran."""
    import sys
    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(results, key=lambda k: int(k[2:])):
        terminalreporter.write_line(results[key])
