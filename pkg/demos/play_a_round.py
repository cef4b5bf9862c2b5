"""
Play one synthetic round and look at what gets recorded
=======================================================

A skilled human proxy cooks with the adaptive teammate on counter_circuit.
"""

import numpy as np

from gazeplay.features import SessionFeaturizer, WindowSpec, decode_state, encode_state
from gazeplay.gridworld.gaze import GazeProfile
from gazeplay.gridworld.layout import load_layout
from gazeplay.gridworld.planner import PolicyKind
from gazeplay.gridworld.simulate import HumanProxy, simulate_session
from gazeplay.labels import detect_subtasks, intent_labels
from gazeplay.sessions import validate_gaze_coverage

layout = load_layout("counter_circuit")
print(layout.to_ascii())

profile = GazeProfile((0.15, 0.05, 0.6, 0.2), saccade_latency=4, dropout_rate=0.05, jitter_px=10.0)
proxy = HumanProxy(PolicyKind("adaptive", 0.9), profile)
session = simulate_session(layout, PolicyKind("adaptive"), proxy, seed=1)

print("final score:", session.final_score)
print("gaze samples:", len(session.gaze), "missing fraction: %.3f"
      % validate_gaze_coverage(session)["missing_fraction"])

# the human proxy's completed subtasks, and the intent labels derived from them
done = detect_subtasks(session)
print("first subtasks:", [(t, s.name) for t, s in done[:5]])
print("intent labels, t=0..29:", intent_labels(session)[:30])

# the state encoding is lossless
state = session.game[150].state
enc = encode_state(state, layout)
print("encoding:", enc.shape, "round trip exact:", decode_state(enc, layout) == state)

# where the proxy looked during the first second of play
fz = SessionFeaturizer(session)
collapsed = fz.build(WindowSpec(0, 5), "collapsed_gaze").data
np.set_printoptions(precision=2, suppress=True)
print("mean gaze heatmap over timesteps 0-4:")
print(collapsed)
print("gaze-object ratios (own, teammate, environment):", fz.build(WindowSpec(0, 20), "gaze_object").data)
