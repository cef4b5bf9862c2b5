"""
How gaze profiles track skill in the synthetic population
=========================================================

Skilled participants look at their goal tiles more and settle faster.
"""

import numpy as np

from gazeplay.experiments import sample_participant, simulate_participant
from gazeplay.features import SessionFeaturizer, WindowSpec

rng = np.random.default_rng(0)
profiles = [sample_participant("p%03d" % i, rng) for i in range(30)]
for skill in (0.1, 0.5, 0.9):
    sub = [p for p in profiles if p.skill == skill]
    lat = np.mean([p.gaze.saccade_latency for p in sub])
    goal = np.mean([p.gaze.fixation_mix[2] for p in sub])
    print(f"skill {skill}: {len(sub):2d} participants, mean latency {lat:4.1f}, goal share {goal:.2f}")

# the same participant's rounds: score and first-window gaze-object summary
for s in simulate_participant("p007", seed=3, repeats=1)[:6]:
    ratios = SessionFeaturizer(s).build(WindowSpec(0, 20), "gaze_object").data
    print(f"{s.meta.agent:>8} @ {s.meta.layout:<22} score {s.final_score:3d}  ratios {np.round(ratios, 2)}")
