"""
Predicting proficiency from the first 20 timesteps
==================================================

A small population, one causal transformer per agent-layout group, and the
cumulative F1 curve against the majority baseline. Takes well under a minute.
"""

import numpy as np

from gazeplay import experiments as ex

data = ex.build_dataset(ex.simulate_dataset(24, seed=2), kinds=("gaze", "gaze_object"))
split = ex.split_participants(sorted(set(data.participants)), seed=2)
print("participants train/val/test:", len(split.train), len(split.val), len(split.test))

seq = ex.run_grouped("proficiency", "gaze", "transformer", data, split)
agg = ex.run_grouped("proficiency", "gaze_object", "mlp", data, split)

curve = np.array(seq["mean_cumulative"], dtype=float)
print("cumulative F1 by timestep:", np.round(curve, 2))
print("final: gaze %.3f, gaze-object %.3f, majority %.3f"
      % (seq["mean_final_f1"], agg["mean_final_f1"], seq["mean_baseline_final_f1"]))
