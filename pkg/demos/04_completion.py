"""
Completing missing cells
========================

Hides a random 15% of a simulated tensor, fits on the surviving cells
only, and scores the fitted probabilities on the hidden ones. The solvers
never peek: every update is driven by the observation mask.
"""

import numpy as np

from logitcp import decomp, metrics, simulate

cfg = simulate.SimConfig(dims=(60, 15, 12), rank=1, snr=(4.0,), sparsity=0.8,
                         seed=19, baseline_reps=5)
x, truth = simulate.gen_dataset(cfg)

# drop_uniform splits the observed cells into a training tensor and a
# held-out tensor that remembers the true labels of the hidden cells.
masked, heldout = simulate.drop_uniform(x, 0.15, seed=19)
print("cells: %d total, %d kept, %d hidden"
      % (x.n_observed, masked.n_observed, heldout.n_observed))

report = decomp.fit(masked, decomp.FitConfig(rank=1, n_starts=6,
                                             max_outer_iters=200, seed=4),
                    method="tp")
print("fit on the kept cells: converged =", report.converged)

# model.probs() maps the fitted logits through the link; completion_auc
# ranks the hidden cells by those probabilities against their true labels.
probs = report.model.probs()
auc = metrics.completion_auc(heldout, probs)
print("held-out AUC (fitted model):  %.4f" % auc)

# Two yardsticks: the generating model is the ceiling, and a constant
# prediction is the coin-flip floor at 0.5 by construction. The fit lands
# essentially on the ceiling — everything short of it is the irreducible
# Bernoulli noise, which no model can rank.
oracle = metrics.completion_auc(heldout, truth.model.probs())
print("held-out AUC (true model):    %.4f" % oracle)

# The same probabilities round to hard labels: cells above the threshold
# are imputed as ones.
hidden = heldout.mask
imputed = (probs >= 0.5).astype(float)
accuracy = float(np.mean(imputed[hidden] == heldout.values[hidden]))
base_rate = float(np.mean(heldout.values[hidden]))
print("imputation accuracy at 0.5:   %.4f  (held-out one-rate %.4f)"
      % (accuracy, base_rate))
