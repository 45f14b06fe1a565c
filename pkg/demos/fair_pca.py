"""Fair PCA: one projection direction shared by two groups.

A majority group (95 rows) varies mostly along axis 0, a minority group (5
rows) along axis 1.  Standard PCA serves the majority and leaves the minority
with a large excess reconstruction loss.  The KL-RS target is
tau = r*max + (1-r)*min over the standard-PCA group losses.

At r=0.1 the pooled loss of standard PCA already meets tau, so lambda* is large
and nothing changes.  As r grows, lambda* shrinks and the worst group drives
the solution: compared with r=0.1, r=0.9 has a smaller gap and a higher pooled
loss.  The path in between is not monotone (r=0.5 over-corrects), because
once the minority loss is below tau any lambda is feasible and the projected
gradient stops early.
"""
import numpy as np

from klrs.experiments import fair_pca_run, gen_two_subspace_groups
from klrs.solver import SolverConfig

groups = gen_two_subspace_groups((95, 5), n=3, seed=0)
w = np.array([95, 5]) / 100
cfg = SolverConfig(tau=0.0, sgd_steps=200, step_size=0.05, epsilon=1e-3)

base = fair_pca_run(groups, 1, 1.0, cfg)
print("standard PCA group losses:", np.round(base.baseline_losses, 4))
print(f"{'r':>4} {'tau':>7} {'lambda*':>9} {'majority':>9} {'minority':>9} {'gap':>7} {'average':>8}")
for r in (0.1, 0.3, 0.5, 0.7, 0.9):
    res = fair_pca_run(groups, 1, r, cfg)
    g = res.group_losses
    print(f"{r:4.1f} {res.tau:7.3f} {res.lambda_star:9.4f} {g[0]:9.4f} {g[1]:9.4f} {res.gap:7.3f} "
          f"{res.average_loss(w):8.4f}")
