"""
Protocol populations under delayed imitation
============================================

Shares of three protocols evolve by the replicator rule, with fitness
read from a delayed snapshot of the population.
"""

import numpy as np

from aimd_arena import ReplicatorConfig, integrate, mixed_probability, rest_point_check

strategies = [(1.5, 0.75), (1.25, 0.5), (1.0, 0.25)]
uniform = (1 / 3, 1 / 3, 1 / 3)

for lam, delay in ((168, 0.25), (140, 0.25), (168, 15.0)):
    cfg = ReplicatorConfig(strategies, 50, lam, 0.2, delay, "pairwise", uniform, horizon=200)
    tr = integrate(cfg)
    print(f"lambda={lam} tau={delay:5.2f}  {tr.outcome:14s} {np.round(tr.final, 4)}")

# three-player interactions
cfg = ReplicatorConfig(strategies, 50, 140, 0.25, 5.0, "triple", uniform, horizon=200)
tr = integrate(cfg)
print("triple:", tr.outcome, np.round(tr.final, 4))

# with two protocols and no delay, the population settles on the mixed equilibrium
pair = strategies[::2]
p = mixed_probability(pair[0], pair[1], 50, 190)
cfg = ReplicatorConfig(pair, 50, 190, 1.0, 0.0, "pairwise", (0.9, 0.1), horizon=80, step=0.05)
print(integrate(cfg).final[0], p)
print(rest_point_check(cfg, (p, 1 - p)))
