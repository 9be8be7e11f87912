"""
Choosing a protocol when losses cost something
==============================================

Each user picks a (alpha, beta) pair. Payoff is mean throughput minus
lambda times the drop frequency. Sweeping lambda moves the game from one
dominant protocol, through a mixed equilibrium, to the other.
"""

import numpy as np

from aimd_arena import GameConfig, Strategy, classify_equilibrium, dominance_threshold, lambda_bounds, payoff_matrix

aggressive = Strategy(1.5, 0.75, "aggressive")
gentle = Strategy(1.0, 0.25, "gentle")
capacity = 50.0

print(payoff_matrix(GameConfig((aggressive, gentle), capacity, 140)))

bounds = lambda_bounds(aggressive, gentle, capacity)
print("mixed play for lambda in", (bounds.lo, bounds.hi), bounds.regime)
print("aggressive stops dominating at", dominance_threshold(GameConfig((aggressive, gentle), capacity, 0)))

for lam in np.linspace(150, 240, 7):
    res = classify_equilibrium(aggressive, gentle, capacity, lam)
    p = "" if res.mixing_probability is None else f"p={res.mixing_probability:.4f}"
    print(f"{lam:6.1f}  {res.regime:20s} {p}")
