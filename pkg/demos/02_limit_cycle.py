"""
AIMD sawtooth and its limit cycle
=================================

Two flows with different increase and backoff settings share a link.
Their peaks settle onto a closed-form cycle after a few dozen drops.
"""

import numpy as np

from aimd_arena import StrategyProfile, average_throughput, fixed_point, simulate, single_server, verify_convergence

top = single_server(50, 2)
profile = StrategyProfile(alpha=[1.5, 1.0], beta=[0.75, 0.25])

fp = fixed_point(top, profile)
print("period", fp.period)
print("peaks ", fp.peak_rates)

tr = simulate(top, profile, [0.0, 0.0], max_drops=80)
for e in tr.events[:5]:
    print(f"t={e.time:8.4f}  pre={np.round(e.pre_rates, 4)}  post={np.round(e.post_rates, 4)}")

rep = verify_convergence(tr, fp)
print("distance after 10, 40, 80 drops:", rep.distances[[9, 39, 79]])

# mean rate along the cycle, compared with the sawtooth midpoint rule
ev = tr.events[-21:]
area = sum((a.post_rates + b.pre_rates) / 2 * (b.time - a.time) for a, b in zip(ev, ev[1:]))
print(area / (ev[-1].time - ev[0].time), average_throughput(fp, profile))
