"""CSV writers for trajectories, payoff tables and sweep results.

Floats are written with ``repr``, the shortest string that round-trips, so
identical inputs give byte-identical files.
"""
from __future__ import annotations

import csv
import io
from typing import Iterable, Sequence

import numpy as np

from .dynamics import Trajectory
from .game import LambdaBounds, mixed_probability
from .replicator import ShareTrajectory


def fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def to_csv(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([fmt(v) for v in row])
    return buf.getvalue()


def trajectory_rows(trajectory: Trajectory):
    for k, event in enumerate(trajectory.events):
        for i, (pre, post) in enumerate(zip(event.pre_rates, event.post_rates)):
            yield (event.time, k, i, pre, post)


def trajectory_csv(trajectory: Trajectory) -> str:
    return to_csv(("time", "event_index", "user_index", "pre_rate", "post_rate"), trajectory_rows(trajectory))


def payoff_matrix_csv(matrix: np.ndarray) -> str:
    n, m = matrix.shape
    return to_csv(("i", "j", "payoff"), ((i, j, matrix[i, j]) for i in range(n) for j in range(m)))


def lambda_bounds_csv(bounds: LambdaBounds, s1, s2, capacity: float) -> str:
    if bounds.has_mixed:
        mid = 0.5 * (max(bounds.lo, 0.0) + bounds.hi)
        p_mid = mixed_probability(s1, s2, capacity, mid)
        regime = bounds.regime
    else:
        p_mid, regime = None, "none"
    return to_csv(("lambda_lo", "lambda_hi", "p_at_midpoint", "regime"), [(bounds.lo, bounds.hi, p_mid, regime)])


def shares_csv(trajectory: ShareTrajectory) -> str:
    n = trajectory.shares.shape[1]
    header = ["time"] + [f"share_{i + 1}" for i in range(n)]
    rows = ((t, *x) for t, x in zip(trajectory.times, trajectory.shares))
    return to_csv(header, rows)
