"""Event-driven AIMD rate dynamics on a fluid network.

Between losses every rate grows linearly, ``x(t) = x(t_k) + alpha (t - t_k)``.
The first time some node utilisation ``[xi x]_j`` reaches one, every
connection is cut to ``beta * x`` (losses are synchronised). Because the
motion between drops is affine, drop instants are computed exactly; no root
finding or time stepping is involved.

The drop map sends one peak (a state with maximal node utilisation equal to
one) to the next. Its unique fixed point ``x* = gamma T`` with
``gamma = alpha / (1 - beta)`` and ``T = 1 / max_j [xi gamma]_j`` is the
limit cycle every trajectory converges to.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import ModelInconsistencyError, ValidationError
from .network import LoadMatrix, NetworkTopology, compute_load_matrix

#: Tolerance on "utilisation equals one" for states handed to the drop map.
BOUNDARY_TOL = 1e-9
#: Post-drop states must satisfy ``max(xi @ (beta * x)) < 1 - INTERIOR_MARGIN``.
INTERIOR_MARGIN = 1e-12
#: Relative tolerance for simultaneous binding rows.
TIE_TOL = 1e-12

__all__ = [
    "ConvergenceReport",
    "DropEvent",
    "FixedPoint",
    "StrategyProfile",
    "Trajectory",
    "average_throughput",
    "drop_map",
    "fixed_point",
    "iterate_drop_map",
    "next_drop",
    "simulate",
    "verify_convergence",
]


@dataclass(frozen=True, eq=False)
class StrategyProfile:
    """Per-connection AIMD parameters.

    ``alpha`` is the additive increase rate and ``beta`` the multiplicative
    decrease factor. A zero ``alpha`` freezes that connection's rate.
    """

    alpha: np.ndarray
    beta: np.ndarray

    def __post_init__(self):
        alpha = np.array(self.alpha, dtype=float).reshape(-1)
        beta = np.array(self.beta, dtype=float).reshape(-1)
        if alpha.shape != beta.shape:
            raise ValidationError("alpha and beta must have the same length", "beta")
        if alpha.size == 0:
            raise ValidationError("profile needs at least one connection", "alpha")
        if not np.all(np.isfinite(alpha)) or np.any(alpha < 0):
            raise ValidationError("alpha must be finite and nonnegative", "alpha")
        if not np.all(np.isfinite(beta)) or np.any(beta < 0) or np.any(beta >= 1):
            raise ValidationError("beta must lie in [0, 1)", "beta")
        alpha.setflags(write=False)
        beta.setflags(write=False)
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "beta", beta)

    @classmethod
    def from_pairs(cls, pairs: Sequence[tuple[float, float]]) -> "StrategyProfile":
        """Build from ``[(alpha_1, beta_1), (alpha_2, beta_2), ...]``."""
        pairs = [tuple(p) for p in pairs]
        return cls([a for a, _ in pairs], [b for _, b in pairs])

    @property
    def size(self) -> int:
        return self.alpha.size

    @property
    def gamma(self) -> np.ndarray:
        return self.alpha / (1.0 - self.beta)


@dataclass(frozen=True, eq=False)
class DropEvent:
    time: float
    pre_rates: np.ndarray
    post_rates: np.ndarray
    binding_rows: frozenset[int]


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Piecewise-affine rate path with its drop events."""

    initial_rates: np.ndarray
    alpha: np.ndarray
    events: tuple[DropEvent, ...]
    horizon: float

    @property
    def drop_times(self) -> np.ndarray:
        return np.array([e.time for e in self.events])

    @property
    def peaks(self) -> np.ndarray:
        """Pre-drop rate vectors, one row per event."""
        if not self.events:
            return np.empty((0, self.initial_rates.size))
        return np.vstack([e.pre_rates for e in self.events])

    @property
    def intervals(self) -> np.ndarray:
        """Time between consecutive drops."""
        return np.diff(self.drop_times)

    def rates_at(self, t: float) -> np.ndarray:
        """Rates at time ``t``; at a drop instant the post-drop value is returned."""
        if t < 0 or t > self.horizon:
            raise ValueError(f"t={t} outside [0, {self.horizon}]")
        times = self.drop_times
        k = int(np.searchsorted(times, t, side="right"))
        if k == 0:
            return self.initial_rates + self.alpha * t
        prev = self.events[k - 1]
        return prev.post_rates + self.alpha * (t - prev.time)


@dataclass(frozen=True, eq=False)
class FixedPoint:
    period: float
    peak_rates: np.ndarray
    binding_rows: frozenset[int]


@dataclass(frozen=True, eq=False)
class ConvergenceReport:
    distances: np.ndarray
    interval_errors: np.ndarray
    monotone_from: int
    eventually_monotone: bool
    failed: bool

    @property
    def final_distance(self) -> float:
        return float(self.distances[-1])


def _load(topology_or_load) -> LoadMatrix:
    if isinstance(topology_or_load, LoadMatrix):
        return topology_or_load
    if isinstance(topology_or_load, NetworkTopology):
        return compute_load_matrix(topology_or_load)
    return LoadMatrix(np.asarray(topology_or_load, dtype=float))


def _check_sizes(profile: StrategyProfile, load: LoadMatrix) -> None:
    if profile.size != load.num_users:
        raise ValidationError(
            f"profile has {profile.size} connections but the network has {load.num_users} users",
            "strategies",
        )


def next_drop(rates, profile: StrategyProfile, load_matrix) -> tuple[float, np.ndarray, frozenset[int]]:
    """Time until the first node saturates from ``rates``, the rates then, and the binding rows."""
    load = _load(load_matrix)
    _check_sizes(profile, load)
    x = np.asarray(rates, dtype=float)
    util = load.utilizations(x)
    if np.any(util > 1.0 + BOUNDARY_TOL) or np.any(x < 0):
        raise ValidationError(
            f"state is outside the admissible set (max utilisation {util.max():.12g})", "rates"
        )
    speed = load.xi @ profile.alpha
    rows = np.flatnonzero(speed > 0)
    if rows.size == 0:
        raise ModelInconsistencyError("no node is ever loaded: rates grow without a drop")
    times = np.maximum((1.0 - util[rows]) / speed[rows], 0.0)
    hit = float(times.min())
    binding = frozenset(int(j) for j in rows[times <= hit + TIE_TOL * max(1.0, hit)])
    return hit, x + profile.alpha * hit, binding


def _apply_drop(peak: np.ndarray, profile: StrategyProfile, load: LoadMatrix) -> np.ndarray:
    post = profile.beta * peak
    worst = float((load.xi @ post).max())
    if worst >= 1.0 - INTERIOR_MARGIN:
        raise ModelInconsistencyError(
            f"post-drop state is not strictly inside the admissible set (utilisation {worst:.15g})"
        )
    return post


def drop_map(peak, profile: StrategyProfile, load_matrix) -> np.ndarray:
    """Map one peak to the next: cut by ``beta``, then refill until a node saturates."""
    load = _load(load_matrix)
    _check_sizes(profile, load)
    v = np.asarray(peak, dtype=float)
    top = float(load.utilizations(v).max())
    if abs(top - 1.0) > BOUNDARY_TOL:
        raise ValidationError(f"peak must have maximal utilisation 1, got {top:.12g}", "peak")
    _, nxt, _ = next_drop(_apply_drop(v, profile, load), profile, load)
    return nxt


def iterate_drop_map(peak, profile: StrategyProfile, load_matrix, tol: float = 1e-10, max_iter: int = 100_000):
    """Iterate the drop map until successive peaks differ by less than ``tol`` (sup norm).

    Returns ``(peak, iterations)``.
    """
    load = _load(load_matrix)
    z = np.asarray(peak, dtype=float)
    for it in range(1, max_iter + 1):
        nxt = drop_map(z, profile, load)
        if np.max(np.abs(nxt - z)) < tol:
            return nxt, it
        z = nxt
    return z, max_iter


def simulate(
    topology,
    profile: StrategyProfile,
    initial_rates,
    max_time: float | None = None,
    max_drops: int | None = None,
) -> Trajectory:
    """Run the impulsive dynamics from ``initial_rates``.

    Stops after ``max_drops`` events or at ``max_time``, whichever comes
    first; at least one must be given. With every ``alpha`` zero the rates
    never move, which is only allowed with a time limit.
    """
    if max_time is None and max_drops is None:
        raise ValidationError("give max_time, max_drops or both", "max_time")
    if max_time is not None and not max_time >= 0:
        raise ValidationError("max_time must be nonnegative", "max_time")
    if max_drops is not None and (int(max_drops) != max_drops or max_drops < 0):
        raise ValidationError("max_drops must be a nonnegative integer", "max_drops")

    load = _load(topology)
    _check_sizes(profile, load)
    x0 = np.array(initial_rates, dtype=float).reshape(-1)
    if x0.size != profile.size:
        raise ValidationError(f"initial_rates must have length {profile.size}", "initial_rates")
    if np.any(x0 < 0) or np.any(load.utilizations(x0) > 1.0 + BOUNDARY_TOL):
        raise ValidationError("initial_rates lie outside the admissible set", "initial_rates")
    x0.setflags(write=False)

    if not np.any(profile.alpha > 0):
        if max_time is None:
            raise ModelInconsistencyError("all rates are frozen; no drop will ever occur")
        return Trajectory(x0, profile.alpha, (), float(max_time))

    events: list[DropEvent] = []
    t, x = 0.0, x0
    while max_drops is None or len(events) < max_drops:
        dt, peak, rows = next_drop(x, profile, load)
        if max_time is not None and t + dt > max_time:
            break
        t += dt
        post = _apply_drop(peak, profile, load)
        peak.setflags(write=False)
        post.setflags(write=False)
        events.append(DropEvent(t, peak, post, rows))
        x = post
    horizon = float(max_time) if max_time is not None else t
    return Trajectory(x0, profile.alpha, tuple(events), horizon)


def fixed_point(topology, profile: StrategyProfile) -> FixedPoint:
    """Closed-form limit cycle: period ``1 / max_j [xi gamma]_j`` and peak ``gamma * T``."""
    load = _load(topology)
    _check_sizes(profile, load)
    gamma = profile.gamma
    demand = load.xi @ gamma
    top = float(demand.max())
    if top <= 0:
        raise ModelInconsistencyError("no node is ever loaded: the limit cycle does not exist")
    period = 1.0 / top
    peak = gamma * period
    peak.setflags(write=False)
    rows = frozenset(int(j) for j in np.flatnonzero(demand >= top * (1.0 - TIE_TOL)))
    return FixedPoint(period, peak, rows)


def average_throughput(fp: FixedPoint, profile: StrategyProfile) -> np.ndarray:
    """Time-averaged rate over the limit cycle, ``(1 + beta) x* / 2``."""
    return 0.5 * (1.0 + profile.beta) * fp.peak_rates


def verify_convergence(trajectory: Trajectory, fp: FixedPoint, tol: float = 1e-12) -> ConvergenceReport:
    """Compare each simulated peak and drop interval against the limit cycle.

    ``monotone_from`` is the first drop index after which the sup-norm
    distance never rises by more than ``tol`` (scaled by the peak size);
    the sequence counts as eventually monotone when that index lies in the
    first half of the run. ``failed`` is set when, after at least 50 drops,
    the last distance exceeds the first by more than that slack.
    """
    if len(trajectory.events) < 3:
        raise ValidationError("need at least 3 drops to assess convergence", "trajectory")
    dist = np.max(np.abs(trajectory.peaks - fp.peak_rates), axis=1)
    interval_err = np.abs(trajectory.intervals - fp.period)
    slack = tol * max(1.0, float(np.max(np.abs(fp.peak_rates))))
    rises = np.flatnonzero(np.diff(dist) > slack)
    start = int(rises[-1] + 1) if rises.size else 0
    failed = dist.size >= 50 and dist[-1] > dist[0] + slack
    return ConvergenceReport(
        distances=dist,
        interval_errors=interval_err,
        monotone_from=start,
        eventually_monotone=start <= (dist.size - 1) // 2,
        failed=bool(failed),
    )
