"""Delayed replicator dynamics over populations of AIMD strategies.

Shares evolve as::

    dx_i/dt = K x_i(t) (f_i(X(t - tau)) - sum_j x_j(t - tau) f_j(X(t - tau)))

where ``f`` is the fitness vector. In ``pairwise`` mode ``f = M @ x`` with
the two-player payoff matrix; in ``triple`` mode every individual meets two
others and ``f_i = sum_pq x_p x_q T[i, p, q]``.

Integration is classical RK4 on a fixed grid with ``tau`` an integer number
of steps and constant history on ``[-tau, 0]``. Shares are clipped and
renormalised after every step. The subtracted average is the same for every
``i``, so renormalising is exact: it removes that common term and
re-centres the average on the current shares. The scheme therefore stays
fourth order.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ModelInconsistencyError, ValidationError
from .game import GameConfig, Strategy, _as_strategy, payoff_matrix, payoff_tensor_3

#: Negative shares beyond this are treated as an integration failure.
NEGATIVE_TOL = 1e-9
#: A share above ``1 - FIXATION_TOL`` at the horizon means fixation.
FIXATION_TOL = 1e-3
#: Sup-norm movement over the final 10% of the run below which a state is at rest.
REST_TOL = 1e-6

MODES = ("pairwise", "triple")

__all__ = [
    "MODES",
    "ReplicatorConfig",
    "RestPointResidual",
    "ShareTrajectory",
    "default_step",
    "fitness",
    "integrate",
    "payoffs_for",
    "rest_point_check",
]


def default_step(delay: float, horizon: float) -> float:
    """``min(tau / 10, horizon / 100)``, shrunk so that it divides ``tau``."""
    if delay <= 0:
        return 0.01 * horizon
    h = min(delay / 10.0, 0.01 * horizon)
    return delay / np.ceil(delay / h - 1e-9)


@dataclass(frozen=True)
class ReplicatorConfig:
    strategies: tuple[Strategy, ...]
    capacity: float
    lam: float
    gain: float
    delay: float
    mode: str
    initial_shares: tuple[float, ...]
    horizon: float
    step: float | None = None

    def __post_init__(self):
        game = GameConfig(tuple(_as_strategy(s) for s in self.strategies), self.capacity, self.lam)
        object.__setattr__(self, "strategies", game.strategies)
        object.__setattr__(self, "capacity", game.capacity)
        object.__setattr__(self, "lam", game.lam)
        if self.mode not in MODES:
            raise ValidationError(f"mode must be one of {MODES}, got {self.mode!r}", "mode")
        if not self.gain > 0 or not np.isfinite(self.gain):
            raise ValidationError("gain must be positive", "gain")
        if not self.delay >= 0 or not np.isfinite(self.delay):
            raise ValidationError("delay must be nonnegative", "delay")
        if not self.horizon > 0 or not np.isfinite(self.horizon):
            raise ValidationError("horizon must be positive", "horizon")
        shares = tuple(float(v) for v in self.initial_shares)
        if len(shares) != len(game.strategies):
            raise ValidationError(
                f"initial_shares must have {len(game.strategies)} entries", "initial_shares"
            )
        if min(shares) < 0 or abs(sum(shares) - 1.0) > 1e-12:
            raise ValidationError("initial_shares must be nonnegative and sum to 1", "initial_shares")
        object.__setattr__(self, "initial_shares", shares)

        step = default_step(self.delay, self.horizon) if self.step is None else float(self.step)
        if not step > 0:
            raise ValidationError("step must be positive", "step")
        if self.delay > 0:
            ratio = self.delay / step
            if abs(ratio - round(ratio)) > 1e-9 * max(1.0, ratio) or round(ratio) < 1:
                raise ValidationError(
                    f"step {step!r} must divide delay {self.delay!r} a whole number of times", "step"
                )
        object.__setattr__(self, "step", step)

    @property
    def game(self) -> GameConfig:
        return GameConfig(self.strategies, self.capacity, self.lam)

    @property
    def delay_steps(self) -> int:
        return int(round(self.delay / self.step)) if self.delay > 0 else 0


@dataclass(frozen=True, eq=False)
class ShareTrajectory:
    times: np.ndarray
    shares: np.ndarray
    outcome: str

    @property
    def final(self) -> np.ndarray:
        return self.shares[-1]


def payoffs_for(config: ReplicatorConfig) -> np.ndarray:
    """Payoff matrix or three-player tensor, depending on the mode."""
    if config.mode == "pairwise":
        return payoff_matrix(config.game)
    return payoff_tensor_3(config.game)


def fitness(shares, payoffs, mode: str) -> np.ndarray:
    """Fitness of each strategy in a population with the given shares."""
    x = np.asarray(shares, dtype=float)
    payoffs = np.asarray(payoffs, dtype=float)
    n = x.size
    if mode == "pairwise":
        if payoffs.shape != (n, n):
            raise ValidationError(f"pairwise mode needs a {n}x{n} payoff matrix", "mode")
        return payoffs @ x
    if mode == "triple":
        if payoffs.shape != (n, n, n):
            raise ValidationError(f"triple mode needs a {n}x{n}x{n} payoff tensor", "mode")
        return np.einsum("ipq,p,q->i", payoffs, x, x)
    raise ValidationError(f"unknown mode {mode!r}", "mode")


def _velocity(current: np.ndarray, delayed: np.ndarray, payoffs, mode: str, gain: float) -> np.ndarray:
    f = fitness(delayed, payoffs, mode)
    return gain * current * (f - delayed @ f)


def _tangent(current: np.ndarray, velocity: np.ndarray) -> np.ndarray:
    # derivative of the renormalised path
    return velocity - current * velocity.sum()


def integrate(config: ReplicatorConfig) -> ShareTrajectory:
    """Integrate the delayed replicator equation up to ``config.horizon``.

    Raises
    ------
    ModelInconsistencyError
        If a share drops below ``-NEGATIVE_TOL`` or the state stops being finite;
        both indicate a step too coarse for the gain and payoff scale.
    """
    payoffs = payoffs_for(config)
    h = config.step
    m = config.delay_steps
    n_steps = int(np.ceil(config.horizon / h - 1e-9))
    times = np.arange(n_steps + 1) * h

    x0 = np.array(config.initial_shares)
    xs = np.empty((n_steps + 1, x0.size))
    ds = np.empty_like(xs)  # path derivative at grid points, for off-grid delayed values
    xs[0] = x0

    def delayed(k: int, frac: float) -> np.ndarray:
        # state at grid time (k + frac) * h; negative times are history
        if k < 0:
            return x0
        if frac == 0.0:
            return xs[k]
        y0, y1, d0, d1 = xs[k], xs[k + 1], ds[k], ds[k + 1]
        s = frac
        h00 = 2 * s**3 - 3 * s**2 + 1
        h10 = s**3 - 2 * s**2 + s
        h01 = -2 * s**3 + 3 * s**2
        h11 = s**3 - s**2
        return h00 * y0 + h10 * h * d0 + h01 * y1 + h11 * h * d1

    gain, mode = config.gain, config.mode
    for n in range(n_steps):
        x = xs[n]
        if m == 0:
            def rhs(y, _frac):
                return _velocity(y, y, payoffs, mode, gain)
        else:
            def rhs(y, frac, base=n - m):
                # a whole-step delayed lookup lands on the next grid point
                if frac == 1.0:
                    return _velocity(y, delayed(base + 1, 0.0), payoffs, mode, gain)
                return _velocity(y, delayed(base, frac), payoffs, mode, gain)

        k1 = rhs(x, 0.0)
        ds[n] = _tangent(x, k1)
        k2 = rhs(x + 0.5 * h * k1, 0.5)
        k3 = rhs(x + 0.5 * h * k2, 0.5)
        k4 = rhs(x + h * k3, 1.0)
        nxt = x + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)

        if not np.all(np.isfinite(nxt)):
            raise ModelInconsistencyError(
                f"replicator state diverged at t={times[n + 1]:g}; reduce the step (currently {h:g})"
            )
        if nxt.min() < -NEGATIVE_TOL:
            raise ModelInconsistencyError(
                f"share fell to {nxt.min():.3g} at t={times[n + 1]:g}; "
                f"reduce the step (currently {h:g}) or the gain"
            )
        nxt = np.clip(nxt, 0.0, None)
        xs[n + 1] = nxt / nxt.sum()

    return ShareTrajectory(times, xs, _classify(times, xs, config.horizon))


def _classify(times: np.ndarray, xs: np.ndarray, horizon: float) -> str:
    final = xs[-1]
    top = int(np.argmax(final))
    if final[top] > 1.0 - FIXATION_TOL:
        return f"fixation(s{top + 1})"
    tail = xs[times >= times[-1] - 0.1 * horizon]
    if np.max(np.abs(tail - final)) < REST_TOL:
        return "interior"
    return "undecided"


@dataclass(frozen=True)
class RestPointResidual:
    """``support_gap``: max over the support of ``|f_i - mean f|``.
    ``vector_field``: max of ``|x_i (f_i - mean f)|``, zero at every rest point.
    """

    support_gap: float
    vector_field: float


def rest_point_check(config: ReplicatorConfig, shares: Sequence[float]) -> RestPointResidual:
    """How far ``shares`` is from being a rest point of the replicator flow."""
    x = np.asarray(shares, dtype=float)
    if x.size != len(config.strategies) or x.min() < -NEGATIVE_TOL or abs(x.sum() - 1) > 1e-9:
        raise ValidationError("shares must be a point of the simplex", "shares")
    f = fitness(x, payoffs_for(config), config.mode)
    gap = f - x @ f
    support = x > 0
    return RestPointResidual(
        support_gap=float(np.max(np.abs(gap[support]))),
        vector_field=float(np.max(np.abs(x * gap))),
    )
