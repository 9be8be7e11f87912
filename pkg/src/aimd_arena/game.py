"""Protocol-selection game on a shared bottleneck.

Each player picks an AIMD strategy ``(alpha, beta)``. All flows share one
link of capacity ``c``, so the profile settles on the limit cycle with
period ``T = c / sum(gamma)`` and peaks ``x_i = gamma_i T``. A player's
payoff is its mean throughput minus ``lam`` times the loss-event rate::

    J_i = (1 + beta_i) x_i / 2 - lam / T

For two strategies ``s1``, ``s2`` define the invasion differentials::

    D1(lam) = J(s1, s2) - J(s2, s2)
    D2(lam) = J(s2, s1) - J(s1, s1)

Both are affine in ``lam`` with opposite slopes, so their sum is
independent of ``lam`` and the mixed equilibrium ``p = D1 / (D1 + D2)``
is affine in ``lam``. Regime boundaries are the roots of ``D1`` and ``D2``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import ModelInconsistencyError, ValidationError

#: Absolute tolerance for payoff ties and sign tests.
TIE_TOL = 1e-12

__all__ = [
    "EquilibriumResult",
    "GameConfig",
    "LambdaBounds",
    "Strategy",
    "best_response",
    "classify_equilibrium",
    "differentials",
    "dominance_threshold",
    "lambda_bounds",
    "mixed_probability",
    "payoff_matrix",
    "payoff_tensor_3",
    "profile_payoffs",
]


@dataclass(frozen=True)
class Strategy:
    alpha: float
    beta: float
    label: str = ""

    def __post_init__(self):
        if not np.isfinite(self.alpha) or self.alpha <= 0:
            raise ValidationError(f"alpha must be positive, got {self.alpha!r}", "alpha")
        if not np.isfinite(self.beta) or not 0 <= self.beta < 1:
            raise ValidationError(f"beta must lie in [0, 1), got {self.beta!r}", "beta")
        object.__setattr__(self, "alpha", float(self.alpha))
        object.__setattr__(self, "beta", float(self.beta))

    @property
    def gamma(self) -> float:
        return self.alpha / (1.0 - self.beta)

    @property
    def params(self) -> tuple[float, float]:
        return (self.alpha, self.beta)

    def __str__(self) -> str:
        return self.label or f"({self.alpha:g}, {self.beta:g})"


def _as_strategy(s) -> Strategy:
    if isinstance(s, Strategy):
        return s
    return Strategy(*s)


def _check_capacity(capacity: float) -> float:
    capacity = float(capacity)
    if not np.isfinite(capacity) or capacity <= 0:
        raise ValidationError(f"capacity must be positive, got {capacity!r}", "capacity")
    return capacity


def _check_lambda(lam: float) -> float:
    lam = float(lam)
    if not np.isfinite(lam) or lam < 0:
        raise ValidationError(f"lambda must be nonnegative, got {lam!r}", "lambda")
    return lam


@dataclass(frozen=True)
class GameConfig:
    strategies: tuple[Strategy, ...]
    capacity: float
    lam: float

    def __post_init__(self):
        strategies = tuple(_as_strategy(s) for s in self.strategies)
        if len(strategies) < 2:
            raise ValidationError("a game needs at least 2 strategies", "strategies")
        if len({s.params for s in strategies}) != len(strategies):
            raise ValidationError("strategies must have distinct (alpha, beta) pairs", "strategies")
        object.__setattr__(self, "strategies", strategies)
        object.__setattr__(self, "capacity", _check_capacity(self.capacity))
        object.__setattr__(self, "lam", _check_lambda(self.lam))


def profile_payoffs(chosen: Sequence, capacity: float, lam: float) -> np.ndarray:
    """Payoff of every player when the given strategies share one link."""
    capacity = _check_capacity(capacity)
    strategies = [_as_strategy(s) for s in chosen]
    if not strategies:
        raise ValidationError("need at least one player", "strategies")
    gamma = np.array([s.gamma for s in strategies])
    beta = np.array([s.beta for s in strategies])
    period = capacity / gamma.sum()
    peak = gamma * period
    return 0.5 * (1.0 + beta) * peak - lam / period


def payoff_matrix(config: GameConfig) -> np.ndarray:
    """``M[i, j]``: payoff to a player using strategy ``i`` against strategy ``j``."""
    s = config.strategies
    n = len(s)
    out = np.empty((n, n))
    for i in range(n):
        for j in range(n):
            out[i, j] = profile_payoffs([s[i], s[j]], config.capacity, config.lam)[0]
    return out


def payoff_tensor_3(config: GameConfig) -> np.ndarray:
    """``T[a, p, q]``: payoff to strategy ``a`` in a three-player profile with opponents ``p``, ``q``."""
    s = config.strategies
    n = len(s)
    out = np.empty((n, n, n))
    for a in range(n):
        for p in range(n):
            for q in range(p, n):
                val = profile_payoffs([s[a], s[p], s[q]], config.capacity, config.lam)[0]
                out[a, p, q] = out[a, q, p] = val
    return out


def best_response(strategies: Sequence, opponents: Sequence, capacity: float, lam: float) -> frozenset[int]:
    """Indices of strategies maximising the first player's payoff against ``opponents``."""
    strategies = [_as_strategy(s) for s in strategies]
    if not strategies:
        raise ValidationError("strategy set is empty", "strategies")
    opponents = [_as_strategy(s) for s in opponents]
    values = np.array(
        [profile_payoffs([s, *opponents], capacity, lam)[0] for s in strategies]
    )
    best = values.max()
    return frozenset(int(i) for i in np.flatnonzero(values >= best - TIE_TOL))


def differentials(s1, s2, capacity: float) -> tuple[tuple[float, float], tuple[float, float]]:
    """Affine coefficients ``((a1, b1), (a2, b2))`` with ``D1 = a1 + b1 lam``, ``D2 = a2 + b2 lam``.

    The slopes are the exact loss-rate differences ``(gamma2 - gamma1) / c``
    and their negation; intercepts come from the payoffs at ``lam = 0``.
    """
    s1, s2 = _as_strategy(s1), _as_strategy(s2)
    capacity = _check_capacity(capacity)
    a1 = profile_payoffs([s1, s2], capacity, 0.0)[0] - profile_payoffs([s2, s2], capacity, 0.0)[0]
    a2 = profile_payoffs([s2, s1], capacity, 0.0)[0] - profile_payoffs([s1, s1], capacity, 0.0)[0]
    slope = (s2.gamma - s1.gamma) / capacity
    return (a1, slope), (a2, -slope)


def mixed_probability(s1, s2, capacity: float, lam: float) -> float:
    """Probability of ``s1`` that makes the opponent indifferent; not clamped to ``[0, 1]``."""
    lam = _check_lambda(lam)
    (a1, b1), (a2, b2) = differentials(s1, s2, capacity)
    d1 = a1 + b1 * lam
    denom = a1 + a2  # slopes cancel
    if abs(denom) <= TIE_TOL:
        raise ValidationError("strategies are payoff-equivalent: mixing probability undefined", "strategies")
    return float(d1 / denom)


@dataclass(frozen=True)
class LambdaBounds:
    """Open interval of ``lam`` on which the mixed probability lies strictly inside (0, 1).

    ``regime`` is ``"hawk_dove"`` when both differentials are positive inside
    the interval (the mixed point is evolutionarily stable), ``"coordination"``
    when both are negative, and ``None`` when the interval is empty.
    ``side_condition`` holds when ``alpha2 (1 - beta1) - alpha1 (1 - beta2) < 0``,
    i.e. when ``s1`` takes the larger share of the link.
    """

    lo: float
    hi: float
    regime: str | None
    side_condition: bool

    @property
    def has_mixed(self) -> bool:
        return self.regime is not None

    def __contains__(self, lam: float) -> bool:
        return self.has_mixed and self.lo < lam < self.hi


def lambda_bounds(s1, s2, capacity: float) -> LambdaBounds:
    """Roots of ``p(lam) = 0`` and ``p(lam) = 1``, ordered.

    The interval is reported empty when it lies entirely at negative
    ``lam``.
    """
    s1, s2 = _as_strategy(s1), _as_strategy(s2)
    if s1.params == s2.params:
        raise ValidationError("strategies must be distinct", "strategies")
    (a1, b1), (a2, b2) = differentials(s1, s2, capacity)
    if b1 == 0.0:
        raise ValidationError("payoff differentials do not depend on lambda (equal gamma)", "strategies")
    side = bool(s2.alpha * (1.0 - s1.beta) - s1.alpha * (1.0 - s2.beta) < 0)
    root_p0 = -a1 / b1  # D1 = 0
    root_p1 = -a2 / b2  # D2 = 0
    lo, hi = sorted((float(root_p0), float(root_p1)))
    if hi <= 0 or hi - lo <= TIE_TOL * max(1.0, abs(hi)):
        return LambdaBounds(lo, hi, None, side)
    mid = 0.5 * (lo + hi)
    regime = "hawk_dove" if a1 + b1 * mid > 0 else "coordination"
    return LambdaBounds(lo, hi, regime, side)


@dataclass(frozen=True)
class EquilibriumResult:
    """Outcome of the two-strategy game at one ``lam``.

    ``kind`` is one of ``dominant_pure``, ``pure`` (two strict pure
    equilibria, a coordination game), ``mixed`` or ``degenerate``.
    ``equilibria`` lists the pure equilibrium indices (0 for ``s1``, 1 for
    ``s2``) and ``ess`` says, per entry of ``equilibria`` or for the single
    mixed point, whether it is evolutionarily stable.
    """

    kind: str
    equilibria: tuple[int, ...]
    mixing_probability: float | None
    lambda_interval: tuple[float, float]
    ess: tuple[bool, ...]
    d1: float
    d2: float

    @property
    def regime(self) -> str:
        if self.kind == "dominant_pure":
            return f"dominant_pure(s{self.equilibria[0] + 1})"
        if self.kind == "mixed":
            return "mixed"
        if self.kind == "pure":
            return "coordination"
        return "degenerate"


def classify_equilibrium(s1, s2, capacity: float, lam: float) -> EquilibriumResult:
    """Classify the symmetric two-strategy game by the signs of the invasion differentials."""
    lam = _check_lambda(lam)
    (a1, b1), (a2, b2) = differentials(s1, s2, capacity)
    d1, d2 = float(a1 + b1 * lam), float(a2 + b2 * lam)
    try:
        bounds = lambda_bounds(s1, s2, capacity)
        interval = (bounds.lo, bounds.hi)
    except ValidationError:
        interval = (float("nan"), float("nan"))

    def sign(v):
        return 0 if abs(v) <= TIE_TOL else (1 if v > 0 else -1)

    sd1, sd2 = sign(d1), sign(d2)
    if sd1 == 0 or sd2 == 0:
        return EquilibriumResult("degenerate", (), None, interval, (), d1, d2)
    p = d1 / (d1 + d2)
    if sd1 > 0 and sd2 < 0:
        return EquilibriumResult("dominant_pure", (0,), None, interval, (True,), d1, d2)
    if sd1 < 0 and sd2 > 0:
        return EquilibriumResult("dominant_pure", (1,), None, interval, (True,), d1, d2)
    if sd1 > 0 and sd2 > 0:
        return EquilibriumResult("mixed", (), p, interval, (True,), d1, d2)
    # both negative: each pure strategy is a strict best reply to itself
    return EquilibriumResult("pure", (0, 1), p, interval, (True, True), d1, d2)


def _aggressiveness_ordered(strategies: Sequence[Strategy]) -> bool:
    return all(
        a.alpha >= b.alpha and a.beta >= b.beta for a, b in zip(strategies, strategies[1:])
    )


def dominance_threshold(config: GameConfig, opponent_profiles: Iterable[Sequence] | None = None) -> float:
    """Largest ``lam`` below which the first (most aggressive) strategy is strictly dominant.

    Strategies must be ordered by aggressiveness: ``alpha`` and ``beta``
    both non-increasing. Every payoff comparison between ``s1`` and an
    alternative against a fixed opponent profile is affine in ``lam``; the
    threshold is the smallest root among them. Two-player games are checked
    against every opponent in the strategy set; larger games need
    ``opponent_profiles``, each a sequence of opposing strategies.

    Raises
    ------
    ValidationError
        If the strategies are not aggressiveness-ordered.
    ModelInconsistencyError
        If ``s1`` is not a strict best response even at ``lam = 0``.
    """
    strategies = config.strategies
    if not _aggressiveness_ordered(strategies):
        raise ValidationError(
            "strategies must be sorted by aggressiveness (alpha and beta non-increasing)", "strategies"
        )
    if opponent_profiles is None:
        profiles = [[s] for s in strategies]
    else:
        profiles = [[_as_strategy(s) for s in prof] for prof in opponent_profiles]
        if not profiles:
            raise ValidationError("opponent_profiles is empty", "opponent_profiles")

    first = strategies[0]
    threshold = np.inf
    for opp in profiles:
        for alt in strategies[1:]:
            # loss terms differ only through the deviator's own gamma
            a = (
                profile_payoffs([first, *opp], config.capacity, 0.0)[0]
                - profile_payoffs([alt, *opp], config.capacity, 0.0)[0]
            )
            b = (alt.gamma - first.gamma) / config.capacity
            if a <= TIE_TOL:
                raise ModelInconsistencyError(
                    f"{first} is not a strict best response to {[str(s) for s in opp]} even at lambda=0"
                )
            if b < 0:
                threshold = min(threshold, -a / b)
    return float(threshold)
