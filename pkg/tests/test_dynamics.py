from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from aimd_arena.dynamics import (
    StrategyProfile,
    average_throughput,
    drop_map,
    fixed_point,
    iterate_drop_map,
    next_drop,
    simulate,
    verify_convergence,
)
from aimd_arena.errors import ModelInconsistencyError, ValidationError
from aimd_arena.network import compute_load_matrix, klimov, reentrant, single_server

E1 = StrategyProfile([1.5, 1.0], [0.75, 0.25])
# exact limit cycle of E1 on capacity 50: gamma = (6, 4/3), T = 50 / (22/3)
E1_T = float(Fraction(75, 11))
E1_PEAK = np.array([float(Fraction(450, 11)), float(Fraction(100, 11))])


def bisect_hit_time(xi, x, alpha, hi=1e6):
    """Brute-force oracle: first t with max(xi @ (x + alpha t)) >= 1."""
    lo = 0.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if np.max(xi @ (x + alpha * mid)) >= 1.0:
            hi = mid
        else:
            lo = mid
    return hi


def random_case(rng, kind):
    n = int(rng.integers(1, 6))
    if kind == "single_server":
        top = single_server(rng.uniform(5, 100), n)
    elif kind == "klimov":
        top = klimov(rng.uniform(5, 100, n))
    else:
        top = reentrant(*rng.uniform(5, 100, 3), n)
    profile = StrategyProfile(rng.uniform(0.1, 3, n), rng.uniform(0, 0.9, n))
    lm = compute_load_matrix(top)
    x0 = rng.uniform(0, 1, n)
    x0 *= rng.uniform(0, 1) / np.max(lm.xi @ x0)
    return top, profile, x0


class TestStrategyProfile:
    def test_gamma(self):
        np.testing.assert_allclose(E1.gamma, [6.0, 4.0 / 3.0])

    @pytest.mark.parametrize("alpha, beta", [([1], [1.0]), ([1], [-0.1]), ([-1], [0.5]), ([1, 2], [0.5])])
    def test_invalid(self, alpha, beta):
        with pytest.raises(ValidationError):
            StrategyProfile(alpha, beta)

    def test_beta_zero_allowed(self):
        assert StrategyProfile([1], [0.0]).gamma[0] == 1.0


class TestNextDrop:
    def test_symmetric_fill(self):
        t, pre, rows = next_drop([0, 0], StrategyProfile([1, 1], [0.5, 0.5]), compute_load_matrix(single_server(50, 2)))
        assert t == pytest.approx(25, abs=1e-12)
        np.testing.assert_allclose(pre, [25, 25], atol=1e-12)
        assert rows == {0}

    def test_asymmetric(self):
        t, pre, _ = next_drop([10, 20], StrategyProfile([1.5, 1], [0.5, 0.5]), compute_load_matrix(single_server(50, 2)))
        assert t == pytest.approx(8, abs=1e-12)
        np.testing.assert_allclose(pre, [22, 28], atol=1e-12)

    def test_reentrant_both_rows(self):
        t, pre, rows = next_drop([0], StrategyProfile([1], [0.5]), compute_load_matrix(reentrant(4, 2, 4, 1)))
        assert t == pytest.approx(2, abs=1e-12)
        assert rows == {0, 1}

    def test_outside_w(self):
        with pytest.raises(ValidationError):
            next_drop([40, 40], E1, compute_load_matrix(single_server(50, 2)))

    def test_never_overloads(self):
        with pytest.raises(ModelInconsistencyError):
            next_drop([1, 1], StrategyProfile([0, 0], [0.5, 0.5]), compute_load_matrix(single_server(50, 2)))

    @pytest.mark.parametrize("seed", range(30))
    def test_matches_bisection(self, seed):
        rng = np.random.default_rng(seed)
        top, profile, x0 = random_case(rng, ["single_server", "klimov", "reentrant"][seed % 3])
        lm = compute_load_matrix(top)
        t, pre, _ = next_drop(x0, profile, lm)
        assert t == pytest.approx(bisect_hit_time(lm.xi, x0, profile.alpha), rel=1e-9, abs=1e-9)
        assert np.max(lm.xi @ pre) == pytest.approx(1.0, abs=1e-9)


class TestDropMap:
    def test_fixed_point_is_fixed(self):
        lm = compute_load_matrix(single_server(50, 2))
        fp = fixed_point(lm, E1)
        np.testing.assert_allclose(drop_map(fp.peak_rates, E1, lm), fp.peak_rates, rtol=0, atol=1e-12)

    def test_worked_example(self):
        lm = compute_load_matrix(single_server(50, 2))
        np.testing.assert_allclose(drop_map([50, 0], E1, lm), [45, 5], atol=1e-12)

    def test_requires_peak_on_boundary(self):
        with pytest.raises(ValidationError):
            drop_map([10, 10], E1, compute_load_matrix(single_server(50, 2)))

    def test_interior_condition_violation_is_reported(self):
        # beta rounds up to within the interior margin of 1
        profile = StrategyProfile([1.0], [1 - 1e-14])
        with pytest.raises(ModelInconsistencyError, match="strictly inside"):
            drop_map([50.0], profile, compute_load_matrix(single_server(50, 1)))

    def test_iteration_converges_on_e1(self):
        lm = compute_load_matrix(single_server(50, 2))
        z = np.array([50.0, 0.0])
        for n in range(200):
            z = drop_map(z, E1, lm)
        assert np.max(np.abs(z - E1_PEAK)) < 1e-8

    @pytest.mark.parametrize("seed", range(20))
    def test_contracts_from_random_peaks(self, seed):
        rng = np.random.default_rng(seed)
        top, profile, _ = random_case(rng, ["single_server", "klimov", "reentrant"][seed % 3])
        lm = compute_load_matrix(top)
        v = rng.uniform(0, 1, profile.size)
        v /= np.max(lm.xi @ v)
        z, iterations = iterate_drop_map(v, profile, lm)
        assert iterations <= 500
        np.testing.assert_allclose(z, fixed_point(lm, profile).peak_rates, rtol=0, atol=1e-8)


class TestSimulate:
    def test_symmetric_first_drop_and_period(self):
        profile = StrategyProfile([1, 1], [0.5, 0.5])
        tr = simulate(single_server(50, 2), profile, [0, 0], max_drops=60)
        assert tr.events[0].time == pytest.approx(25)
        np.testing.assert_allclose(tr.events[0].pre_rates, [25, 25])
        assert tr.intervals[-1] == pytest.approx(12.5, abs=1e-10)

    def test_periodic_from_post_drop_state(self):
        profile = StrategyProfile([1, 1], [0.5, 0.5])
        tr = simulate(single_server(50, 2), profile, [12.5, 12.5], max_drops=20)
        np.testing.assert_allclose(tr.peaks, np.full((20, 2), 25.0), rtol=0, atol=1e-12)
        np.testing.assert_allclose(tr.intervals, 12.5, rtol=0, atol=1e-12)

    def test_e1_converges(self):
        tr = simulate(single_server(50, 2), E1, [0, 0], max_drops=200)
        np.testing.assert_allclose(tr.peaks[-1], E1_PEAK, rtol=0, atol=1e-8)
        assert tr.intervals[-1] == pytest.approx(E1_T, abs=1e-8)

    def test_events_satisfy_invariants(self):
        top = reentrant(3, 4, 5, 3)
        lm = compute_load_matrix(top)
        profile = StrategyProfile([1, 2, 0.5], [0.3, 0.6, 0.1])
        tr = simulate(top, profile, [0.1, 0.2, 0.3], max_drops=100)
        times = tr.drop_times
        assert np.all(np.diff(times) > 0)
        for e in tr.events:
            np.testing.assert_array_equal(e.post_rates, profile.beta * e.pre_rates)
            assert abs(np.max(lm.xi @ e.pre_rates) - 1) <= 1e-9
            assert e.binding_rows
        # affine between drops, contained in W
        for t in np.linspace(times[0], times[-1], 997):
            assert np.max(lm.xi @ tr.rates_at(t)) <= 1 + 1e-9
        k = 10
        mid = 0.5 * (times[k] + times[k + 1])
        np.testing.assert_allclose(
            tr.rates_at(mid), tr.events[k].post_rates + profile.alpha * (mid - times[k]), rtol=1e-14
        )

    def test_max_time_stop(self):
        tr = simulate(single_server(50, 2), E1, [0, 0], max_time=30.0)
        assert tr.horizon == 30.0
        assert tr.drop_times[-1] <= 30.0
        assert tr.rates_at(30.0).shape == (2,)

    def test_initial_state_outside_w(self):
        with pytest.raises(ValidationError):
            simulate(single_server(50, 2), E1, [30, 30], max_drops=5)

    def test_frozen_rates(self):
        profile = StrategyProfile([0.0, 0.0], [0.5, 0.5])
        tr = simulate(single_server(50, 2), profile, [10, 20], max_time=100)
        assert tr.events == ()
        with pytest.raises(ModelInconsistencyError):
            simulate(single_server(50, 2), profile, [10, 20], max_drops=3)

    def test_needs_stop(self):
        with pytest.raises(ValidationError):
            simulate(single_server(50, 2), E1, [0, 0])


class TestFixedPoint:
    def test_single_server_closed_form(self):
        fp = fixed_point(single_server(50, 2), E1)
        assert fp.period == pytest.approx(E1_T, rel=1e-14)
        np.testing.assert_allclose(fp.peak_rates, E1_PEAK, rtol=1e-14)

    def test_klimov(self):
        fp = fixed_point(klimov([10, 20]), StrategyProfile([1, 1], [0.5, 0.5]))
        assert fp.period == pytest.approx(10 / 3, rel=1e-14)
        np.testing.assert_allclose(fp.peak_rates, [20 / 3, 20 / 3], rtol=1e-14)

    def test_reentrant_both_rows_bind(self):
        fp = fixed_point(reentrant(4, 2, 4, 1), StrategyProfile([1], [0.5]))
        assert fp.period == pytest.approx(1.0, rel=1e-14)
        np.testing.assert_allclose(fp.peak_rates, [2.0])
        assert fp.binding_rows == {0, 1}

    def test_reentrant_uses_max_row(self):
        # node 2 is the tighter constraint: 1/p2 = 1 > 1/p1 + 1/p3 = 0.2
        fp = fixed_point(reentrant(10, 1, 10, 1), StrategyProfile([1], [0.5]))
        assert fp.period == pytest.approx(0.5)
        assert fp.binding_rows == {1}

    @settings(max_examples=100)
    @given(
        alpha=st.lists(st.floats(0.01, 10), min_size=1, max_size=6),
        data=st.data(),
    )
    def test_fixed_point_equation(self, alpha, data):
        beta = data.draw(st.lists(st.floats(0, 0.99), min_size=len(alpha), max_size=len(alpha)))
        p = data.draw(st.floats(1, 1000))
        profile = StrategyProfile(alpha, beta)
        fp = fixed_point(single_server(p, len(alpha)), profile)
        residual = profile.beta * fp.peak_rates + profile.alpha * fp.period - fp.peak_rates
        assert np.max(np.abs(residual)) <= 1e-14 * max(1.0, np.max(fp.peak_rates))
        np.testing.assert_allclose(fp.peak_rates, profile.gamma * fp.period, rtol=1e-15)
        assert np.max(compute_load_matrix(single_server(p, len(alpha))).xi @ fp.peak_rates) == pytest.approx(1, abs=1e-12)


class TestThroughput:
    def test_symmetric(self):
        profile = StrategyProfile([1, 1], [0.5, 0.5])
        thp = average_throughput(fixed_point(single_server(50, 2), profile), profile)
        np.testing.assert_allclose(thp, [18.75, 18.75])

    def test_e1(self):
        thp = average_throughput(fixed_point(single_server(50, 2), E1), E1)
        np.testing.assert_allclose(thp, [0.875 * 450 / 11, 0.625 * 100 / 11], rtol=1e-14)
        np.testing.assert_allclose(thp, [35.79545, 5.68182], atol=1e-5)

    def test_sawtooth_to_zero(self):
        profile = StrategyProfile([1], [0.0])
        thp = average_throughput(fixed_point(single_server(50, 1), profile), profile)
        assert thp[0] == pytest.approx(25.0)


class TestVerifyConvergence:
    def test_exact_start_has_zero_distance(self):
        profile = StrategyProfile([1, 1], [0.5, 0.5])
        fp = fixed_point(single_server(50, 2), profile)
        tr = simulate(single_server(50, 2), profile, profile.beta * fp.peak_rates, max_drops=10)
        rep = verify_convergence(tr, fp)
        np.testing.assert_array_equal(rep.distances, 0.0)
        assert rep.eventually_monotone and not rep.failed

    def test_roundoff_jitter_is_not_failure(self):
        # one user lands on the cycle at its first drop; later peaks jitter in the last bit
        profile = StrategyProfile([2.1848301], [0.07000014])
        top = single_server(38.87429288, 1)
        tr = simulate(top, profile, [0.0], max_drops=200)
        rep = verify_convergence(tr, fixed_point(top, profile))
        assert rep.final_distance < 1e-12
        assert rep.eventually_monotone and not rep.failed

    def test_e1(self):
        tr = simulate(single_server(50, 2), E1, [0, 0], max_drops=200)
        rep = verify_convergence(tr, fixed_point(single_server(50, 2), E1))
        assert rep.final_distance < 1e-8
        assert rep.eventually_monotone and not rep.failed

    def test_too_few_drops(self):
        tr = simulate(single_server(50, 2), E1, [0, 0], max_drops=2)
        with pytest.raises(ValidationError):
            verify_convergence(tr, fixed_point(single_server(50, 2), E1))

    def test_detects_a_wrong_target(self):
        tr = simulate(single_server(50, 2), E1, [0, 0], max_drops=60)
        wrong = fixed_point(single_server(50, 2), StrategyProfile([1, 1], [0.5, 0.5]))
        rep = verify_convergence(tr, wrong)
        assert rep.final_distance > 1

    @pytest.mark.parametrize("seed", range(100))
    def test_random_start_converges(self, seed):
        rng = np.random.default_rng(seed)
        lm = compute_load_matrix(single_server(50, 2))
        x0 = rng.uniform(0, 1, 2)
        x0 *= rng.uniform(0, 1) / np.max(lm.xi @ x0)
        tr = simulate(single_server(50, 2), E1, x0, max_drops=500)
        rep = verify_convergence(tr, fixed_point(lm, E1))
        assert rep.final_distance < 1e-6
