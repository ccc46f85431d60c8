"""Closed-form evaluators: hand-checkable values, identities, edge behavior.

The frozen constants below are enumerable by hand from the renewal structure:
with sampling probability 1 and a symmetric machine, the free/busy phases are
short enough that the cycle moments can be listed exhaustively.
"""

import numpy as np
import pytest

from aojc.analytics import (
    UserCountMode,
    acquisition_moments,
    chi,
    closed_form_report,
    free_find_prob,
    maxage_age,
    maxage_sampling_cost,
    maxage_total_cost,
    randomized_age,
    randomized_ages,
    randomized_sampling_bound,
    randomized_total_cost,
)
from aojc.model import SchedulerKind, SystemParams

TOL = 1e-9


def single_user(q, s, qbar, L=5.0) -> SystemParams:
    return SystemParams(1, np.array([0.01]), np.array([qbar]), q, s, L)


ONE = np.array([1.0])


class TestHandValues:
    def test_randomized_age_two_slot_cycle(self):
        # always sample, instant service: cycle = find-free time = 2 slots
        assert randomized_age(single_user(0.5, 0.5, 1.0), 0b1, 1.0, ONE, 0) == pytest.approx(2.0, abs=TOL)

    def test_randomized_age_sticky_machine(self):
        # busy phase lasts 1/q = 4 slots on average, lifting the cycle
        val = randomized_age(single_user(0.25, 0.5, 1.0), 0b1, 1.0, ONE, 0)
        assert val == pytest.approx(11.0 / 3.0, abs=TOL)

    def test_sampling_bound_value(self):
        val = randomized_sampling_bound(single_user(0.5, 0.5, 1.0, L=5.0), 0b1, 1.0, ONE)
        assert val == pytest.approx(4.0, abs=TOL)

    def test_maxage_age_matches_two_slot_cycle(self):
        assert maxage_age(single_user(0.5, 0.5, 1.0), 0b1, 1.0) == pytest.approx(2.0, abs=TOL)

    def test_maxage_sampling_cost_value(self):
        val = maxage_sampling_cost(single_user(0.5, 0.5, 1.0, L=5.0), 0b1, 1.0)
        assert val == pytest.approx(5.0, abs=TOL)

    def test_maxage_age_half_sampling(self):
        assert maxage_age(single_user(0.5, 0.5, 1.0), 0b1, 0.5) == pytest.approx(4.0, abs=TOL)


class TestAcquisitionMoments:
    def test_always_sampling_moments(self):
        first, second = acquisition_moments(1.0, 0.5, 0.5)
        assert first == pytest.approx(2.0, abs=TOL)
        assert second == pytest.approx(6.0, abs=TOL)

    def test_half_sampling_moments(self):
        first, second = acquisition_moments(0.5, 0.5, 0.5)
        assert first == pytest.approx(4.0, abs=TOL)
        assert second == pytest.approx(28.0, abs=TOL)

    def test_second_moment_dominates_square(self):
        # variance of the acquisition time is strictly positive
        for mu in (0.3, 0.6, 1.0):
            for q in (0.2, 0.5, 0.8):
                first, second = acquisition_moments(mu, q, 0.5)
                assert second > first**2 - TOL


class TestChi:
    def test_low_flip_branch(self):
        assert chi(0.3, 0.9) == pytest.approx(0.7, abs=TOL)
        assert chi(0.5, 0.1) == pytest.approx(0.5, abs=TOL)

    def test_continuous_at_one_half(self):
        for s in np.linspace(0.02, 0.98, 25):
            lo = chi(0.5 - 1e-13, s)
            hi = chi(0.5 + 1e-13, s)
            assert abs(lo - hi) < 1e-12

    def test_range_open_unit_interval(self):
        qs = np.linspace(0.01, 0.99, 50)
        ss = np.linspace(0.01, 0.99, 50)
        vals = np.array([[chi(q, s) for s in ss] for q in qs])
        assert np.all(vals > 0.0)
        assert np.all(vals < 1.0)


class TestIdentities:
    def test_singleton_families_agree(self):
        # with one user the two scheduling families collapse to the same policy
        for mu in np.linspace(0.2, 1.0, 5):
            for q1 in np.linspace(0.2, 1.0, 5):
                p = single_user(0.4, 0.7, q1)
                a = randomized_age(p, 0b1, mu, ONE, 0)
                b = maxage_age(p, 0b1, mu)
                assert a == pytest.approx(b, abs=TOL)

    def test_vectorized_matches_scalar(self, four_user_params):
        dist = np.array([0.1, 0.2, 0.3, 0.4])
        ages = randomized_ages(four_user_params, 0b1111, 0.7, dist)
        for k in range(4):
            assert ages[k] == pytest.approx(
                randomized_age(four_user_params, 0b1111, 0.7, dist, k), abs=TOL
            )

    def test_total_cost_composition(self, four_user_params):
        dist = np.array([0.25, 0.25, 0.25, 0.25])
        total = randomized_total_cost(four_user_params, 0b1111, 0.8, dist)
        ages = randomized_ages(four_user_params, 0b1111, 0.8, dist)
        bound = randomized_sampling_bound(four_user_params, 0b1111, 0.8, dist)
        assert total == pytest.approx(float(ages.sum()) + bound, abs=TOL)

        mtotal = maxage_total_cost(four_user_params, 0b0111, 0.6)
        mage = maxage_age(four_user_params, 0b0111, 0.6)
        mcost = maxage_sampling_cost(four_user_params, 0b0111, 0.6)
        assert mtotal == pytest.approx(3 * mage + mcost, abs=TOL)


class TestUserCountMode:
    def test_modes_agree_on_full_set(self, four_user_params):
        a = maxage_age(four_user_params, 0b1111, 0.7, UserCountMode.SUBSET_SIZE)
        b = maxage_age(four_user_params, 0b1111, 0.7, UserCountMode.TOTAL_USERS)
        assert a == pytest.approx(b, abs=TOL)

    def test_modes_differ_on_proper_subset(self, four_user_params):
        a = maxage_age(four_user_params, 0b0011, 0.7, UserCountMode.SUBSET_SIZE)
        b = maxage_age(four_user_params, 0b0011, 0.7, UserCountMode.TOTAL_USERS)
        assert abs(a - b) > 1e-6


class TestFreeFindProb:
    def test_always_sampling(self):
        assert free_find_prob(0.5, 1.0) == pytest.approx(0.5, abs=TOL)

    def test_monotone_in_sampling_prob(self):
        vals = [free_find_prob(0.3, mu) for mu in np.linspace(0.1, 1.0, 10)]
        assert all(0.0 < v < 1.0 for v in vals)


class TestReport:
    def test_report_rows_cover_members(self, four_user_params):
        rep = closed_form_report(
            four_user_params, 0b0111, SchedulerKind.RANDOMIZED, 0.7,
            np.array([0.2, 0.3, 0.5, 0.0]),
        )
        quantities = {(r.user, r.quantity) for r in rep.rows}
        for k in range(3):
            assert (k, "age") in quantities
        assert any(r.quantity == "sampling_bound" for r in rep.rows)

    def test_maxage_report(self, four_user_params):
        rep = closed_form_report(four_user_params, 0b1111, SchedulerKind.MAX_AGE, 0.8)
        assert any(r.quantity == "age" for r in rep.rows)
        assert any(r.quantity == "sampling_cost" for r in rep.rows)
