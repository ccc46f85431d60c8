"""Policy search: feasibility, descent, grid agreement, reproducibility."""

import numpy as np
import pytest

from aojc.analytics import maxage_total_cost, randomized_total_cost
from aojc.model import SchedulerKind, SystemParams, subset_members
from aojc.optimizer import (
    OptimizerSettings,
    build_maxage_policy,
    build_randomized_policy,
    load_policy,
    optimize_maxage_subset,
    optimize_randomized_subset,
    save_policy,
)

FAST = OptimizerSettings(restarts=4)


@pytest.fixture(scope="module")
def params3():
    return SystemParams(
        n_users=3,
        arrival_rates=np.array([0.02, 0.04, 0.06]),
        service_rates=np.array([0.3, 0.6, 0.95]),
        flip_prob=0.45,
        post_busy_prob=0.55,
        sampling_cost=3.0,
    )


class TestRandomizedSubset:
    def test_feasible_solution(self, params3):
        res = optimize_randomized_subset(params3, 0b111, FAST)
        assert 0.001 <= res.sampling_prob <= 0.999
        dist = res.schedule_dist
        assert dist.shape == (3,)
        assert float(dist.sum()) == pytest.approx(1.0, abs=1e-12)
        assert np.all(dist[list(subset_members(0b111))] > 0)

    def test_support_restricted_to_members(self, params3):
        res = optimize_randomized_subset(params3, 0b101, FAST)
        assert res.schedule_dist[1] == 0.0

    def test_descent_from_canonical_start(self, params3):
        res = optimize_randomized_subset(params3, 0b111, FAST)
        assert res.objective <= res.canonical_objective + 1e-12
        # reported objective is reproducible from the returned point
        recomputed = randomized_total_cost(
            params3, 0b111, res.sampling_prob, res.schedule_dist
        )
        assert recomputed == pytest.approx(res.objective, rel=1e-12)

    def test_bit_identical_reruns(self, params3):
        a = optimize_randomized_subset(params3, 0b110, FAST)
        b = optimize_randomized_subset(params3, 0b110, FAST)
        assert a.sampling_prob == b.sampling_prob
        assert np.array_equal(a.schedule_dist, b.schedule_dist)
        assert a.objective == b.objective

    def test_more_restarts_never_worse(self, params3):
        few = optimize_randomized_subset(params3, 0b111, OptimizerSettings(restarts=2))
        many = optimize_randomized_subset(params3, 0b111, OptimizerSettings(restarts=8))
        assert many.objective <= few.objective + 1e-12

    def test_symmetric_pair_splits_evenly(self):
        params = SystemParams(
            n_users=2,
            arrival_rates=np.array([0.05, 0.05]),
            service_rates=np.array([0.6, 0.6]),
            flip_prob=0.5,
            post_busy_prob=0.5,
            sampling_cost=2.0,
        )
        res = optimize_randomized_subset(params, 0b11, OptimizerSettings(restarts=8))
        assert res.schedule_dist[0] == pytest.approx(0.5, abs=1e-3)

    def test_grid_agreement_singleton(self, params3):
        res = optimize_randomized_subset(params3, 0b001, FAST)
        mus = np.linspace(0.001, 0.999, 600)
        grid_best = min(
            randomized_total_cost(params3, 0b001, m, np.array([1.0, 0, 0])) for m in mus
        )
        assert res.objective <= grid_best * 1.01

    def test_grid_agreement_pair(self, params3):
        res = optimize_randomized_subset(params3, 0b011, OptimizerSettings(restarts=8))
        best = np.inf
        for mu in np.linspace(0.01, 0.999, 120):
            for pi1 in np.linspace(0.01, 0.99, 99):
                dist = np.array([pi1, 1.0 - pi1, 0.0])
                best = min(best, randomized_total_cost(params3, 0b011, mu, dist))
        assert res.objective <= best * 1.01


class TestMaxageSubset:
    def test_matches_dense_grid(self, params3):
        res = optimize_maxage_subset(params3, 0b111)
        mus = np.linspace(0.001, 0.999, 4000)
        vals = [maxage_total_cost(params3, 0b111, m) for m in mus]
        k = int(np.argmin(vals))
        assert res.objective <= vals[k] + 1e-9
        assert abs(res.sampling_prob - mus[k]) < 1e-3

    def test_bit_identical_reruns(self, params3):
        a = optimize_maxage_subset(params3, 0b011)
        b = optimize_maxage_subset(params3, 0b011)
        assert a.sampling_prob == b.sampling_prob
        assert a.objective == b.objective


class TestPolicyBuild:
    def test_randomized_policy_covers_all_subsets(self, params3):
        policy, results = build_randomized_policy(params3, FAST)
        assert sorted(policy.table) == list(range(1, 8))
        assert len(results) == 7
        assert policy.scheduler is SchedulerKind.RANDOMIZED
        for res in results:
            assert res.converged

    def test_maxage_policy_covers_all_subsets(self, params3):
        policy, results = build_maxage_policy(params3)
        assert sorted(policy.table) == list(range(1, 8))
        assert policy.scheduler is SchedulerKind.MAX_AGE

    def test_save_load_round_trip(self, params3, tmp_path):
        policy, results = build_maxage_policy(params3)
        path = tmp_path / "policy.json"
        save_policy(path, policy, results)
        loaded = load_policy(path)
        assert loaded.scheduler is policy.scheduler
        for mask in policy.table:
            assert loaded.table[mask].sampling_prob == policy.table[mask].sampling_prob
            a = loaded.table[mask].schedule_dist
            b = policy.table[mask].schedule_dist
            if b is None:
                assert a is None
            else:
                assert np.array_equal(a, b)
