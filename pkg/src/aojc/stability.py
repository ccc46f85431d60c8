"""Sufficient conditions for queue stability, plus an empirical soundness sweep.

Three checks, all built on the availability factor chi(q, s): a per-subset
condition for randomized policies (total arrival rate below the worst-case
effective service rate of every subset's policy), the analogous per-subset
condition for max-age policies (which only credits the slowest member), and a
single worst-case condition using the minimum sampling probability and
service rate.  All three are sufficient, not necessary: a failed check means
"not guaranteed", never "unstable".

The sweep samples random systems and policies, evaluates each check, runs
simulations, and cross-tabulates verdicts so soundness (condition satisfied
implies no empirical divergence) can be audited on demand.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .analytics import chi
from .model import (
    AdaptivePolicy,
    SchedulerKind,
    SubsetPolicy,
    SystemParams,
    enumerate_subsets,
    subset_label,
    subset_members,
)
from .simulator import DriftThresholds, drift_diagnostic, run

__all__ = [
    "SubsetCondition",
    "StabilityReport",
    "WorstCaseReport",
    "randomized_stability_check",
    "maxage_stability_check",
    "worstcase_stability_check",
    "SweepCase",
    "SweepRow",
    "sample_sweep_case",
    "sufficiency_sweep",
    "aggregate_verdict",
]

DEFAULT_EPSILON = 1e-6


@dataclass(frozen=True)
class SubsetCondition:
    """One subset's drift margin: total arrival rate minus the guaranteed
    service rate while that subset is the active set.  Negative margins
    (<= -epsilon) are good."""

    subset: int
    margin: float
    service_rate: float
    satisfied: bool


@dataclass(frozen=True)
class StabilityReport:
    kind: str                 # "randomized" | "maxage"
    epsilon: float
    satisfied: bool
    worst_subset: int
    worst_margin: float
    conditions: tuple[SubsetCondition, ...]

    def condition(self, subset: int) -> SubsetCondition:
        for c in self.conditions:
            if c.subset == subset:
                return c
        raise KeyError(f"no condition for subset {subset_label(subset)}")


@dataclass(frozen=True)
class WorstCaseReport:
    epsilon: float
    satisfied: bool
    margin: float
    min_sampling_prob: float
    min_service_rate: float


def _epsilon_ok(epsilon: float) -> float:
    if not epsilon > 0.0:
        raise ValueError("epsilon must be positive")
    return float(epsilon)


def randomized_stability_check(
    params: SystemParams,
    policy: AdaptivePolicy,
    epsilon: float = DEFAULT_EPSILON,
) -> StabilityReport:
    """Per-subset sufficient condition for a randomized policy: for every
    non-empty subset S, total arrivals must undercut
    mu(S) * (1 - chi(q, s)) * sum_{i in S} pi_i(S) q_i by at least epsilon."""
    eps = _epsilon_ok(epsilon)
    if policy.scheduler is not SchedulerKind.RANDOMIZED:
        raise ValueError("randomized_stability_check needs a randomized policy")
    if policy.n_users != params.n_users:
        raise ValueError("policy and params disagree on the number of users")
    avail = 1.0 - chi(params.flip_prob, params.post_busy_prob)
    total_p = params.total_arrival_rate()
    conds = []
    for mask in enumerate_subsets(params.n_users):
        pol = policy.table[mask]
        members = subset_members(mask)
        rate = pol.sampling_prob * avail * float(
            np.sum(pol.schedule_dist[members] * params.service_rates[members])
        )
        margin = total_p - rate
        conds.append(SubsetCondition(mask, margin, rate, margin <= -eps))
    worst = max(conds, key=lambda c: c.margin)
    return StabilityReport(
        kind="randomized",
        epsilon=eps,
        satisfied=all(c.satisfied for c in conds),
        worst_subset=worst.subset,
        worst_margin=worst.margin,
        conditions=tuple(conds),
    )


def maxage_stability_check(
    params: SystemParams,
    policy: AdaptivePolicy,
    epsilon: float = DEFAULT_EPSILON,
) -> StabilityReport:
    """Per-subset sufficient condition for a max-age policy: like the
    randomized check but crediting only the subset's slowest service rate,
    since oldest-first may park on any member."""
    eps = _epsilon_ok(epsilon)
    if policy.scheduler is not SchedulerKind.MAX_AGE:
        raise ValueError("maxage_stability_check needs a max-age policy")
    if policy.n_users != params.n_users:
        raise ValueError("policy and params disagree on the number of users")
    avail = 1.0 - chi(params.flip_prob, params.post_busy_prob)
    total_p = params.total_arrival_rate()
    conds = []
    for mask in enumerate_subsets(params.n_users):
        members = subset_members(mask)
        rate = policy.table[mask].sampling_prob * avail * float(
            params.service_rates[members].min()
        )
        margin = total_p - rate
        conds.append(SubsetCondition(mask, margin, rate, margin <= -eps))
    worst = max(conds, key=lambda c: c.margin)
    return StabilityReport(
        kind="maxage",
        epsilon=eps,
        satisfied=all(c.satisfied for c in conds),
        worst_subset=worst.subset,
        worst_margin=worst.margin,
        conditions=tuple(conds),
    )


def worstcase_stability_check(
    params: SystemParams,
    policy: AdaptivePolicy,
    epsilon: float = DEFAULT_EPSILON,
) -> WorstCaseReport:
    """Single sufficient condition using only the policy's smallest sampling
    probability and the system's smallest service rate.  Stricter than the
    per-subset checks: passing here implies they pass too."""
    eps = _epsilon_ok(epsilon)
    if policy.n_users != params.n_users:
        raise ValueError("policy and params disagree on the number of users")
    mu_min = min(pol.sampling_prob for pol in policy.table.values())
    q_min = float(params.service_rates.min())
    avail = 1.0 - chi(params.flip_prob, params.post_busy_prob)
    margin = params.total_arrival_rate() - mu_min * avail * q_min
    return WorstCaseReport(
        epsilon=eps,
        satisfied=margin <= -eps,
        margin=margin,
        min_sampling_prob=mu_min,
        min_service_rate=q_min,
    )


# ---------------------------------------------------------------------------
# Empirical soundness sweep
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SweepCase:
    case_id: int
    params: SystemParams
    randomized: AdaptivePolicy
    maxage: AdaptivePolicy


@dataclass(frozen=True)
class SweepRow:
    case_id: int
    n_users: int
    total_arrival_rate: float
    randomized_satisfied: bool
    randomized_margin: float
    maxage_satisfied: bool
    maxage_margin: float
    worstcase_satisfied: bool
    randomized_verdict: str
    maxage_verdict: Optional[str]   # None when the max-age sim was skipped
    sound: bool


def sample_sweep_case(rng: np.random.Generator, case_id: int) -> SweepCase:
    """Draw one random system + policy pair for the sweep.

    Arrival rates are scaled around the tightest per-subset service rate so
    that a healthy share of cases lands on each side of the conditions.
    """
    n = int(rng.integers(1, 5))
    q = float(rng.uniform(0.05, 0.95))
    s = float(rng.uniform(0.05, 0.95))
    service = rng.uniform(0.2, 1.0, size=n)
    avail = 1.0 - chi(q, s)

    rand_table: dict[int, SubsetPolicy] = {}
    max_table: dict[int, SubsetPolicy] = {}
    tightest = np.inf
    for mask in enumerate_subsets(n):
        members = subset_members(mask)
        mu = float(rng.uniform(0.3, 1.0))
        raw = rng.gamma(1.0, 1.0, size=len(members)) + 1e-3
        dist = np.zeros(n)
        dist[members] = raw / raw.sum()
        rand_table[mask] = SubsetPolicy(mu, dist)
        max_table[mask] = SubsetPolicy(float(rng.uniform(0.3, 1.0)))
        tightest = min(tightest, mu * avail * float(np.sum(dist[members] * service[members])))

    # load factor spans comfortably stable through clearly overloaded
    load = float(rng.uniform(0.1, 2.0))
    weights = rng.uniform(0.2, 1.0, size=n)
    arrivals = weights / weights.sum() * load * tightest
    arrivals = np.clip(arrivals, 1e-4, 0.95)

    params = SystemParams(n, arrivals, service, q, s, sampling_cost=1.0)
    return SweepCase(
        case_id=case_id,
        params=params,
        randomized=AdaptivePolicy(n, SchedulerKind.RANDOMIZED, rand_table),
        maxage=AdaptivePolicy(n, SchedulerKind.MAX_AGE, max_table),
    )


def aggregate_verdict(verdicts: list[str]) -> str:
    """Majority verdict across seeds; ties fall to Inconclusive."""
    n = len(verdicts)
    if n == 0:
        raise ValueError("need at least one verdict")
    for v in ("Stable", "Unstable"):
        if sum(1 for x in verdicts if x == v) * 2 > n:
            return v
    return "Inconclusive"


def _empirical_verdict(
    params: SystemParams,
    policy: AdaptivePolicy,
    horizon: int,
    seeds: list[int],
    thresholds: DriftThresholds,
) -> str:
    verdicts = []
    for seed in seeds:
        m = run(params, policy, horizon, seed, burn_in=0)
        report = drift_diagnostic(
            m.trace_total_queue,
            m.trace_slots,
            total_arrival_rate=params.total_arrival_rate(),
            thresholds=thresholds,
        )
        verdicts.append(report.verdict)
    return aggregate_verdict(verdicts)


def sufficiency_sweep(
    n_cases: int,
    master_seed: int,
    *,
    horizon: int = 200_000,
    n_seeds: int = 3,
    epsilon: float = 0.01,
    maxage_subsample: int = 10,
    thresholds: DriftThresholds = DriftThresholds(),
) -> list[SweepRow]:
    """Stress the sufficient conditions against simulation.

    Every case gets a randomized-policy simulation.  Max-age simulations run
    when the max-age condition is satisfied (the side that matters for
    soundness) and on every `maxage_subsample`-th case otherwise, to keep the
    runtime linear.  A row is sound when no satisfied condition coincides
    with an Unstable empirical verdict.
    """
    if n_cases < 1:
        raise ValueError("n_cases must be positive")
    root = np.random.SeedSequence(master_seed)
    case_ss, seed_ss = root.spawn(2)
    rng = np.random.Generator(np.random.SFC64(case_ss))
    sim_seeds = [int(x) for x in seed_ss.generate_state(n_seeds, np.uint32)]

    rows: list[SweepRow] = []
    for case_id in range(n_cases):
        case = sample_sweep_case(rng, case_id)
        rand_rep = randomized_stability_check(case.params, case.randomized, epsilon)
        max_rep = maxage_stability_check(case.params, case.maxage, epsilon)
        worst = worstcase_stability_check(case.params, case.randomized, epsilon)

        seeds = [s + case_id * 1_000_003 for s in sim_seeds]
        rand_verdict = _empirical_verdict(
            case.params, case.randomized, horizon, seeds, thresholds
        )
        if max_rep.satisfied or case_id % maxage_subsample == 0:
            max_verdict: Optional[str] = _empirical_verdict(
                case.params, case.maxage, horizon, seeds, thresholds
            )
        else:
            max_verdict = None

        sound = not (rand_rep.satisfied and rand_verdict == "Unstable")
        if max_verdict is not None:
            sound = sound and not (max_rep.satisfied and max_verdict == "Unstable")
        # the worst-case check implies the per-subset one; cross-check that here
        sound = sound and not (worst.satisfied and not rand_rep.satisfied)

        rows.append(
            SweepRow(
                case_id=case_id,
                n_users=case.params.n_users,
                total_arrival_rate=case.params.total_arrival_rate(),
                randomized_satisfied=rand_rep.satisfied,
                randomized_margin=rand_rep.worst_margin,
                maxage_satisfied=max_rep.satisfied,
                maxage_margin=max_rep.worst_margin,
                worstcase_satisfied=worst.satisfied,
                randomized_verdict=rand_verdict,
                maxage_verdict=max_verdict,
                sound=sound,
            )
        )
    return rows
