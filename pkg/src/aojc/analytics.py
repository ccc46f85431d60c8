"""Closed-form performance of a permanently backlogged subsystem.

Every function here describes a saturated subset of users: their queues never
empty, so the controller's behaviour is a renewal process and long-run
averages have closed forms.  Two policy families are covered:

* randomized scheduling -- sample with probability mu, then pick the user to
  serve from a fixed distribution pi over the subset; per-user age is exact,
  the sampling cost is available as an upper bound only;
* max-age scheduling -- sample with probability mu, then serve the user with
  the oldest age (round-robin in the saturated regime); both the common age
  and the sampling cost are exact.

Ages count slots and are always >= 1.  Sampling costs are per-slot averages
(cost L times sampling frequency).  All evaluators are numpy-vectorized and
cheap enough to sit inside an optimizer loop.
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .model import SchedulerKind, SystemParams, subset_label, subset_members

__all__ = [
    "UserCountMode",
    "free_find_prob",
    "chi",
    "acquisition_moments",
    "randomized_age",
    "randomized_ages",
    "randomized_sampling_bound",
    "randomized_total_cost",
    "maxage_age",
    "maxage_sampling_cost",
    "maxage_total_cost",
    "ReportRow",
    "ClosedFormReport",
    "closed_form_report",
]

log = logging.getLogger(__name__)


class UserCountMode(enum.Enum):
    """Which population size enters the max-age formulas.

    The max-age closed forms carry a user-count factor alongside per-member
    sums.  SUBSET_SIZE reads it as the size of the saturated subset (the
    interpretation that matches simulation); TOTAL_USERS reads it as the
    system-wide number of users.  Both are implemented so the verification
    pipeline can discriminate empirically.
    """

    SUBSET_SIZE = "subset_size"
    TOTAL_USERS = "total_users"


def _member_view(params: SystemParams, subset: int):
    members = subset_members(subset)
    if not members:
        raise ValueError("subset must be non-empty")
    if members[-1] >= params.n_users:
        raise ValueError(f"subset {subset_label(subset)} exceeds n_users={params.n_users}")
    return members, params.service_rates[members]


def _member_dist(schedule_dist, subset: int, n_users: int) -> np.ndarray:
    d = np.asarray(schedule_dist, dtype=np.float64)
    if d.shape != (n_users,):
        raise ValueError(f"schedule_dist must have length {n_users}")
    members = subset_members(subset)
    off = np.delete(d, members)
    if off.size and np.any(off != 0.0):
        raise ValueError("schedule_dist puts mass outside the subset")
    dm = d[members]
    if np.any(dm <= 0.0) or abs(dm.sum() - 1.0) > 1e-9:
        raise ValueError("schedule_dist must be positive on the subset and sum to 1")
    return dm


def _check_mu(mu: float) -> float:
    if not (0.0 < mu <= 1.0):
        raise ValueError(f"sampling probability must lie in (0, 1], got {mu!r}")
    return float(mu)


def free_find_prob(q: float, mu: float) -> float:
    """Stationary probability that a sample finds the machine Free, for a
    machine alternating Free/Busy with flip probability q and geometric(mu)
    inter-sample gaps."""
    return q / (1.0 - (1.0 - 2.0 * q) * (1.0 - mu))


def chi(q: float, s: float) -> float:
    """Piecewise machine-availability factor; 1 - chi lower-bounds the
    probability that a sample finds the machine Free, uniformly over the
    sampling policy.  Defined for q, s strictly inside (0, 1)."""
    if not (0.0 < q < 1.0) or not (0.0 < s < 1.0):
        raise ValueError(f"chi requires q, s in (0, 1), got q={q!r}, s={s!r}")
    if q <= 0.5:
        return 1.0 - q
    a = 1.0 - 2.0 * q
    if s <= 0.5:
        return (a * min(a, 2.0 * s - 1.0) + 1.0) / 2.0
    return (a * a * (2.0 * s - 1.0) + 1.0) / 2.0


# ---------------------------------------------------------------------------
# Randomized scheduling
# ---------------------------------------------------------------------------

def _randomized_ages_core(q_m, pi_m, q, s, mu):
    """Vector of per-member ages; q_m and pi_m are member-aligned arrays."""
    eta_bar = float(np.sum(pi_m / q_m))
    eta_k = eta_bar - pi_m / q_m
    base = 2.0 * (1.0 / mu - 1.0) + s / q
    psi_k = eta_k + pi_m + base
    shared = float(np.sum(pi_m * (1.0 - q_m) / q_m**2))
    inner = (
        psi_k**2 / pi_m
        + (1.0 / q_m + (1.0 - s) / q - 2.0) * psi_k
        + ((1.0 - s) * (1.0 - pi_m - eta_k) - 1.0 / mu) / q
        - pi_m * (1.0 - q_m) / q_m
        + shared
    )
    return inner / (base + eta_bar) + 1.0


def randomized_ages(
    params: SystemParams,
    subset: int,
    sampling_prob: float,
    schedule_dist,
) -> np.ndarray:
    """Exact long-run ages of all subset members (member order), when the
    subset is saturated and served by the randomized policy."""
    members, q_m = _member_view(params, subset)
    pi_m = _member_dist(schedule_dist, subset, params.n_users)
    mu = _check_mu(sampling_prob)
    return _randomized_ages_core(q_m, pi_m, params.flip_prob, params.post_busy_prob, mu)


def randomized_age(
    params: SystemParams,
    subset: int,
    sampling_prob: float,
    schedule_dist,
    user: int,
) -> float:
    """Exact long-run age of one subset member (0-based user index)."""
    members, _ = _member_view(params, subset)
    if user not in members:
        raise ValueError(f"user {user + 1} is not in subset {subset_label(subset)}")
    ages = randomized_ages(params, subset, sampling_prob, schedule_dist)
    return float(ages[members.index(user)])


def randomized_sampling_bound(
    params: SystemParams,
    subset: int,
    sampling_prob: float,
    schedule_dist,
) -> float:
    """Upper bound on the per-slot sampling cost of the randomized policy.

    This is a bound, not an exact value: the empirical cost can sit below it
    and (on some parameter combinations) slightly above; the verification
    pipeline reports both sides without asserting.
    """
    _, q_m = _member_view(params, subset)
    pi_m = _member_dist(schedule_dist, subset, params.n_users)
    mu = _check_mu(sampling_prob)
    p_star = free_find_prob(params.flip_prob, mu)
    eta_bar = float(np.sum(pi_m / q_m))
    return (params.sampling_cost + 1.0) * mu / p_star / (1.0 / (mu * p_star) + eta_bar)


def randomized_total_cost(
    params: SystemParams,
    subset: int,
    sampling_prob: float,
    schedule_dist,
) -> float:
    """Optimizer objective: sum of member ages plus the sampling bound."""
    ages = randomized_ages(params, subset, sampling_prob, schedule_dist)
    bound = randomized_sampling_bound(params, subset, sampling_prob, schedule_dist)
    return float(ages.sum() + bound)


# ---------------------------------------------------------------------------
# Max-age scheduling
# ---------------------------------------------------------------------------

def acquisition_moments(sampling_prob: float, q: float, s: float) -> tuple[float, float]:
    """First two moments of the machine re-acquisition time.

    The re-acquisition time K counts the slots from the one right after a job
    completion until (inclusive) the slot whose sample finds the machine Free
    again, with geometric(mu) sampling and Free<->Busy flips with probability
    q in between; right after a completion the machine is Busy with
    probability s.  Derived from the renewal structure of the sampled chain;
    at mu = 1 it reduces to the fully observed machine.
    """
    mu = _check_mu(sampling_prob)
    t_free = (2.0 - mu) / mu
    t_busy = 1.0 / q + t_free
    first = t_free + s / q
    m_free = 1.0 + 2.0 * (1.0 - mu) / mu * (1.0 + t_free + t_busy)
    second = m_free + s * (2.0 * t_busy - 1.0) / q
    return first, second


def _user_count(params: SystemParams, subset: int, count_mode: UserCountMode) -> int:
    if count_mode is UserCountMode.TOTAL_USERS:
        return params.n_users
    return len(subset_members(subset))


def maxage_age(
    params: SystemParams,
    subset: int,
    sampling_prob: float,
    count_mode: UserCountMode = UserCountMode.SUBSET_SIZE,
) -> float:
    """Exact long-run age (same for every member) when the saturated subset
    is served oldest-age-first, which cycles through the members."""
    _, q_m = _member_view(params, subset)
    b1, b2 = acquisition_moments(sampling_prob, params.flip_prob, params.post_busy_prob)
    n = _user_count(params, subset, count_mode)
    sum1 = float(np.sum((1.0 - q_m) / q_m))
    sum2 = float(np.sum((1.0 - q_m) / q_m**2))
    cycle = n * b1 + sum1
    return (n * (b2 - b1 * b1) + sum2) / (2.0 * cycle) + 0.5 * (cycle + 1.0)


def maxage_sampling_cost(
    params: SystemParams,
    subset: int,
    sampling_prob: float,
    count_mode: UserCountMode = UserCountMode.SUBSET_SIZE,
) -> float:
    """Exact per-slot sampling cost of the max-age policy on a saturated
    subset."""
    _, q_m = _member_view(params, subset)
    mu = _check_mu(sampling_prob)
    q, s = params.flip_prob, params.post_busy_prob
    n = _user_count(params, subset, count_mode)
    p_star = free_find_prob(q, mu)
    p1_star = s * (1.0 - mu) * p_star + (1.0 - s) * (1.0 - (1.0 - mu) * p_star)
    sum1 = float(np.sum((1.0 - q_m) / q_m))
    denom = n * ((1.0 - mu) + s * mu / q + 1.0) + mu * sum1
    return (mu * n * params.sampling_cost / denom) * (
        p1_star + (1.0 - p1_star) * (1.0 + p_star) / p_star
    )


def maxage_total_cost(
    params: SystemParams,
    subset: int,
    sampling_prob: float,
    count_mode: UserCountMode = UserCountMode.SUBSET_SIZE,
) -> float:
    """Optimizer objective: sum of member ages plus the exact sampling cost."""
    n_members = len(subset_members(subset))
    age = maxage_age(params, subset, sampling_prob, count_mode)
    return n_members * age + maxage_sampling_cost(params, subset, sampling_prob, count_mode)


# ---------------------------------------------------------------------------
# Reports
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ReportRow:
    subset: int
    user: Optional[int]   # 0-based member index, None for subset-level rows
    quantity: str         # "age" | "sampling_bound" | "sampling_cost" | "total_cost"
    value: float
    tag: str              # "exact" | "upper_bound"


@dataclass(frozen=True)
class ClosedFormReport:
    scheduler: SchedulerKind
    subset: int
    sampling_prob: float
    schedule_dist: Optional[np.ndarray]
    count_mode: UserCountMode
    rows: tuple[ReportRow, ...]
    auxiliaries: dict
    warnings: tuple[str, ...]


def closed_form_report(
    params: SystemParams,
    subset: int,
    scheduler: SchedulerKind,
    sampling_prob: float,
    schedule_dist=None,
    count_mode: UserCountMode = UserCountMode.SUBSET_SIZE,
) -> ClosedFormReport:
    """Evaluate every closed form that applies to one saturated subsystem.

    Per-user age rows are tagged "exact"; the randomized sampling figure is
    tagged "upper_bound" (its total-cost row inherits the bound).  Ages are
    sanity-checked against their logical floor of 1; a violation is reported
    as a warning and logged, never clipped.
    """
    members, q_m = _member_view(params, subset)
    mu = _check_mu(sampling_prob)
    q, s = params.flip_prob, params.post_busy_prob
    rows: list[ReportRow] = []
    warnings: list[str] = []
    aux: dict = {"p_star": free_find_prob(q, mu), "chi": chi(q, s)}

    if scheduler is SchedulerKind.RANDOMIZED:
        if schedule_dist is None:
            raise ValueError("randomized report needs a schedule_dist")
        ages = randomized_ages(params, subset, mu, schedule_dist)
        pi_m = _member_dist(schedule_dist, subset, params.n_users)
        eta_bar = float(np.sum(pi_m / q_m))
        aux["eta_bar"] = eta_bar
        aux["eta"] = {u + 1: eta_bar - float(pi_m[i] / q_m[i]) for i, u in enumerate(members)}
        base = 2.0 * (1.0 / mu - 1.0) + s / q
        aux["psi"] = {
            u + 1: aux["eta"][u + 1] + float(pi_m[i]) + base for i, u in enumerate(members)
        }
        sampling = randomized_sampling_bound(params, subset, mu, schedule_dist)
        sampling_tag = "upper_bound"
        sampling_quantity = "sampling_bound"
        dist = np.asarray(schedule_dist, dtype=np.float64)
    else:
        if schedule_dist is not None:
            raise ValueError("max-age report does not take a schedule_dist")
        age = maxage_age(params, subset, mu, count_mode)
        ages = np.full(len(members), age)
        b1, b2 = acquisition_moments(mu, q, s)
        aux["beta1"] = b1
        aux["beta2"] = b2
        aux["p1_star"] = s * (1.0 - mu) * aux["p_star"] + (1.0 - s) * (
            1.0 - (1.0 - mu) * aux["p_star"]
        )
        sampling = maxage_sampling_cost(params, subset, mu, count_mode)
        sampling_tag = "exact"
        sampling_quantity = "sampling_cost"
        dist = None

    for i, u in enumerate(members):
        value = float(ages[i])
        rows.append(ReportRow(subset, u, "age", value, "exact"))
        if value < 1.0:
            msg = (
                f"age of user {u + 1} in subset {subset_label(subset)} evaluated to "
                f"{value:.6g} < 1; parameters are outside the formula's trusted range"
            )
            warnings.append(msg)
            log.warning(msg)

    rows.append(ReportRow(subset, None, sampling_quantity, float(sampling), sampling_tag))
    rows.append(
        ReportRow(subset, None, "total_cost", float(ages.sum() + sampling), sampling_tag)
    )

    return ClosedFormReport(
        scheduler=scheduler,
        subset=subset,
        sampling_prob=mu,
        schedule_dist=dist,
        count_mode=count_mode,
        rows=tuple(rows),
        auxiliaries=aux,
        warnings=tuple(warnings),
    )
