"""Slot-by-slot simulator for the job-assignment system.

Two entry points drive the same kernel: :func:`run` simulates a whole horizon
in one call, :func:`step` advances an explicit :class:`SimState` one slot at
a time and reproduces :func:`run` exactly (both consume the named streams of
:class:`~aojc.model.RngStreams` positionally).  The system can run open
(stochastic arrivals, real queues) or saturated (a fixed subset of users that
always has work, which is the regime the closed-form analytics describe).

:func:`drift_diagnostic` classifies a total-backlog trace as Stable /
Unstable / Inconclusive from its fitted slope and endpoint growth; it is
deliberately conservative and returns Inconclusive when the evidence is weak.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import kernels
from .model import (
    KNOW_AMBIGUOUS,
    AdaptivePolicy,
    ParamError,
    RngStreams,
    SchedulerKind,
    SystemParams,
    full_mask,
    subset_members,
    subset_size,
)

__all__ = [
    "SimState",
    "SimMetrics",
    "initial_state",
    "step",
    "run",
    "max_age_select",
    "DriftThresholds",
    "DriftReport",
    "drift_diagnostic",
]

DEFAULT_BURN_IN_FRAC = 0.1
DEFAULT_TRACE_POINTS = 2048


@dataclass
class SimState:
    """Mutable snapshot of one trajectory between slots.

    `t` is the index of the next slot to simulate (slots are 1-based).
    Unlike the core-model types this is deliberately mutable: `step` advances
    it in place and returns it.
    """

    t: int
    queues: np.ndarray
    ages: np.ndarray
    machine_state: int
    knowledge: int
    saturated: bool
    subset: int
    samples: int = 0
    completions: np.ndarray = field(default=None)  # type: ignore[assignment]
    arrivals: np.ndarray = field(default=None)  # type: ignore[assignment]
    age_sum: np.ndarray = field(default=None)  # type: ignore[assignment]
    queue_sum: np.ndarray = field(default=None)  # type: ignore[assignment]
    trace_total_queue: list = field(default_factory=list)

    def __post_init__(self) -> None:
        n = len(self.queues)
        if self.completions is None:
            self.completions = np.zeros(n, dtype=np.int64)
        if self.arrivals is None:
            self.arrivals = np.zeros(n, dtype=np.int64)
        if self.age_sum is None:
            self.age_sum = np.zeros(n, dtype=np.float64)
        if self.queue_sum is None:
            self.queue_sum = np.zeros(n, dtype=np.float64)


@dataclass(frozen=True)
class SimMetrics:
    """Averages and counters from one simulated run.

    Ages and queue lengths are averaged over the counted window (horizon
    minus burn-in).  `sampling_rate` is samples per counted slot, so the
    empirical sampling cost is `sampling_cost * sampling_rate`.  `total_cost`
    is mean age plus sampling cost, with the mean taken over subset members
    in saturated mode and over all users in open mode.
    """

    horizon: int
    burn_in: int
    saturated: bool
    subset: int
    master_seed: int
    age_mean: np.ndarray
    sampling_rate: float
    sampling_cost: float
    total_cost: float
    mean_queue: np.ndarray
    completion_rate: np.ndarray
    completions: np.ndarray
    arrivals: np.ndarray
    samples: int
    trace_slots: np.ndarray
    trace_total_queue: np.ndarray
    final_machine_state: int
    final_knowledge: int
    final_queues: np.ndarray
    final_ages: np.ndarray


def max_age_select(ages: np.ndarray, active_mask: int) -> int:
    """Index of the active user with the largest age, ties to the lowest index."""
    if active_mask == 0:
        raise ValueError("active set is empty")
    best = -1
    pick = -1
    for i in range(len(ages)):
        if (active_mask >> i) & 1 and ages[i] > best:
            best = int(ages[i])
            pick = i
    if pick < 0:
        raise ValueError("active_mask addresses no valid user index")
    return pick


def _check_mode(params: SystemParams, saturated: bool, subset: Optional[int]) -> int:
    if saturated:
        if subset is None or subset <= 0 or subset > full_mask(params.n_users):
            raise ParamError("saturated mode requires a non-empty subset mask")
        return subset
    if subset is not None:
        raise ParamError("subset is only meaningful in saturated mode")
    return 0


def initial_state(
    params: SystemParams,
    streams: RngStreams,
    *,
    saturated: bool = False,
    subset: Optional[int] = None,
) -> SimState:
    """Fresh state at slot 1: empty queues, all ages 1, machine Free or Busy
    with equal probability, knowledge Ambiguous."""
    mask = _check_mode(params, saturated, subset)
    n = params.n_users
    return SimState(
        t=1,
        queues=np.zeros(n, dtype=np.int64),
        ages=np.ones(n, dtype=np.int64),
        machine_state=streams.draw_initial_state(),
        knowledge=KNOW_AMBIGUOUS,
        saturated=saturated,
        subset=mask,
    )


def _kernel_args(params: SystemParams, policy: AdaptivePolicy):
    if policy.n_users != params.n_users:
        raise ParamError("policy and params disagree on the number of users")
    return (
        params.arrival_rates,
        params.service_rates,
        params.flip_prob,
        params.post_busy_prob,
        1 if policy.scheduler is SchedulerKind.MAX_AGE else 0,
        policy.sampling_table(),
        policy.cumulative_schedule_table(),
    )


def step(
    state: SimState,
    params: SystemParams,
    policy: AdaptivePolicy,
    streams: RngStreams,
    *,
    backend: Optional[str] = None,
) -> SimState:
    """Advance one slot in place; the trajectory matches a batch `run`."""
    (arr, srv, flip, post, maxage, samp_tab, cum_sched) = _kernel_args(params, policy)
    draws = streams.draw_block(1, include_arrivals=not state.saturated)
    trace = np.zeros(1, dtype=np.int64)
    kernel = kernels.get_kernel(backend)
    samples, mstate, know = kernel(
        1, params.n_users, arr, srv, flip, post, maxage, samp_tab, cum_sched,
        state.saturated, state.subset,
        draws.arrival, draws.service, draws.flip, draws.sampling, draws.schedule, draws.post,
        state.queues, state.ages, state.machine_state, state.knowledge,
        0, 1,
        state.age_sum, state.queue_sum, state.completions, state.arrivals, trace,
    )
    state.samples += int(samples)
    state.machine_state = int(mstate)
    state.knowledge = int(know)
    state.trace_total_queue.append(int(trace[0]))
    state.t += 1
    return state


def run(
    params: SystemParams,
    policy: AdaptivePolicy,
    horizon: int,
    master_seed: int,
    *,
    saturated: bool = False,
    subset: Optional[int] = None,
    burn_in: Optional[int] = None,
    trace_stride: Optional[int] = None,
    backend: Optional[str] = None,
) -> SimMetrics:
    """Simulate `horizon` slots from a fresh state and summarize.

    burn_in defaults to 10% of the horizon and is excluded from every
    average and counter (pass 0 to keep the whole run, e.g. when checking
    closed forms that describe the stationary regime from slot 1).  The
    backlog trace always covers the full horizon.
    """
    if horizon < 1:
        raise ParamError("horizon must be at least 1")
    mask = _check_mode(params, saturated, subset)
    if burn_in is None:
        burn_in = int(DEFAULT_BURN_IN_FRAC * horizon)
    if not 0 <= burn_in < horizon:
        raise ParamError("burn_in must lie in [0, horizon)")
    if trace_stride is None:
        trace_stride = max(1, horizon // DEFAULT_TRACE_POINTS)
    if trace_stride < 1:
        raise ParamError("trace_stride must be positive")

    (arr, srv, flip, post, maxage, samp_tab, cum_sched) = _kernel_args(params, policy)
    streams = RngStreams(master_seed, params.n_users)
    state0 = streams.draw_initial_state()
    draws = streams.draw_block(horizon, include_arrivals=not saturated)

    n = params.n_users
    queues = np.zeros(n, dtype=np.int64)
    ages = np.ones(n, dtype=np.int64)
    age_sum = np.zeros(n, dtype=np.float64)
    queue_sum = np.zeros(n, dtype=np.float64)
    completions = np.zeros(n, dtype=np.int64)
    arrivals = np.zeros(n, dtype=np.int64)
    n_trace = 1 + (horizon - 1) // trace_stride
    trace = np.zeros(n_trace, dtype=np.int64)

    kernel = kernels.get_kernel(backend)
    samples, mstate, know = kernel(
        horizon, n, arr, srv, flip, post, maxage, samp_tab, cum_sched,
        saturated, mask,
        draws.arrival, draws.service, draws.flip, draws.sampling, draws.schedule, draws.post,
        queues, ages, state0, KNOW_AMBIGUOUS,
        burn_in, trace_stride,
        age_sum, queue_sum, completions, arrivals, trace,
    )

    counted = horizon - burn_in
    age_mean = age_sum / counted
    sampling_rate = samples / counted
    members = subset_members(mask) if saturated else list(range(n))
    mean_age = float(age_mean[members].mean())
    sampling_cost = params.sampling_cost * sampling_rate
    mean_queue = queue_sum / counted
    if saturated:
        mean_queue = np.full(n, np.nan)

    return SimMetrics(
        horizon=horizon,
        burn_in=burn_in,
        saturated=saturated,
        subset=mask,
        master_seed=int(master_seed),
        age_mean=age_mean,
        sampling_rate=float(sampling_rate),
        sampling_cost=float(sampling_cost),
        total_cost=float(mean_age + sampling_cost),
        mean_queue=mean_queue,
        completion_rate=completions / counted,
        completions=completions,
        arrivals=arrivals,
        samples=int(samples),
        trace_slots=1 + trace_stride * np.arange(n_trace, dtype=np.int64),
        trace_total_queue=trace,
        final_machine_state=int(mstate),
        final_knowledge=int(know),
        final_queues=queues,
        final_ages=ages,
    )


# ---------------------------------------------------------------------------
# Backlog drift diagnostic
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DriftThresholds:
    """Cut-offs for the drift verdict; all four are dimensionless fractions
    except the ratios.  The defaults favour Inconclusive over a wrong call.
    """

    stable_growth_frac: float = 0.05   # growth below this fraction of the trace peak
    stable_ratio: float = 2.0          # last-quartile / first-quartile mean below this
    unstable_growth_frac: float = 0.20 # growth above this fraction of expected total arrivals
    unstable_ratio: float = 4.0


@dataclass(frozen=True)
class DriftReport:
    verdict: str                 # "Stable" | "Unstable" | "Inconclusive"
    slope: float                 # fitted backlog change per slot
    growth: float                # slope * observed span
    first_quartile_mean: float
    last_quartile_mean: float
    quartile_ratio: float
    n_points: int


def drift_diagnostic(
    trace_total_queue: np.ndarray,
    trace_slots: Optional[np.ndarray] = None,
    *,
    total_arrival_rate: float = 1.0,
    thresholds: DriftThresholds = DriftThresholds(),
) -> DriftReport:
    """Classify a total-backlog trace as Stable / Unstable / Inconclusive.

    Fits a least-squares line to the trace and compares the implied growth
    over the observed span against (a) the trace's own scale for the Stable
    call and (b) the volume of expected arrivals for the Unstable call, with
    a first-vs-last quartile mean ratio as a second opinion.  Anything in
    between the two regimes is Inconclusive.
    """
    totals = np.asarray(trace_total_queue, dtype=np.float64)
    if totals.ndim != 1 or len(totals) < 2:
        raise ValueError("drift diagnostic needs a 1-D trace with at least 2 points")
    if trace_slots is None:
        slots = np.arange(1, len(totals) + 1, dtype=np.float64)
    else:
        slots = np.asarray(trace_slots, dtype=np.float64)
        if slots.shape != totals.shape:
            raise ValueError("trace_slots and trace must have the same length")

    slope = float(np.polyfit(slots, totals, 1)[0])
    span = float(slots[-1] - slots[0])
    growth = slope * span

    qn = max(1, len(totals) // 4)
    first = float(totals[:qn].mean())
    last = float(totals[-qn:].mean())
    # +1 smoothing so a near-empty early window does not blow the ratio up
    ratio = (last + 1.0) / (first + 1.0)

    th = thresholds
    # max(.., 1.0) keeps the stable cut-off meaningful for near-empty traces
    stable_cut = th.stable_growth_frac * max(float(totals.max()), 1.0)
    unstable_cut = th.unstable_growth_frac * total_arrival_rate * span

    if growth < stable_cut and ratio < th.stable_ratio:
        verdict = "Stable"
    elif growth > unstable_cut and ratio > th.unstable_ratio:
        verdict = "Unstable"
    else:
        verdict = "Inconclusive"

    return DriftReport(
        verdict=verdict,
        slope=slope,
        growth=growth,
        first_quartile_mean=first,
        last_quartile_mean=last,
        quartile_ratio=float(ratio),
        n_points=len(totals),
    )
