"""Core domain types for the slotted job-assignment system.

A single machine serves N user queues.  When it is not serving a job the
machine alternates between Free and Busy on its own, flipping with
probability q each slot.  The controller cannot see the machine state
directly; it learns it only by paying for a sample.  Everything downstream
(simulator, analytics, stability checks, optimizer) consumes the validated
types defined here:

* :class:`SystemParams` -- the model constants,
* subset helpers -- non-empty user subsets encoded as bitmasks,
* :class:`AdaptivePolicy` -- per-subset sampling probabilities plus either a
  randomized scheduling distribution or max-age scheduling,
* :class:`RngStreams` -- named, independently seeded uniform streams so that
  runs are reproducible and policies can be compared on shared randomness.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

__all__ = [
    "ParamError",
    "PolicyError",
    "SystemParams",
    "validate_params",
    "enumerate_subsets",
    "subset_members",
    "subset_size",
    "subset_mask",
    "subset_label",
    "active_set",
    "full_mask",
    "SchedulerKind",
    "SubsetPolicy",
    "AdaptivePolicy",
    "uniform_policy",
    "constant_sampling_table",
    "RngStreams",
    "SlotDraws",
    "MACHINE_BUSY",
    "MACHINE_FREE",
    "KNOW_BUSY",
    "KNOW_AMBIGUOUS",
    "KNOW_FREE",
    "SUBSET_CAP",
]

# Machine state encoding shared with the simulation kernels.  The true state
# is Busy (-1), Free (0) or Serving user j (encoded j+1 so user indices stay
# 0-based everywhere else).  The controller-side knowledge state adds
# Ambiguous (0, "could be Free or Busy") and Known-Free (-2, only reachable
# if a policy samples while no user is active, which the shipped policies
# never do).
MACHINE_BUSY = -1
MACHINE_FREE = 0
KNOW_BUSY = -1
KNOW_AMBIGUOUS = 0
KNOW_FREE = -2

# Policies are tabulated over all 2^N - 1 non-empty subsets; beyond this many
# users the table would be unreasonably large.
SUBSET_CAP = 12


class ParamError(ValueError):
    """A system parameter violates its documented range."""


class PolicyError(ValueError):
    """A policy table is incomplete or inconsistent with its subsets."""


def _prob_array(name: str, values: Sequence[float], n: int, *, allow_one: bool) -> np.ndarray:
    arr = np.asarray(values, dtype=np.float64)
    if arr.shape != (n,):
        raise ParamError(f"{name} must have length {n}, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ParamError(f"{name} must be finite")
    if np.any(arr <= 0.0):
        raise ParamError(f"{name.rstrip('s')} must be positive")
    hi_ok = arr <= 1.0 if allow_one else arr < 1.0
    if not np.all(hi_ok):
        bound = "<= 1" if allow_one else "< 1"
        raise ParamError(f"{name.rstrip('s')} must be {bound}")
    arr = arr.copy()
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class SystemParams:
    """Validated model constants.

    arrival_rates[i] is the per-slot probability that user i+1 receives a new
    job, service_rates[i] the per-slot completion probability while that
    user's job is on the machine.  flip_prob drives the Free<->Busy chain
    while the machine is idle from the controller's point of view, and
    post_busy_prob is the chance the machine lands in Busy right after it
    completes a job.  sampling_cost is charged once per state sample.
    """

    n_users: int
    arrival_rates: np.ndarray
    service_rates: np.ndarray
    flip_prob: float
    post_busy_prob: float
    sampling_cost: float

    def __post_init__(self) -> None:
        if not isinstance(self.n_users, int) or self.n_users < 1:
            raise ParamError(f"n_users must be a positive integer, got {self.n_users!r}")
        object.__setattr__(
            self, "arrival_rates",
            _prob_array("arrival rates", self.arrival_rates, self.n_users, allow_one=False),
        )
        object.__setattr__(
            self, "service_rates",
            _prob_array("service rates", self.service_rates, self.n_users, allow_one=True),
        )
        for name in ("flip_prob", "post_busy_prob"):
            v = getattr(self, name)
            if not isinstance(v, (int, float)) or not np.isfinite(v) or not (0.0 < v < 1.0):
                raise ParamError(f"{name} must lie strictly between 0 and 1, got {v!r}")
            object.__setattr__(self, name, float(v))
        if not isinstance(self.sampling_cost, (int, float)) or not np.isfinite(self.sampling_cost) or self.sampling_cost < 0.0:
            raise ParamError(f"sampling_cost must be a finite non-negative number, got {self.sampling_cost!r}")
        object.__setattr__(self, "sampling_cost", float(self.sampling_cost))

    def total_arrival_rate(self) -> float:
        return float(self.arrival_rates.sum())

    def replace(self, **changes) -> "SystemParams":
        """Return a copy with the given fields swapped out (re-validated)."""
        fields = {
            "n_users": self.n_users,
            "arrival_rates": np.asarray(self.arrival_rates),
            "service_rates": np.asarray(self.service_rates),
            "flip_prob": self.flip_prob,
            "post_busy_prob": self.post_busy_prob,
            "sampling_cost": self.sampling_cost,
        }
        fields.update(changes)
        return SystemParams(**fields)


def validate_params(raw: Mapping) -> SystemParams:
    """Build :class:`SystemParams` from a plain mapping, rejecting bad input.

    Raises :class:`ParamError` with a message naming the offending field,
    e.g. a zero arrival rate reports "arrival rate must be positive".
    """
    required = {
        "n_users", "arrival_rates", "service_rates",
        "flip_prob", "post_busy_prob", "sampling_cost",
    }
    missing = required - set(raw)
    if missing:
        raise ParamError(f"missing system parameters: {sorted(missing)}")
    extra = set(raw) - required
    if extra:
        raise ParamError(f"unknown system parameters: {sorted(extra)}")
    n = raw["n_users"]
    if isinstance(n, bool) or not isinstance(n, int):
        raise ParamError(f"n_users must be an integer, got {n!r}")
    return SystemParams(
        n_users=n,
        arrival_rates=raw["arrival_rates"],
        service_rates=raw["service_rates"],
        flip_prob=raw["flip_prob"],
        post_busy_prob=raw["post_busy_prob"],
        sampling_cost=raw["sampling_cost"],
    )


# ---------------------------------------------------------------------------
# Subset helpers.  A subset of users is a bitmask: bit i set <=> user index i
# (0-based) is a member.  Masks run over 1 .. 2^N - 1; the empty set is 0 and
# is never a valid policy key.
# ---------------------------------------------------------------------------

def full_mask(n_users: int) -> int:
    return (1 << n_users) - 1


def enumerate_subsets(n_users: int, cap: int = SUBSET_CAP) -> list[int]:
    """All non-empty subset masks in ascending order.

    Refuses n_users > cap: every consumer of this list is exponential in N.
    """
    if n_users > cap:
        raise ParamError(f"subset enumeration requires n_users <= {cap}, got {n_users}")
    return list(range(1, 1 << n_users))


def subset_members(mask: int) -> list[int]:
    """0-based member indices in ascending order."""
    return [i for i in range(mask.bit_length()) if (mask >> i) & 1]


def subset_size(mask: int) -> int:
    return int(mask).bit_count()


def subset_mask(members: Iterable[int]) -> int:
    """Mask from 0-based member indices."""
    m = 0
    for i in members:
        m |= 1 << i
    return m


def subset_label(mask: int) -> str:
    """Human-readable 1-based set notation, e.g. ``{1,3}``."""
    return "{" + ",".join(str(i + 1) for i in subset_members(mask)) + "}"


def active_set(queues: np.ndarray) -> int:
    """Mask of users with at least one waiting job."""
    mask = 0
    for i, q in enumerate(queues):
        if q > 0:
            mask |= 1 << i
    return mask


# ---------------------------------------------------------------------------
# Policies
# ---------------------------------------------------------------------------

class SchedulerKind(enum.Enum):
    """How the policy picks a user once it finds the machine Free."""

    RANDOMIZED = "randomized"
    MAX_AGE = "maxage"


@dataclass(frozen=True)
class SubsetPolicy:
    """Decision rule used while a given subset of users is active.

    sampling_prob is the probability of paying for a state sample this slot.
    schedule_dist (only for randomized scheduling) is a length-N probability
    vector supported exactly on the subset members.
    """

    sampling_prob: float
    schedule_dist: np.ndarray | None = None

    def __post_init__(self) -> None:
        p = self.sampling_prob
        if not isinstance(p, (int, float)) or not np.isfinite(p) or not (0.0 < p <= 1.0):
            raise PolicyError(f"sampling_prob must lie in (0, 1], got {p!r}")
        object.__setattr__(self, "sampling_prob", float(p))
        if self.schedule_dist is not None:
            d = np.asarray(self.schedule_dist, dtype=np.float64).copy()
            if d.ndim != 1 or not np.all(np.isfinite(d)) or np.any(d < 0.0):
                raise PolicyError("schedule_dist must be a finite non-negative vector")
            if abs(d.sum() - 1.0) > 1e-9:
                raise PolicyError(f"schedule_dist must sum to 1, got {d.sum()!r}")
            d.flags.writeable = False
            object.__setattr__(self, "schedule_dist", d)


@dataclass(frozen=True)
class AdaptivePolicy:
    """Complete policy: one :class:`SubsetPolicy` per non-empty subset.

    The simulator looks up table[active_set] each slot the machine is not
    already serving.  Randomized policies carry a scheduling distribution per
    subset; max-age policies carry only sampling probabilities and always
    assign the user with the oldest pending age.
    """

    n_users: int
    scheduler: SchedulerKind
    table: Mapping[int, SubsetPolicy]

    def __post_init__(self) -> None:
        if self.n_users < 1:
            raise PolicyError("n_users must be positive")
        if self.n_users > SUBSET_CAP:
            raise PolicyError(f"policy tables support at most {SUBSET_CAP} users")
        table = dict(self.table)
        expected = set(enumerate_subsets(self.n_users))
        if set(table) != expected:
            missing = sorted(expected - set(table))
            extra = sorted(set(table) - expected)
            raise PolicyError(
                f"policy table must cover every non-empty subset exactly once "
                f"(missing {missing[:4]}{'...' if len(missing) > 4 else ''}, unexpected {extra[:4]})"
            )
        want_dist = self.scheduler is SchedulerKind.RANDOMIZED
        for mask, pol in table.items():
            if want_dist:
                if pol.schedule_dist is None:
                    raise PolicyError(f"randomized policy needs schedule_dist for subset {subset_label(mask)}")
                d = pol.schedule_dist
                if d.shape != (self.n_users,):
                    raise PolicyError(
                        f"schedule_dist for subset {subset_label(mask)} must have length {self.n_users}"
                    )
                for i in range(self.n_users):
                    member = bool((mask >> i) & 1)
                    if member and d[i] <= 0.0:
                        raise PolicyError(
                            f"schedule_dist for subset {subset_label(mask)} must put positive mass on user {i + 1}"
                        )
                    if not member and d[i] != 0.0:
                        raise PolicyError(
                            f"schedule_dist for subset {subset_label(mask)} puts mass on non-member user {i + 1}"
                        )
            elif pol.schedule_dist is not None:
                raise PolicyError("max-age policy entries must not carry schedule_dist")
        object.__setattr__(self, "table", table)

    # Kernel-facing tabulations.  Index 0 (empty set) is a padding row.
    def sampling_table(self) -> np.ndarray:
        """(2^N,) float64 of sampling probabilities, 0.0 at the empty set."""
        out = np.zeros(1 << self.n_users, dtype=np.float64)
        for mask, pol in self.table.items():
            out[mask] = pol.sampling_prob
        return out

    def cumulative_schedule_table(self) -> np.ndarray:
        """(2^N, N) float64 of within-subset cumulative scheduling mass.

        Row mask holds cumsum(schedule_dist) so the kernel can invert one
        uniform draw; zeros everywhere for max-age policies.
        """
        out = np.zeros((1 << self.n_users, self.n_users), dtype=np.float64)
        if self.scheduler is SchedulerKind.RANDOMIZED:
            for mask, pol in self.table.items():
                out[mask] = np.cumsum(pol.schedule_dist)
        return out


def uniform_policy(
    n_users: int,
    sampling_prob: float = 1.0,
    scheduler: SchedulerKind = SchedulerKind.RANDOMIZED,
) -> AdaptivePolicy:
    """Baseline policy: constant sampling probability, uniform scheduling."""
    table: dict[int, SubsetPolicy] = {}
    for mask in enumerate_subsets(n_users):
        if scheduler is SchedulerKind.RANDOMIZED:
            members = subset_members(mask)
            dist = np.zeros(n_users)
            dist[members] = 1.0 / len(members)
            table[mask] = SubsetPolicy(sampling_prob, dist)
        else:
            table[mask] = SubsetPolicy(sampling_prob)
    return AdaptivePolicy(n_users, scheduler, table)


def constant_sampling_table(n_users: int, sampling_prob: float) -> AdaptivePolicy:
    """Max-age policy with one sampling probability shared by all subsets."""
    return uniform_policy(n_users, sampling_prob, SchedulerKind.MAX_AGE)


# ---------------------------------------------------------------------------
# Random streams
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SlotDraws:
    """Pre-drawn uniforms for a block of slots, one column per purpose."""

    arrival: np.ndarray   # (T, N), empty in saturated mode
    service: np.ndarray   # (T, N)
    flip: np.ndarray      # (T,)
    sampling: np.ndarray  # (T,)
    schedule: np.ndarray  # (T,)
    post: np.ndarray      # (T,)


class RngStreams:
    """Named independent uniform streams for one simulation run.

    A single master seed is expanded through a seed tree into 2N + 4 child
    generators: one arrival and one service stream per user, plus streams for
    the idle-machine flip, the sampling coin, the scheduling choice and the
    post-completion state.  Each consumer owns a stream and draws are indexed
    by slot, so swapping the policy (or the kernel backend) leaves every
    other source of randomness untouched.
    """

    def __init__(self, master_seed: int, n_users: int) -> None:
        if n_users < 1:
            raise ParamError("n_users must be positive")
        self.master_seed = int(master_seed)
        self.n_users = n_users
        children = np.random.SeedSequence(self.master_seed).spawn(2 * n_users + 4)
        gens = [np.random.Generator(np.random.SFC64(c)) for c in children]
        self._arrival = gens[:n_users]
        self._service = gens[n_users:2 * n_users]
        self._flip = gens[2 * n_users]
        self._sampling = gens[2 * n_users + 1]
        self._schedule = gens[2 * n_users + 2]
        self._post = gens[2 * n_users + 3]

    def draw_initial_state(self) -> int:
        """Initial machine state: Free or Busy with equal probability.

        Consumes one draw from the flip stream.
        """
        return MACHINE_FREE if self._flip.random() < 0.5 else MACHINE_BUSY

    def draw_block(self, horizon: int, include_arrivals: bool) -> SlotDraws:
        """Uniform draws for the next `horizon` slots.

        Drawing two blocks of T/2 consumes each stream exactly like one block
        of T, which is what makes step-wise and batch simulation identical.
        """
        n = self.n_users
        if include_arrivals:
            arrival = np.empty((horizon, n))
            for i in range(n):
                arrival[:, i] = self._arrival[i].random(horizon)
        else:
            arrival = np.empty((0, 0))
        service = np.empty((horizon, n))
        for i in range(n):
            service[:, i] = self._service[i].random(horizon)
        return SlotDraws(
            arrival=arrival,
            service=service,
            flip=self._flip.random(horizon),
            sampling=self._sampling.random(horizon),
            schedule=self._schedule.random(horizon),
            post=self._post.random(horizon),
        )
