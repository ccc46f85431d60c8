"""Per-subset policy optimization and policy-table construction.

For each non-empty subset the closed-form total cost (sum of member ages plus
sampling figure) is minimized over the policy's free parameters:

* randomized family -- (mu, pi) via Nelder-Mead in an unconstrained
  reparametrization (sigmoid for mu, anchored softmax with a small floor for
  pi), one canonical start plus seeded random restarts;
* max-age family -- mu alone via a coarse grid followed by golden-section
  refinement.

Stitching the per-subset winners together yields the adaptive policies the
simulator consumes.  Tables round-trip through JSON exactly.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional

import numpy as np
from scipy.optimize import minimize
from scipy.special import expit

from .analytics import _randomized_ages_core, free_find_prob, maxage_total_cost
from .model import (
    AdaptivePolicy,
    SchedulerKind,
    SubsetPolicy,
    SystemParams,
    enumerate_subsets,
    subset_label,
    subset_members,
)

__all__ = [
    "OptimizationError",
    "OptimizerSettings",
    "OptResult",
    "optimize_randomized_subset",
    "optimize_maxage_subset",
    "build_randomized_policy",
    "build_maxage_policy",
    "save_policy",
    "load_policy",
]

POLICY_FORMAT = "aojc-policy"
POLICY_VERSION = 1


class OptimizationError(RuntimeError):
    """Raised when the objective turns non-finite; carries the bad point."""

    def __init__(self, message: str, point=None):
        super().__init__(message)
        self.point = point


@dataclass(frozen=True)
class OptimizerSettings:
    """Knobs for both families; the defaults are deterministic and tight
    enough that re-runs agree to full precision."""

    restarts: int = 16
    seed: int = 2026
    mu_lo: float = 1e-3
    mu_hi: float = 1.0 - 1e-3
    pi_floor: float = 1e-4
    xatol: float = 1e-8
    fatol: float = 1e-8
    max_iter: int = 5000
    grid_points: int = 200
    golden_tol: float = 1e-8

    def __post_init__(self) -> None:
        if not (0.0 < self.mu_lo < self.mu_hi <= 1.0):
            raise ValueError("need 0 < mu_lo < mu_hi <= 1")
        if self.restarts < 0 or self.grid_points < 3:
            raise ValueError("restarts must be >= 0 and grid_points >= 3")
        if not (0.0 <= self.pi_floor < 0.05):
            raise ValueError("pi_floor must be small and non-negative")


@dataclass(frozen=True)
class OptResult:
    """Winner for one subset.  canonical_objective is the cost at the fixed
    canonical start (mu midway, uniform pi), kept so monotonicity of the
    multi-start search can be audited."""

    subset: int
    scheduler: SchedulerKind
    sampling_prob: float
    schedule_dist: Optional[np.ndarray]
    objective: float
    canonical_objective: float
    iterations: int
    n_starts: int
    converged: bool


def _randomized_objective(params: SystemParams, subset: int) -> Callable:
    """Member-space total cost f(mu, pi_m); validates finiteness."""
    members = subset_members(subset)
    q_m = params.service_rates[members]
    q, s, cost = params.flip_prob, params.post_busy_prob, params.sampling_cost

    def f(mu: float, pi_m: np.ndarray) -> float:
        ages = _randomized_ages_core(q_m, pi_m, q, s, mu)
        eta_bar = float(np.sum(pi_m / q_m))
        p_star = free_find_prob(q, mu)
        bound = (cost + 1.0) * mu / p_star / (1.0 / (mu * p_star) + eta_bar)
        val = float(ages.sum() + bound)
        if not math.isfinite(val):
            raise OptimizationError(
                f"non-finite objective {val!r} for subset {subset_label(subset)} "
                f"at mu={mu!r}, pi={pi_m.tolist()!r}",
                point=(mu, pi_m.copy()),
            )
        return val

    return f


def _decode(x: np.ndarray, m: int, st: OptimizerSettings):
    """Unconstrained coords -> (mu, member distribution)."""
    mu = st.mu_lo + (st.mu_hi - st.mu_lo) * float(expit(x[0]))
    if m == 1:
        return mu, np.ones(1)
    logits = np.concatenate(([0.0], x[1:]))
    logits = logits - logits.max()
    w = np.exp(logits)
    pi = w / w.sum()
    # keep every coordinate strictly positive regardless of how far the
    # search wanders
    pi = pi * (1.0 - m * st.pi_floor) + st.pi_floor
    return mu, pi


def optimize_randomized_subset(
    params: SystemParams,
    subset: int,
    settings: OptimizerSettings = OptimizerSettings(),
) -> OptResult:
    """Minimize the randomized-family closed-form cost for one subset.

    Runs Nelder-Mead from the canonical start and from `restarts` seeded
    random points (drawn sequentially, so enlarging `restarts` only appends
    starts and the best value is monotone in it).
    """
    members = subset_members(subset)
    m = len(members)
    f = _randomized_objective(params, subset)
    dim = 1 + (m - 1)

    def wrapped(x: np.ndarray) -> float:
        mu, pi = _decode(x, m, settings)
        return f(mu, pi)

    rng = np.random.Generator(
        np.random.SFC64(np.random.SeedSequence(settings.seed, spawn_key=(subset,)))
    )
    starts = [np.zeros(dim)]
    for _ in range(settings.restarts):
        starts.append(rng.uniform(-4.0, 4.0, size=dim))

    canonical_objective = wrapped(starts[0])
    best = None
    for x0 in starts:
        res = minimize(
            wrapped,
            x0,
            method="Nelder-Mead",
            options={
                "xatol": settings.xatol,
                "fatol": settings.fatol,
                "maxiter": settings.max_iter,
                "maxfev": 2 * settings.max_iter,
            },
        )
        if best is None or res.fun < best.fun:
            best = res
    assert best is not None

    mu, pi_m = _decode(best.x, m, settings)
    dist = np.zeros(params.n_users)
    dist[members] = pi_m
    return OptResult(
        subset=subset,
        scheduler=SchedulerKind.RANDOMIZED,
        sampling_prob=mu,
        schedule_dist=dist,
        objective=f(mu, pi_m),
        canonical_objective=canonical_objective,
        iterations=int(best.nit),
        n_starts=len(starts),
        converged=bool(best.success),
    )


def _golden_section(f: Callable[[float], float], a: float, b: float, tol: float):
    """Golden-section minimize on [a, b]; returns (x, f(x), evals)."""
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = f(c), f(d)
    evals = 2
    while b - a > tol:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
        evals += 1
    return (c, fc, evals) if fc <= fd else (d, fd, evals)


def optimize_maxage_subset(
    params: SystemParams,
    subset: int,
    settings: OptimizerSettings = OptimizerSettings(),
) -> OptResult:
    """Minimize the max-age-family closed-form cost over mu for one subset.

    A `grid_points` scan brackets the minimum, golden-section refines it to
    `golden_tol`; the reported point is never worse than the best grid point.
    """
    def f(mu: float) -> float:
        val = maxage_total_cost(params, subset, mu)
        if not math.isfinite(val):
            raise OptimizationError(
                f"non-finite objective {val!r} for subset {subset_label(subset)} at mu={mu!r}",
                point=(mu,),
            )
        return val

    grid = np.linspace(settings.mu_lo, settings.mu_hi, settings.grid_points)
    values = np.array([f(x) for x in grid])
    i = int(values.argmin())
    lo = grid[max(0, i - 1)]
    hi = grid[min(len(grid) - 1, i + 1)]
    x, fx, evals = _golden_section(f, float(lo), float(hi), settings.golden_tol)
    if values[i] < fx:
        x, fx = float(grid[i]), float(values[i])

    canonical = f(0.5 * (settings.mu_lo + settings.mu_hi))
    return OptResult(
        subset=subset,
        scheduler=SchedulerKind.MAX_AGE,
        sampling_prob=float(x),
        schedule_dist=None,
        objective=float(fx),
        canonical_objective=canonical,
        iterations=evals,
        n_starts=1,
        converged=True,
    )


def build_randomized_policy(
    params: SystemParams,
    settings: OptimizerSettings = OptimizerSettings(),
) -> tuple[AdaptivePolicy, list[OptResult]]:
    """Optimize every non-empty subset and assemble the adaptive policy."""
    results = [
        optimize_randomized_subset(params, mask, settings)
        for mask in enumerate_subsets(params.n_users)
    ]
    table = {r.subset: SubsetPolicy(r.sampling_prob, r.schedule_dist) for r in results}
    return AdaptivePolicy(params.n_users, SchedulerKind.RANDOMIZED, table), results


def build_maxage_policy(
    params: SystemParams,
    settings: OptimizerSettings = OptimizerSettings(),
) -> tuple[AdaptivePolicy, list[OptResult]]:
    """Optimize sampling for every non-empty subset, max-age scheduling."""
    results = [
        optimize_maxage_subset(params, mask, settings)
        for mask in enumerate_subsets(params.n_users)
    ]
    table = {r.subset: SubsetPolicy(r.sampling_prob) for r in results}
    return AdaptivePolicy(params.n_users, SchedulerKind.MAX_AGE, table), results


# ---------------------------------------------------------------------------
# Policy (de)serialization
# ---------------------------------------------------------------------------

def save_policy(
    path,
    policy: AdaptivePolicy,
    results: Optional[list[OptResult]] = None,
) -> None:
    """Write a policy table as JSON; floats survive the round trip exactly."""
    doc = {
        "format": POLICY_FORMAT,
        "version": POLICY_VERSION,
        "n_users": policy.n_users,
        "scheduler": policy.scheduler.value,
        "table": {
            str(mask): {
                "sampling_prob": pol.sampling_prob,
                "schedule_dist": None if pol.schedule_dist is None else pol.schedule_dist.tolist(),
            }
            for mask, pol in sorted(policy.table.items())
        },
    }
    if results is not None:
        doc["objectives"] = {str(r.subset): r.objective for r in sorted(results, key=lambda r: r.subset)}
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def load_policy(path) -> AdaptivePolicy:
    doc = json.loads(Path(path).read_text())
    if doc.get("format") != POLICY_FORMAT:
        raise ValueError(f"{path}: not a policy file")
    if doc.get("version") != POLICY_VERSION:
        raise ValueError(f"{path}: unsupported policy version {doc.get('version')!r}")
    scheduler = SchedulerKind(doc["scheduler"])
    table = {}
    for key, entry in doc["table"].items():
        dist = entry["schedule_dist"]
        table[int(key)] = SubsetPolicy(
            entry["sampling_prob"],
            None if dist is None else np.asarray(dist, dtype=np.float64),
        )
    return AdaptivePolicy(int(doc["n_users"]), scheduler, table)
