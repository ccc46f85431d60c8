"""Experiment pipelines behind the CLI subcommands.

Each `run_*` function takes a validated :class:`~aojc.config.ExperimentConfig`
plus an output directory, performs the work, writes CSV artifacts with a JSON
metadata sidecar (tool version, config hash, master seed -- never timestamps),
and returns a structured outcome for callers that want the numbers in
process.  All randomness is derived from the master seed with stable hashing,
so re-running a command with the same config and seed reproduces every output
byte for byte.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np

from . import __version__
from .analytics import (
    UserCountMode,
    closed_form_report,
    maxage_age,
    maxage_sampling_cost,
    randomized_ages,
    randomized_sampling_bound,
)
from .config import ExperimentConfig, VerifyCaseConfig
from .model import (
    AdaptivePolicy,
    SchedulerKind,
    SubsetPolicy,
    SystemParams,
    subset_members,
    uniform_policy,
)
from .optimizer import (
    OptResult,
    build_maxage_policy,
    build_randomized_policy,
    load_policy,
    save_policy,
)
from .simulator import DriftThresholds, run
from .stability import (
    _empirical_verdict,
    maxage_stability_check,
    randomized_stability_check,
    sufficiency_sweep,
    worstcase_stability_check,
)

__all__ = [
    "derive_seed",
    "write_csv",
    "run_evaluate",
    "run_simulate",
    "run_optimize",
    "run_verify",
    "run_fig4",
    "run_stability",
    "default_verify_cases",
    "VerifyOutcome",
    "Fig4Row",
    "Fig4Outcome",
    "StabilityOutcome",
]


# ---------------------------------------------------------------------------
# Deterministic plumbing
# ---------------------------------------------------------------------------

def derive_seed(master_seed: int, *key) -> int:
    """Stable 64-bit seed from the master seed and a structured key."""
    h = hashlib.sha256(str(int(master_seed)).encode())
    for part in key:
        h.update(b"|")
        h.update(str(part).encode())
    return int.from_bytes(h.digest()[:8], "little")


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def render_csv(header: Sequence[str], rows: Sequence[Sequence]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_cell(v) for v in row])
    return buf.getvalue()


def write_csv(
    path: Path,
    header: Sequence[str],
    rows: Sequence[Sequence],
    cfg: ExperimentConfig,
    command: str,
    master_seed: int,
) -> None:
    """Write a CSV plus its reproducibility sidecar (<name>.meta.json)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(render_csv(header, rows))
    meta = {
        "command": command,
        "config_hash": cfg.config_hash,
        "config_name": cfg.name,
        "master_seed": int(master_seed),
        "tool_version": __version__,
    }
    path.with_suffix(".meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")


def _map_ordered(fn: Callable, items: Sequence, workers: int) -> list:
    if workers <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def _resolve_policy(cfg: ExperimentConfig) -> tuple[AdaptivePolicy, Optional[list[OptResult]]]:
    pc = cfg.policy
    if pc.source == "file":
        policy = load_policy(pc.path)
        if policy.n_users != cfg.system.n_users:
            raise ValueError(
                f"policy file {pc.path} is for {policy.n_users} users, config has {cfg.system.n_users}"
            )
        return policy, None
    if pc.source == "uniform":
        return uniform_policy(cfg.system.n_users, pc.sampling_prob, pc.kind), None
    if pc.kind is SchedulerKind.RANDOMIZED:
        return build_randomized_policy(cfg.system, cfg.optimizer)
    policy, results = build_maxage_policy(cfg.system, cfg.optimizer)
    return policy, results


# ---------------------------------------------------------------------------
# evaluate
# ---------------------------------------------------------------------------

def run_evaluate(cfg: ExperimentConfig, out_dir: Path, master_seed: int):
    """Closed-form report for the configured saturated subsystem."""
    ev = cfg.evaluate
    if ev is None:
        raise ValueError("the evaluate command needs an 'evaluate' section in the config")
    report = closed_form_report(
        cfg.system,
        ev.subset,
        ev.family,
        ev.sampling_prob,
        schedule_dist=None if ev.schedule_dist is None else np.asarray(ev.schedule_dist),
        count_mode=ev.count_mode,
    )
    rows = [
        [r.subset, None if r.user is None else r.user + 1, r.quantity, r.value, r.tag]
        for r in report.rows
    ]
    write_csv(
        Path(out_dir) / "evaluate.csv",
        ["subset", "user", "thm", "value", "tag"],
        rows,
        cfg,
        "evaluate",
        master_seed,
    )
    return report


# ---------------------------------------------------------------------------
# simulate
# ---------------------------------------------------------------------------

def run_simulate(cfg: ExperimentConfig, out_dir: Path, master_seed: int, workers: int = 1):
    """One run per configured seed; emits per-user metrics and backlog traces."""
    policy, _ = _resolve_policy(cfg)
    sim = cfg.sim
    burn_in = int(sim.burn_in_frac * sim.horizon)
    stride = sim.trace_stride if sim.trace_stride > 0 else None

    def one(seed: int):
        return seed, run(
            cfg.system,
            policy,
            sim.horizon,
            derive_seed(master_seed, "simulate", seed),
            saturated=sim.saturated,
            subset=sim.subset,
            burn_in=burn_in,
            trace_stride=stride,
        )

    results = _map_ordered(one, list(sim.seeds), workers)

    metric_rows = []
    trace_rows = []
    for seed, m in results:
        for i in range(cfg.system.n_users):
            metric_rows.append(
                [cfg.name, seed, sim.horizon, i + 1,
                 float(m.age_mean[i]), float(m.completion_rate[i]), float(m.mean_queue[i])]
            )
        for slot, total in zip(m.trace_slots, m.trace_total_queue):
            trace_rows.append([cfg.name, seed, int(slot), int(total)])

    out_dir = Path(out_dir)
    write_csv(
        out_dir / "metrics.csv",
        ["config_id", "seed", "T", "user", "delta_hat", "completion_rate", "mean_queue"],
        metric_rows, cfg, "simulate", master_seed,
    )
    write_csv(
        out_dir / "trace.csv",
        ["config_id", "seed", "slot", "total_queue"],
        trace_rows, cfg, "simulate", master_seed,
    )
    return [m for _, m in results]


# ---------------------------------------------------------------------------
# optimize
# ---------------------------------------------------------------------------

def run_optimize(cfg: ExperimentConfig, out_dir: Path, master_seed: int):
    """Solve every subset for the configured family; emit table + CSV."""
    if cfg.policy.source == "file":
        raise ValueError("the optimize command requires policy.source optimize or uniform")
    if cfg.policy.kind is SchedulerKind.RANDOMIZED:
        policy, results = build_randomized_policy(cfg.system, cfg.optimizer)
    else:
        policy, results = build_maxage_policy(cfg.system, cfg.optimizer)

    rows = []
    for r in sorted(results, key=lambda r: r.subset):
        pi_json = (
            ""
            if r.schedule_dist is None
            else json.dumps([float(x) for x in r.schedule_dist], separators=(",", ":"))
        )
        rows.append([r.subset, r.sampling_prob, pi_json, r.objective, r.converged])

    out_dir = Path(out_dir)
    write_csv(
        out_dir / "optimize.csv",
        ["subset_mask", "mu_star", "pi_star_json", "objective", "converged"],
        rows, cfg, "optimize", master_seed,
    )
    save_policy(out_dir / "policy.json", policy, results)
    return policy, results


# ---------------------------------------------------------------------------
# verify
# ---------------------------------------------------------------------------

def default_verify_cases() -> tuple[VerifyCaseConfig, ...]:
    """Built-in saturated verification battery.

    Covers both families, subset sizes 1, 2 and 4, heterogeneous service
    rates, and machine parameters away from the symmetric q = s = 1/2 point.
    Arrival rates are irrelevant in saturated mode and set to a placeholder.
    """
    def sysp(service, q, s, cost):
        n = len(service)
        return SystemParams(n, [0.01] * n, service, q, s, cost)

    def case(cid, family, service, q, s, cost, users, mu, dist=None):
        params = sysp(service, q, s, cost)
        mask = 0
        for u in users:
            mask |= 1 << (u - 1)
        full = None
        if dist is not None:
            full = [0.0] * params.n_users
            for u, w in zip(users, dist):
                full[u - 1] = w
            full = tuple(full)
        return VerifyCaseConfig(
            case_id=cid,
            family=SchedulerKind(family),
            subset=mask,
            sampling_prob=mu,
            params=params,
            schedule_dist=full,
        )

    return (
        case("rand-single-fast", "randomized", [1.0], 0.5, 0.5, 5.0, [1], 1.0, [1.0]),
        case("rand-single-sticky", "randomized", [1.0], 0.25, 0.5, 1.0, [1], 1.0, [1.0]),
        case("rand-pair", "randomized", [0.4, 0.8], 0.5, 0.5, 2.0, [1, 2], 0.7, [0.3, 0.7]),
        case("rand-full-four", "randomized", [0.1, 0.4, 0.6, 0.9], 0.5, 0.5, 5.0,
             [1, 2, 3, 4], 0.6, [0.1, 0.2, 0.3, 0.4]),
        case("rand-sub-asym", "randomized", [0.55, 0.84, 0.7, 0.9], 0.35, 0.3, 3.0,
             [1, 3], 0.85, [0.45, 0.55]),
        case("max-single-always", "maxage", [1.0], 0.5, 0.5, 5.0, [1], 1.0),
        case("max-single-half", "maxage", [1.0], 0.5, 0.5, 5.0, [1], 0.5),
        case("max-pair-subset", "maxage", [0.4, 0.8, 0.6, 0.9], 0.5, 0.5, 5.0, [1, 2], 0.5),
        case("max-full-four", "maxage", [0.1, 0.4, 0.6, 0.9], 0.5, 0.5, 5.0, [1, 2, 3, 4], 0.6),
        case("max-pair-asym", "maxage", [0.55, 0.84], 0.3, 0.7, 2.0, [1, 2], 0.75),
    )


@dataclass(frozen=True)
class VerifyOutcome:
    rows: tuple
    findings: dict
    failures: int


def run_verify(cfg: ExperimentConfig, out_dir: Path, master_seed: int, workers: int = 1) -> VerifyOutcome:
    """Closed forms vs Monte Carlo on every verification case.

    Age rows and max-age sampling rows carry pass/fail at the configured
    tolerance; the randomized sampling figure is a bound, so its rows are
    informational and the (empirical, bound) pairs land in findings.json
    together with the user-count-mode discrimination on proper subsets.
    """
    vc = cfg.verify
    cases = vc.cases if vc.cases else default_verify_cases()
    tol = vc.tolerance

    def simulate_case(case: VerifyCaseConfig):
        if case.family is SchedulerKind.RANDOMIZED:
            # only the case's subset entry matters in saturated mode; the other
            # subsets get uniform placeholders to satisfy table completeness
            tbl = dict(uniform_policy(case.params.n_users, 1.0).table)
            tbl[case.subset] = SubsetPolicy(case.sampling_prob, np.asarray(case.schedule_dist))
            policy = AdaptivePolicy(case.params.n_users, SchedulerKind.RANDOMIZED, tbl)
        else:
            policy = uniform_policy(case.params.n_users, case.sampling_prob, SchedulerKind.MAX_AGE)
        metrics = [
            run(
                case.params, policy, vc.horizon,
                derive_seed(master_seed, "verify", case.case_id, seed),
                saturated=True, subset=case.subset, burn_in=0,
            )
            for seed in vc.seeds
        ]
        age_emp = np.mean([m.age_mean for m in metrics], axis=0)
        cost_emp = float(np.mean([m.sampling_cost for m in metrics]))
        return age_emp, cost_emp

    empirics = _map_ordered(simulate_case, list(cases), workers)

    rows = []
    failures = 0
    bound_pairs = []
    mode_probe = []
    for case, (age_emp, cost_emp) in zip(cases, empirics):
        members = subset_members(case.subset)
        if case.family is SchedulerKind.RANDOMIZED:
            closed_ages = randomized_ages(
                case.params, case.subset, case.sampling_prob, case.schedule_dist
            )
            for i, u in enumerate(members):
                closed = float(closed_ages[i])
                emp = float(age_emp[u])
                rel = abs(emp - closed) / closed
                ok = rel <= tol
                failures += 0 if ok else 1
                rows.append([case.case_id, "randomized", case.subset, u + 1, "age",
                             closed, emp, rel, tol, "pass" if ok else "fail"])
            bound = randomized_sampling_bound(
                case.params, case.subset, case.sampling_prob, case.schedule_dist
            )
            rows.append([case.case_id, "randomized", case.subset, None, "sampling_bound",
                         float(bound), cost_emp, None, None, "info"])
            bound_pairs.append(
                {"case_id": case.case_id, "empirical": cost_emp, "bound": float(bound),
                 "within_bound": cost_emp <= bound}
            )
        else:
            closed_sub = maxage_age(case.params, case.subset, case.sampling_prob,
                                    UserCountMode.SUBSET_SIZE)
            for u in members:
                emp = float(age_emp[u])
                rel = abs(emp - closed_sub) / closed_sub
                ok = rel <= tol
                failures += 0 if ok else 1
                rows.append([case.case_id, "maxage", case.subset, u + 1, "age",
                             closed_sub, emp, rel, tol, "pass" if ok else "fail"])
            closed_cost = maxage_sampling_cost(case.params, case.subset, case.sampling_prob,
                                               UserCountMode.SUBSET_SIZE)
            emp_age = float(age_emp[members].mean())
            if closed_cost > 0.0:
                rel = abs(cost_emp - closed_cost) / closed_cost
                ok = rel <= tol
                failures += 0 if ok else 1
                rows.append([case.case_id, "maxage", case.subset, None, "sampling_cost",
                             float(closed_cost), cost_emp, rel, tol, "pass" if ok else "fail"])
            if len(members) < case.params.n_users:
                closed_tot = maxage_age(case.params, case.subset, case.sampling_prob,
                                        UserCountMode.TOTAL_USERS)
                rel_sub = abs(emp_age - closed_sub) / closed_sub
                rel_tot = abs(emp_age - closed_tot) / closed_tot
                mode_probe.append({
                    "case_id": case.case_id,
                    "empirical_age": emp_age,
                    "subset_size_value": float(closed_sub),
                    "subset_size_rel_err": rel_sub,
                    "total_users_value": float(closed_tot),
                    "total_users_rel_err": rel_tot,
                    "better": "subset_size" if rel_sub <= rel_tot else "total_users",
                })

    findings = {
        "sampling_bound_pairs": bound_pairs,
        "bound_violations": sum(1 for p in bound_pairs if not p["within_bound"]),
        "user_count_mode": {
            "probes": mode_probe,
            "resolved": (
                "subset_size"
                if all(p["better"] == "subset_size" for p in mode_probe)
                else "mixed"
            ) if mode_probe else "no proper-subset max-age case configured",
        },
        "failures": failures,
    }

    out_dir = Path(out_dir)
    write_csv(
        out_dir / "verify.csv",
        ["case_id", "family", "subset_mask", "user", "quantity",
         "closed_form", "empirical", "rel_err", "tolerance", "status"],
        rows, cfg, "verify", master_seed,
    )
    (out_dir / "findings.json").write_text(json.dumps(findings, indent=2, sort_keys=True) + "\n")
    return VerifyOutcome(rows=tuple(tuple(r) for r in rows), findings=findings, failures=failures)


# ---------------------------------------------------------------------------
# fig4
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Fig4Row:
    q: float
    policy: str            # "phi1" | "phibar1"
    arrival_config: str
    total_cost: float
    delta_avg: float
    sampling_cost: float
    ci_halfwidth: float


@dataclass(frozen=True)
class Fig4Outcome:
    rows: tuple[Fig4Row, ...]


def run_fig4(cfg: ExperimentConfig, out_dir: Path, master_seed: int, workers: int = 1) -> Fig4Outcome:
    """Total cost of the two solved policy families across the flip-prob grid.

    For every grid value the per-subset optimizers rebuild both policy
    tables; each (q, arrival config, policy) cell then runs the open system
    once per seed.  Any cell failure aborts the whole command with the cell
    named -- partial CSVs are never written.
    """
    f4 = cfg.fig4
    if f4 is None:
        raise ValueError("the fig4 command needs a 'fig4' section in the config")

    policies = {}
    for qi, q in enumerate(f4.flip_probs):
        params_q = cfg.system.replace(flip_prob=float(q))
        rand_policy, _ = build_randomized_policy(params_q, cfg.optimizer)
        max_policy, _ = build_maxage_policy(params_q, cfg.optimizer)
        policies[qi] = (params_q, {"phi1": rand_policy, "phibar1": max_policy})

    cells = [
        (qi, arrival_name, policy_name)
        for qi in range(len(f4.flip_probs))
        for policy_name in ("phi1", "phibar1")
        for arrival_name, _ in f4.arrival_configs
    ]

    def one(cell):
        qi, arrival_name, policy_name = cell
        q = f4.flip_probs[qi]
        try:
            params_q, by_name = policies[qi]
            rates = dict(f4.arrival_configs)[arrival_name]
            params = params_q.replace(arrival_rates=np.asarray(rates))
            policy = by_name[policy_name]
            totals, deltas, costs = [], [], []
            for seed in f4.seeds:
                m = run(
                    params, policy, f4.horizon,
                    derive_seed(master_seed, "fig4", qi, arrival_name, policy_name, seed),
                )
                totals.append(m.total_cost)
                deltas.append(float(m.age_mean.mean()))
                costs.append(m.sampling_cost)
            totals = np.asarray(totals)
            ci = 0.0
            if len(totals) > 1:
                ci = 1.96 * float(totals.std(ddof=1)) / np.sqrt(len(totals))
            return Fig4Row(
                q=float(q),
                policy=policy_name,
                arrival_config=arrival_name,
                total_cost=float(totals.mean()),
                delta_avg=float(np.mean(deltas)),
                sampling_cost=float(np.mean(costs)),
                ci_halfwidth=float(ci),
            )
        except Exception as e:
            raise RuntimeError(
                f"fig4 cell failed (q={q}, policy={policy_name}, arrival_config={arrival_name}): {e}"
            ) from e

    rows = _map_ordered(one, cells, workers)
    write_csv(
        Path(out_dir) / "fig4.csv",
        ["q", "policy", "arrival_config", "total_cost", "delta_avg", "sampling_cost", "ci_halfwidth"],
        [[r.q, r.policy, r.arrival_config, r.total_cost, r.delta_avg, r.sampling_cost, r.ci_halfwidth]
         for r in rows],
        cfg, "fig4", master_seed,
    )
    return Fig4Outcome(rows=tuple(rows))


# ---------------------------------------------------------------------------
# stability
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class StabilityOutcome:
    summary: dict
    condition_rows: tuple
    sweep_rows: tuple


def run_stability(cfg: ExperimentConfig, out_dir: Path, master_seed: int, workers: int = 1) -> StabilityOutcome:
    """Condition checks plus empirical drift verdicts for each named case,
    optionally followed by the random soundness sweep."""
    st = cfg.stability
    cases = list(st.cases)
    if not cases:
        from .config import StabilityCaseConfig
        cases = [StabilityCaseConfig(case_id=cfg.name, params=cfg.system)]

    condition_rows = []
    summary: dict = {}

    def one_case(case):
        rand_policy, _ = build_randomized_policy(case.params, cfg.optimizer)
        max_policy, _ = build_maxage_policy(case.params, cfg.optimizer)
        rand_rep = randomized_stability_check(case.params, rand_policy, st.epsilon)
        max_rep = maxage_stability_check(case.params, max_policy, st.epsilon)
        worst = worstcase_stability_check(case.params, rand_policy, st.epsilon)
        seeds_r = [derive_seed(master_seed, "stability", case.case_id, "phi1", s) for s in st.seeds]
        seeds_m = [derive_seed(master_seed, "stability", case.case_id, "phibar1", s) for s in st.seeds]
        verdict_r = _empirical_verdict(case.params, rand_policy, st.horizon, seeds_r, DriftThresholds())
        verdict_m = _empirical_verdict(case.params, max_policy, st.horizon, seeds_m, DriftThresholds())
        return case, rand_rep, max_rep, worst, verdict_r, verdict_m

    results = _map_ordered(one_case, cases, workers)

    for case, rand_rep, max_rep, worst, verdict_r, verdict_m in results:
        for cond in rand_rep.conditions:
            condition_rows.append([case.case_id, cond.subset, cond.margin,
                                   cond.satisfied, cond.service_rate, "randomized"])
        for cond in max_rep.conditions:
            condition_rows.append([case.case_id, cond.subset, cond.margin,
                                   cond.satisfied, cond.service_rate, "maxage"])
        condition_rows.append([case.case_id, 0, worst.margin, worst.satisfied,
                               worst.min_service_rate, "worstcase"])
        summary[case.case_id] = {
            "randomized": {
                "conditions_satisfied": rand_rep.satisfied,
                "worst_margin": rand_rep.worst_margin,
                "empirical_verdict": verdict_r,
            },
            "maxage": {
                "conditions_satisfied": max_rep.satisfied,
                "worst_margin": max_rep.worst_margin,
                "empirical_verdict": verdict_m,
            },
            "worstcase_satisfied": worst.satisfied,
        }

    sweep_rows = []
    if st.sweep_cases > 0:
        sweep = sufficiency_sweep(
            st.sweep_cases,
            derive_seed(master_seed, "stability", "sweep"),
            horizon=st.horizon,
            n_seeds=len(st.seeds),
            epsilon=st.epsilon,
        )
        for r in sweep:
            sweep_rows.append([
                r.case_id, r.n_users, r.total_arrival_rate,
                r.randomized_satisfied, r.randomized_margin,
                r.maxage_satisfied, r.maxage_margin,
                r.worstcase_satisfied, r.randomized_verdict,
                r.maxage_verdict if r.maxage_verdict is not None else None,
                r.sound,
            ])
        summary["sweep"] = {
            "cases": len(sweep),
            "all_sound": all(r.sound for r in sweep),
            "satisfied_randomized": sum(1 for r in sweep if r.randomized_satisfied),
            "satisfied_maxage": sum(1 for r in sweep if r.maxage_satisfied),
        }

    out_dir = Path(out_dir)
    write_csv(
        out_dir / "stability.csv",
        ["config_id", "subset_mask", "margin", "satisfied", "q_min_or_weighted", "policy_kind"],
        condition_rows, cfg, "stability", master_seed,
    )
    if sweep_rows:
        write_csv(
            out_dir / "stability_sweep.csv",
            ["case_id", "n_users", "total_arrival_rate",
             "randomized_satisfied", "randomized_margin",
             "maxage_satisfied", "maxage_margin",
             "worstcase_satisfied", "randomized_verdict", "maxage_verdict", "sound"],
            sweep_rows, cfg, "stability", master_seed,
        )
    (out_dir / "stability_summary.json").write_text(
        json.dumps(summary, indent=2, sort_keys=True) + "\n"
    )
    return StabilityOutcome(
        summary=summary,
        condition_rows=tuple(tuple(r) for r in condition_rows),
        sweep_rows=tuple(tuple(r) for r in sweep_rows),
    )
