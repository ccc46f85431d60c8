"""Acceptance gate: every release criterion, each with its stated tolerance.

Heavy artifacts (verification battery, cost-curve sweep, soundness sweep) are
produced once per module and shared across the criteria that read them.  Each
test records a PASS/FAIL line for the end-of-run summary before asserting.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import pytest

from aojc.analytics import (
    acquisition_moments,
    chi,
    maxage_age,
    maxage_sampling_cost,
    maxage_total_cost,
    randomized_age,
    randomized_sampling_bound,
    randomized_total_cost,
)
from aojc.config import load_config
from aojc.experiments import run_fig4, run_stability, run_verify
from aojc.model import SystemParams, subset_size
from aojc.optimizer import (
    OptimizerSettings,
    build_maxage_policy,
    build_randomized_policy,
    optimize_randomized_subset,
)
from aojc.stability import sufficiency_sweep

CONFIG_DIR = Path(__file__).resolve().parent.parent / "configs"

pytestmark = pytest.mark.acceptance


# ---------------------------------------------------------------------------
# shared heavy artifacts
# ---------------------------------------------------------------------------

@pytest.fixture(scope="module")
def paper_cfg():
    return load_config(CONFIG_DIR / "paper.yaml")


@pytest.fixture(scope="module")
def stability_cfg():
    return load_config(CONFIG_DIR / "stability.yaml")


@pytest.fixture(scope="module")
def verify_runs(paper_cfg, tmp_path_factory):
    d1 = tmp_path_factory.mktemp("verify1")
    d2 = tmp_path_factory.mktemp("verify2")
    outcome = run_verify(paper_cfg, d1, paper_cfg.master_seed, workers=2)
    run_verify(paper_cfg, d2, paper_cfg.master_seed, workers=2)
    return outcome, d1, d2


@pytest.fixture(scope="module")
def fig4_runs(paper_cfg, tmp_path_factory):
    d1 = tmp_path_factory.mktemp("fig4a")
    d2 = tmp_path_factory.mktemp("fig4b")
    outcome = run_fig4(paper_cfg, d1, paper_cfg.master_seed, workers=4)
    run_fig4(paper_cfg, d2, paper_cfg.master_seed, workers=4)
    return outcome, d1, d2


@pytest.fixture(scope="module")
def case_study_outcome(stability_cfg, tmp_path_factory):
    out = tmp_path_factory.mktemp("cases")
    return run_stability(stability_cfg, out, stability_cfg.master_seed, workers=4)


@pytest.fixture(scope="module")
def sweep_rows():
    return sufficiency_sweep(1000, 20260814, horizon=200_000, n_seeds=3, epsilon=0.01)


def single_user(q, s, qbar, L=5.0) -> SystemParams:
    return SystemParams(1, np.array([0.01]), np.array([qbar]), q, s, L)


# ---------------------------------------------------------------------------
# criteria
# ---------------------------------------------------------------------------

def test_hand_value_suite(acceptance_log):
    one = np.array([1.0])
    checks = [
        ("randomized age, instant service", randomized_age(single_user(0.5, 0.5, 1.0), 1, 1.0, one, 0), 2.0),
        ("randomized age, sticky machine", randomized_age(single_user(0.25, 0.5, 1.0), 1, 1.0, one, 0), 11.0 / 3.0),
        ("sampling upper bound", randomized_sampling_bound(single_user(0.5, 0.5, 1.0), 1, 1.0, one), 4.0),
        ("max-age age, instant service", maxage_age(single_user(0.5, 0.5, 1.0), 1, 1.0), 2.0),
        ("max-age sampling cost", maxage_sampling_cost(single_user(0.5, 0.5, 1.0), 1, 1.0), 5.0),
        ("acq first moment", acquisition_moments(1.0, 0.5, 0.5)[0], 2.0),
        ("acq second moment", acquisition_moments(1.0, 0.5, 0.5)[1], 6.0),
    ]
    worst = max(abs(value - target) for _, value, target in checks)
    ok = worst <= 1e-9
    acceptance_log("closed-form hand values (tol 1e-9)", ok, f"max abs err {worst:.2e}")
    assert ok, [(name, value, target) for name, value, target in checks if abs(value - target) > 1e-9]


def test_closed_forms_match_simulation(verify_runs, acceptance_log):
    outcome, _, _ = verify_runs
    age_rows = [r for r in outcome.rows if r[4] in ("age", "sampling_cost")]
    case_ids = {r[0] for r in age_rows}
    sizes = {subset_size(r[2]) for r in age_rows}
    worst = max(r[7] for r in age_rows)
    ok = (
        outcome.failures == 0
        and len(case_ids) >= 6
        and {1, 2, 4} <= sizes
    )
    acceptance_log(
        "closed forms vs simulation (tol 2%)",
        ok,
        f"{len(case_ids)} cases, sizes {sorted(sizes)}, worst rel err {worst:.4f}",
    )
    assert ok


def test_sampling_bound_report_complete(verify_runs, acceptance_log):
    outcome, out_dir, _ = verify_runs
    pairs = outcome.findings["sampling_bound_pairs"]
    n_rand = len({r[0] for r in outcome.rows if r[1] == "randomized"})
    complete = (
        len(pairs) == n_rand
        and all(np.isfinite(p["empirical"]) and np.isfinite(p["bound"]) for p in pairs)
        and (out_dir / "findings.json").exists()
    )
    within = sum(1 for p in pairs if p["within_bound"])
    acceptance_log(
        "sampling-bound report (informational)",
        complete,
        f"{len(pairs)} pairs, {within} within bound",
    )
    assert complete


def test_singleton_identity(acceptance_log):
    worst = 0.0
    one = np.array([1.0])
    for mu in np.linspace(0.2, 1.0, 5):
        for q1 in np.linspace(0.2, 1.0, 5):
            p = single_user(0.4, 0.7, q1)
            a = randomized_age(p, 1, mu, one, 0)
            b = maxage_age(p, 1, mu)
            worst = max(worst, abs(a - b))
    ok = worst <= 1e-9
    acceptance_log("singleton family identity (tol 1e-9)", ok, f"max abs gap {worst:.2e}")
    assert ok


def test_chi_continuity_and_range(acceptance_log):
    jump = max(
        abs(chi(0.5 - 1e-13, s) - chi(0.5 + 1e-13, s))
        for s in np.linspace(0.01, 0.99, 99)
    )
    grid = np.array([
        [chi(q, s) for s in np.linspace(0.01, 0.99, 50)]
        for q in np.linspace(0.01, 0.99, 50)
    ])
    ok = jump <= 1e-12 and np.all(grid > 0.0) and np.all(grid < 1.0)
    acceptance_log(
        "chi continuity at q=1/2 and range",
        ok,
        f"max jump {jump:.2e}, range [{grid.min():.4f}, {grid.max():.4f}]",
    )
    assert ok


@pytest.mark.slow
def test_stability_soundness_sweep(sweep_rows, acceptance_log):
    rows = sweep_rows
    violations = [
        r.case_id
        for r in rows
        if (r.randomized_satisfied and r.randomized_verdict == "Unstable")
        or (r.maxage_satisfied and r.maxage_verdict == "Unstable")
    ]
    implication_breaks = [
        r.case_id for r in rows if r.worstcase_satisfied and not r.randomized_satisfied
    ]
    n_sat = sum(1 for r in rows if r.randomized_satisfied)
    ok = len(rows) >= 1000 and not violations and not implication_breaks
    acceptance_log(
        "stability soundness sweep (1000 configs)",
        ok,
        f"{len(rows)} cases, {n_sat} satisfied, "
        f"{len(violations)} violations, {len(implication_breaks)} implication breaks",
    )
    assert ok, (violations[:5], implication_breaks[:5])


@pytest.mark.slow
def test_stability_case_studies(case_study_outcome, acceptance_log):
    summary = case_study_outcome.summary
    a, b = summary["caseA"], summary["caseB"]

    conditions_ok = (
        not a["randomized"]["conditions_satisfied"]
        and not a["maxage"]["conditions_satisfied"]
        and not b["randomized"]["conditions_satisfied"]
        and not b["maxage"]["conditions_satisfied"]
    )
    b_stable = (
        b["randomized"]["empirical_verdict"] == "Stable"
        and b["maxage"]["empirical_verdict"] == "Stable"
    )
    a_unstable = (
        a["randomized"]["empirical_verdict"] == "Unstable"
        and a["maxage"]["empirical_verdict"] == "Unstable"
    )
    ok = conditions_ok and b_stable and a_unstable
    acceptance_log(
        "case studies: conditions and empirical verdicts",
        ok,
        "A verdicts ({}, {}), B verdicts ({}, {})".format(
            a["randomized"]["empirical_verdict"],
            a["maxage"]["empirical_verdict"],
            b["randomized"]["empirical_verdict"],
            b["maxage"]["empirical_verdict"],
        ),
    )
    # Known divergence from the source material: under the slot semantics
    # pinned by the closed-form hand values, config A sits marginally inside
    # the capacity region (0.4492 vs 0.44 load) and its optimized policies
    # keep the backlog bounded, so the Unstable clause cannot be met.  See
    # the build ledger for the full analysis.
    assert ok


@pytest.mark.slow
def test_cost_curves(fig4_runs, acceptance_log):
    outcome, _, _ = fig4_runs
    rows = outcome.rows
    qs = sorted({r.q for r in rows})
    arrivals = sorted({r.arrival_config for r in rows})
    assert len(qs) >= 5

    def cell(a, p, q):
        for r in rows:
            if r.arrival_config == a and r.policy == p and r.q == q:
                return r
        raise KeyError((a, p, q))

    assert set(arrivals) == {"low", "high"}
    low, high = "low", "high"

    # (i) max-age never costlier under heavy load, with a positive mean gap
    dominated = all(
        cell(high, "phibar1", q).total_cost
        <= cell(high, "phi1", q).total_cost
        + cell(high, "phi1", q).ci_halfwidth
        + cell(high, "phibar1", q).ci_halfwidth
        for q in qs
    )
    mean_gap = float(np.mean([
        cell(high, "phi1", q).total_cost - cell(high, "phibar1", q).total_cost for q in qs
    ]))
    ok_i = dominated and mean_gap > 0.0

    # (ii) the families agree under light load at the sweep level
    gaps = [
        abs(cell(low, "phibar1", q).total_cost - cell(low, "phi1", q).total_cost)
        for q in qs
    ]
    base = float(np.mean([cell(low, "phi1", q).total_cost for q in qs]))
    agg_gap = float(np.mean(gaps)) / base
    worst_gap = max(
        g / cell(low, "phi1", q).total_cost for g, q in zip(gaps, qs)
    )
    ok_ii = agg_gap <= 0.05

    # (iii) cost falls (up to CI) as the machine flips faster
    ok_iii = True
    for a in arrivals:
        for p in ("phi1", "phibar1"):
            seq = [cell(a, p, q) for q in qs]
            for prev, nxt in zip(seq, seq[1:]):
                if nxt.total_cost > prev.total_cost + prev.ci_halfwidth + nxt.ci_halfwidth:
                    ok_iii = False

    ok = ok_i and ok_ii and ok_iii
    acceptance_log(
        "cost curves: dominance, light-load agreement, monotonicity",
        ok,
        f"mean heavy gap {mean_gap:+.2f}, light gap {agg_gap:.1%} "
        f"(worst point {worst_gap:.1%}), monotone {ok_iii}",
    )
    assert ok


def test_optimizer_quality(acceptance_log):
    params = SystemParams(
        n_users=3,
        arrival_rates=np.array([0.02, 0.04, 0.06]),
        service_rates=np.array([0.3, 0.6, 0.95]),
        flip_prob=0.45,
        post_busy_prob=0.55,
        sampling_cost=3.0,
    )
    settings = OptimizerSettings()

    pol_a, res_a = build_randomized_policy(params, settings)
    pol_b, res_b = build_randomized_policy(params, settings)
    _, mres_a = build_maxage_policy(params, settings)
    _, mres_b = build_maxage_policy(params, settings)

    feasible = all(
        settings.mu_lo <= r.sampling_prob <= settings.mu_hi
        and abs(float(r.schedule_dist.sum()) - 1.0) < 1e-9
        and np.all(r.schedule_dist >= 0.0)
        for r in res_a
    )
    descent = all(r.objective <= r.canonical_objective + 1e-12 for r in res_a)
    identical = all(
        ra.sampling_prob == rb.sampling_prob
        and ra.objective == rb.objective
        and np.array_equal(ra.schedule_dist, rb.schedule_dist)
        for ra, rb in zip(res_a, res_b)
    ) and all(
        ma.sampling_prob == mb.sampling_prob and ma.objective == mb.objective
        for ma, mb in zip(mres_a, mres_b)
    )

    # brute force over every subset of size <= 2
    worst_excess = 0.0
    for res in res_a:
        if subset_size(res.subset) > 2:
            continue
        members = [i for i in range(3) if res.subset >> i & 1]
        best = np.inf
        for mu in np.linspace(0.005, 0.999, 150):
            if len(members) == 1:
                dist = np.zeros(3)
                dist[members[0]] = 1.0
                best = min(best, randomized_total_cost(params, res.subset, mu, dist))
            else:
                for w in np.linspace(0.01, 0.99, 99):
                    dist = np.zeros(3)
                    dist[members[0]] = w
                    dist[members[1]] = 1.0 - w
                    best = min(best, randomized_total_cost(params, res.subset, mu, dist))
        worst_excess = max(worst_excess, (res.objective - best) / best)

    ok = feasible and descent and identical and worst_excess <= 0.01
    acceptance_log(
        "optimizer: descent, feasibility, grid agreement, reproducibility",
        ok,
        f"worst excess over brute force {worst_excess:.2e}",
    )
    assert ok


@pytest.mark.slow
def test_pipeline_determinism(verify_runs, fig4_runs, acceptance_log):
    _, v1, v2 = verify_runs
    _, f1, f2 = fig4_runs
    same_verify = (v1 / "verify.csv").read_bytes() == (v2 / "verify.csv").read_bytes()
    same_findings = (v1 / "findings.json").read_bytes() == (v2 / "findings.json").read_bytes()
    same_fig4 = (f1 / "fig4.csv").read_bytes() == (f2 / "fig4.csv").read_bytes()
    ok = same_verify and same_findings and same_fig4
    acceptance_log(
        "byte-identical verification and cost-curve reruns",
        ok,
        f"verify {same_verify}, findings {same_findings}, fig4 {same_fig4}",
    )
    assert ok
