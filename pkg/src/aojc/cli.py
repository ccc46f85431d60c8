"""Command line interface.

Subcommands: evaluate, simulate, optimize, verify, fig4, stability.  All take
``--config PATH`` (YAML, see :mod:`aojc.config`), ``--out DIR``, and optional
``--seed U64`` / ``--workers K``.  The master seed is resolved in order:
``--seed`` flag, then the ``AOJC_MASTER_SEED`` environment variable, then the
config's ``master_seed``.  Exit codes: 0 success, 2 configuration error,
3 verification or runtime assertion failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import __version__
from .config import ConfigError, ExperimentConfig, load_config
from .experiments import (
    run_evaluate,
    run_fig4,
    run_optimize,
    run_simulate,
    run_stability,
    run_verify,
)
from .model import ParamError, PolicyError, subset_label

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_VERIFY = 3

ENV_SEED = "AOJC_MASTER_SEED"


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="aojc",
        description="Simulate, analyze and optimize age-of-job-completion scheduling.",
    )
    parser.add_argument("--version", action="version", version=f"aojc {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    commands = {
        "evaluate": "print and save the closed-form report for one saturated subsystem",
        "simulate": "run the simulator per configured seed and export metrics + traces",
        "optimize": "solve every subset's policy problem and save the table",
        "verify": "check every closed form against Monte Carlo",
        "fig4": "total cost of both policy families across a flip-probability grid",
        "stability": "condition checks plus empirical drift verdicts",
    }
    for name, help_text in commands.items():
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, type=Path, help="YAML experiment config")
        p.add_argument("--out", type=Path, default=Path("out"), help="output directory")
        p.add_argument("--seed", type=int, default=None, help="master seed override")
        p.add_argument("--workers", type=int, default=1, help="max concurrent sweep cells")
    return parser


def _resolve_seed(args, cfg: ExperimentConfig) -> int:
    if args.seed is not None:
        return int(args.seed)
    env = os.environ.get(ENV_SEED)
    if env:
        try:
            return int(env)
        except ValueError:
            raise ConfigError(f"{ENV_SEED} must be an integer, got {env!r}") from None
    return cfg.master_seed


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        seed = _resolve_seed(args, cfg)
        if args.workers < 1:
            raise ConfigError("--workers must be at least 1")
    except (ConfigError, ParamError, PolicyError) as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG

    out: Path = args.out
    try:
        if args.command == "evaluate":
            report = run_evaluate(cfg, out, seed)
            doc = {
                "scheduler": report.scheduler.value,
                "subset": subset_label(report.subset),
                "sampling_prob": report.sampling_prob,
                "count_mode": report.count_mode.value,
                "rows": [
                    {
                        "subset": r.subset,
                        "user": None if r.user is None else r.user + 1,
                        "thm": r.quantity,
                        "value": r.value,
                        "tag": r.tag,
                    }
                    for r in report.rows
                ],
                "auxiliaries": report.auxiliaries,
                "warnings": list(report.warnings),
            }
            print(json.dumps(doc, indent=2, sort_keys=True))
            print((out / "evaluate.csv").read_text(), end="")

        elif args.command == "simulate":
            metrics = run_simulate(cfg, out, seed, workers=args.workers)
            for m, s in zip(metrics, cfg.sim.seeds):
                print(
                    f"seed {s}: total_cost={m.total_cost:.6f} "
                    f"sampling_rate={m.sampling_rate:.6f} samples={m.samples}"
                )
            print(f"wrote {out / 'metrics.csv'} and {out / 'trace.csv'}")

        elif args.command == "optimize":
            _, results = run_optimize(cfg, out, seed)
            for r in sorted(results, key=lambda r: r.subset):
                print(
                    f"subset {subset_label(r.subset):<12} mu*={r.sampling_prob:.6f} "
                    f"objective={r.objective:.6f} converged={r.converged}"
                )
            print(f"wrote {out / 'optimize.csv'} and {out / 'policy.json'}")

        elif args.command == "verify":
            outcome = run_verify(cfg, out, seed, workers=args.workers)
            for row in outcome.rows:
                case_id, family, mask, user, quantity, closed, emp, rel, tol, status = row
                who = f"user {user}" if user is not None else "subset"
                rel_part = "" if rel is None else f" rel_err={rel:.4%}"
                print(
                    f"[{status:>4}] {case_id} {family} {subset_label(mask)} {who} "
                    f"{quantity}: closed={closed:.6f} empirical={emp:.6f}{rel_part}"
                )
            print(f"failures: {outcome.failures}")
            print(f"wrote {out / 'verify.csv'} and {out / 'findings.json'}")
            if outcome.failures > 0:
                return EXIT_VERIFY

        elif args.command == "fig4":
            outcome = run_fig4(cfg, out, seed, workers=args.workers)
            for r in outcome.rows:
                print(
                    f"q={r.q:.2f} {r.policy:<8} {r.arrival_config:<8} "
                    f"total_cost={r.total_cost:.4f} +-{r.ci_halfwidth:.4f}"
                )
            print(f"wrote {out / 'fig4.csv'}")

        elif args.command == "stability":
            outcome = run_stability(cfg, out, seed, workers=args.workers)
            for case_id, entry in sorted(outcome.summary.items()):
                if case_id == "sweep":
                    print(
                        f"sweep: {entry['cases']} cases, all_sound={entry['all_sound']}, "
                        f"satisfied randomized/maxage: "
                        f"{entry['satisfied_randomized']}/{entry['satisfied_maxage']}"
                    )
                    continue
                print(
                    f"{case_id}: randomized conditions="
                    f"{entry['randomized']['conditions_satisfied']} "
                    f"verdict={entry['randomized']['empirical_verdict']}; "
                    f"maxage conditions={entry['maxage']['conditions_satisfied']} "
                    f"verdict={entry['maxage']['empirical_verdict']}"
                )
            print(f"wrote {out / 'stability.csv'} and {out / 'stability_summary.json'}")

    except (ConfigError, ParamError, PolicyError) as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except ValueError as e:
        # missing/incompatible sections surface as ValueError from the pipelines
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except (RuntimeError, AssertionError) as e:
        print(f"verification failure: {e}", file=sys.stderr)
        return EXIT_VERIFY

    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
