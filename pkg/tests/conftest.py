"""Shared fixtures plus the acceptance-criteria summary hook.

Acceptance tests record one entry per criterion; after the run a summary
section prints one PASS/FAIL line for each so the gate can be read at a
glance without scrolling through the pytest output.
"""

from __future__ import annotations

import numpy as np
import pytest

from aojc.model import SystemParams, uniform_policy

# name -> (passed, detail); insertion order is the print order
ACCEPTANCE_RESULTS: dict[str, tuple[bool, str]] = {}


def record_criterion(name: str, passed: bool, detail: str = "") -> None:
    ACCEPTANCE_RESULTS[name] = (bool(passed), detail)


@pytest.fixture
def acceptance_log():
    return record_criterion


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name, (ok, detail) in ACCEPTANCE_RESULTS.items():
        line = f"{'PASS' if ok else 'FAIL'}  {name}"
        if detail:
            line = f"{line}  [{detail}]"
        terminalreporter.write_line(line)


@pytest.fixture
def two_user_params() -> SystemParams:
    return SystemParams(
        n_users=2,
        arrival_rates=np.array([0.05, 0.10]),
        service_rates=np.array([0.5, 0.9]),
        flip_prob=0.5,
        post_busy_prob=0.5,
        sampling_cost=1.0,
    )


@pytest.fixture
def four_user_params() -> SystemParams:
    return SystemParams(
        n_users=4,
        arrival_rates=np.array([0.01, 0.02, 0.05, 0.06]),
        service_rates=np.array([0.1, 0.4, 0.6, 0.9]),
        flip_prob=0.5,
        post_busy_prob=0.5,
        sampling_cost=5.0,
    )


@pytest.fixture
def two_user_policy():
    return uniform_policy(2, sampling_prob=0.9)
