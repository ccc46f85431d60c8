"""Strict YAML config ingestion."""

import numpy as np
import pytest

from aojc.config import ConfigError, DEFAULT_MASTER_SEED, load_config

MINIMAL = """\
system:
  n_users: 2
  arrival_rates: [0.05, 0.1]
  service_rates: [0.5, 0.9]
  flip_prob: 0.5
  post_busy_prob: 0.5
  sampling_cost: 1.0
"""


def write(tmp_path, text, name="cfg.yaml"):
    path = tmp_path / name
    path.write_text(text)
    return path


def test_minimal_config(tmp_path):
    cfg = load_config(write(tmp_path, MINIMAL))
    assert cfg.name == "cfg"
    assert cfg.master_seed == DEFAULT_MASTER_SEED
    assert cfg.system.n_users == 2
    assert len(cfg.config_hash) == 16


def test_name_and_seed_override(tmp_path):
    cfg = load_config(write(tmp_path, "name: mine\nmaster_seed: 7\n" + MINIMAL))
    assert cfg.name == "mine"
    assert cfg.master_seed == 7


def test_config_hash_tracks_text(tmp_path):
    a = load_config(write(tmp_path, MINIMAL, "a.yaml"))
    b = load_config(write(tmp_path, MINIMAL + "\n# comment\n", "b.yaml"))
    assert a.config_hash != b.config_hash


def test_missing_system_rejected(tmp_path):
    with pytest.raises(ConfigError):
        load_config(write(tmp_path, "name: x\n"))


def test_unknown_top_level_key_rejected(tmp_path):
    with pytest.raises(ConfigError, match="unknown"):
        load_config(write(tmp_path, MINIMAL + "extra_section: {}\n"))


def test_unknown_nested_key_rejected(tmp_path):
    text = MINIMAL + "sim:\n  horizon: 1000\n  seeds: [1]\n  typo_key: 3\n"
    with pytest.raises(ConfigError, match="typo_key"):
        load_config(write(tmp_path, text))


def test_sim_section_defaults(tmp_path):
    cfg = load_config(write(tmp_path, MINIMAL + "sim:\n  horizon: 5000\n  seeds: [1, 2]\n"))
    assert cfg.sim.horizon == 5000
    assert cfg.sim.seeds == (1, 2)
    assert cfg.sim.saturated is False


def test_saturated_subset_is_one_based(tmp_path):
    text = MINIMAL + "sim:\n  horizon: 5000\n  seeds: [1]\n  mode: saturated\n  subset: [1, 2]\n"
    cfg = load_config(write(tmp_path, text))
    assert cfg.sim.saturated is True
    assert cfg.sim.subset == 0b11


def test_subset_out_of_range_rejected(tmp_path):
    text = MINIMAL + "evaluate:\n  family: randomized\n  subset: [3]\n  sampling_prob: 0.5\n"
    with pytest.raises(ConfigError):
        load_config(write(tmp_path, text))


def test_policy_section(tmp_path):
    text = MINIMAL + "policy:\n  kind: maxage\n  source: uniform\n  sampling_prob: 0.7\n"
    cfg = load_config(write(tmp_path, text))
    assert cfg.policy.kind.value == "maxage"
    assert cfg.policy.sampling_prob == 0.7


def test_bad_policy_source_rejected(tmp_path):
    text = MINIMAL + "policy:\n  kind: maxage\n  source: telepathy\n"
    with pytest.raises(ConfigError):
        load_config(write(tmp_path, text))


def test_verify_defaults_and_tolerance_bounds(tmp_path):
    cfg = load_config(write(tmp_path, MINIMAL + "verify:\n  horizon: 2000\n"))
    assert cfg.verify.tolerance == 0.02
    assert cfg.verify.seeds == (101, 102, 103)
    assert cfg.verify.cases == ()

    with pytest.raises(ConfigError):
        load_config(write(tmp_path, MINIMAL + "verify:\n  tolerance: 1.5\n", "bad.yaml"))


def test_verify_custom_case(tmp_path):
    text = MINIMAL + (
        "verify:\n"
        "  horizon: 2000\n"
        "  cases:\n"
        "    - id: tiny\n"
        "      family: maxage\n"
        "      subset: [1]\n"
        "      sampling_prob: 1.0\n"
        "      service_rates: [1.0, 0.9]\n"
    )
    cfg = load_config(write(tmp_path, text))
    assert len(cfg.verify.cases) == 1
    case = cfg.verify.cases[0]
    assert case.case_id == "tiny"
    assert case.subset == 0b1
    assert case.params.service_rates[0] == 1.0


def test_fig4_arrival_configs_sorted(tmp_path):
    text = MINIMAL + (
        "fig4:\n"
        "  flip_probs: [0.2, 0.4]\n"
        "  arrival_configs:\n"
        "    zhigh: [0.2, 0.3]\n"
        "    alow: [0.01, 0.02]\n"
    )
    cfg = load_config(write(tmp_path, text))
    assert [name for name, _ in cfg.fig4.arrival_configs] == ["alow", "zhigh"]


def test_stability_cases(tmp_path):
    text = MINIMAL + (
        "stability:\n"
        "  epsilon: 0.02\n"
        "  cases:\n"
        "    hot:\n"
        "      arrival_rates: [0.3, 0.3]\n"
        "      flip_prob: 0.4\n"
    )
    cfg = load_config(write(tmp_path, text))
    assert cfg.stability.epsilon == 0.02
    case = cfg.stability.cases[0]
    assert case.case_id == "hot"
    assert case.params.arrival_rates[0] == 0.3
    assert case.params.flip_prob == 0.4
    # untouched keys inherit from the system section
    assert case.params.service_rates[1] == 0.9


def test_not_yaml_rejected(tmp_path):
    with pytest.raises(ConfigError):
        load_config(write(tmp_path, "::: not yaml {{{"))


def test_missing_file_rejected(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "absent.yaml")
