"""Experiment configuration: one YAML file, strictly validated.

A config is a plain nested mapping; every section and key is checked against
the schema below and unknown keys are hard errors, so typos fail fast instead
of silently running defaults.  Only `system` is required; commands read the
sections they need.

    name: paper-setup            # optional, defaults to the file stem
    master_seed: 20260814        # optional, overridden by --seed / env
    system:
      n_users: 4
      arrival_rates: [0.01, 0.02, 0.05, 0.06]
      service_rates: [0.1, 0.4, 0.6, 0.9]
      flip_prob: 0.5
      post_busy_prob: 0.5
      sampling_cost: 5.0
    policy:
      kind: randomized           # randomized | maxage
      source: optimize           # optimize | uniform | file
      sampling_prob: 1.0         # used by source: uniform
      path: policy.json          # used by source: file
    optimizer:
      restarts: 16
      seed: 2026
      mu_lo: 0.001
      mu_hi: 0.999
      pi_floor: 0.0001
      grid_points: 200
    sim:
      horizon: 500000
      seeds: [1, 2, 3]
      mode: open                 # open | saturated
      subset: [1, 2]             # 1-based users, saturated mode only
      burn_in_frac: 0.1
      trace_stride: 0            # 0 = automatic
    evaluate:
      family: randomized         # randomized | maxage
      subset: [1, 2]
      sampling_prob: 0.7
      schedule_dist: [0.3, 0.7, 0, 0]
      count_mode: subset_size    # subset_size | total_users
    verify:
      horizon: 1000000
      seeds: [101, 102, 103]
      tolerance: 0.02
      cases: []                  # optional; empty/absent = built-in battery
    fig4:
      flip_probs: [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9]
      arrival_configs:
        low: [0.01, 0.02, 0.05, 0.06]
        high: [0.05, 0.2, 0.5, 0.6]
      horizon: 500000
      seeds: [1, 2, 3, 4, 5]
    stability:
      epsilon: 0.01
      horizon: 200000
      seeds: [7, 8, 9]
      sweep_cases: 0
      cases:
        caseA:
          arrival_rates: [0.09, 0.09, 0.12, 0.14]
          service_rates: [0.55, 0.73, 0.84, 0.91]
          flip_prob: 0.35
          post_busy_prob: 0.3
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Optional

import numpy as np
import yaml

from .analytics import UserCountMode
from .model import ParamError, SchedulerKind, SystemParams, subset_mask, validate_params
from .optimizer import OptimizerSettings

__all__ = [
    "ConfigError",
    "PolicyConfig",
    "SimConfig",
    "EvaluateConfig",
    "VerifyCaseConfig",
    "VerifyConfig",
    "Fig4Config",
    "StabilityCaseConfig",
    "StabilityConfig",
    "ExperimentConfig",
    "load_config",
]

DEFAULT_MASTER_SEED = 12345


class ConfigError(ValueError):
    """Configuration file is malformed; messages name the offending key."""


def _section(raw: Mapping, name: str, allowed: set) -> dict:
    value = raw.get(name)
    if value is None:
        return {}
    if not isinstance(value, dict):
        raise ConfigError(f"section '{name}' must be a mapping")
    unknown = set(value) - allowed
    if unknown:
        raise ConfigError(f"unknown keys in section '{name}': {sorted(unknown)}")
    return value


def _pick(section: dict, key: str, default, where: str):
    value = section.get(key, default)
    if value is None and default is not None:
        return default
    return value


def _int(value, key: str, lo: Optional[int] = None) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"'{key}' must be an integer, got {value!r}")
    if lo is not None and value < lo:
        raise ConfigError(f"'{key}' must be >= {lo}, got {value}")
    return value


def _float(value, key: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"'{key}' must be a number, got {value!r}")
    return float(value)


def _seed_list(value, key: str) -> list[int]:
    if not isinstance(value, list) or not value:
        raise ConfigError(f"'{key}' must be a non-empty list of integers")
    seeds = [_int(v, key, lo=0) for v in value]
    if len(set(seeds)) != len(seeds):
        raise ConfigError(f"'{key}' must not repeat seeds")
    return seeds


def _user_list(value, key: str, n_users: int) -> int:
    """1-based user list -> subset mask."""
    if not isinstance(value, list) or not value:
        raise ConfigError(f"'{key}' must be a non-empty list of 1-based user ids")
    users = []
    for v in value:
        u = _int(v, key, lo=1)
        if u > n_users:
            raise ConfigError(f"'{key}' mentions user {u} but the system has {n_users}")
        users.append(u - 1)
    if len(set(users)) != len(users):
        raise ConfigError(f"'{key}' must not repeat users")
    return subset_mask(users)


@dataclass(frozen=True)
class PolicyConfig:
    kind: SchedulerKind = SchedulerKind.RANDOMIZED
    source: str = "optimize"          # optimize | uniform | file
    sampling_prob: float = 1.0
    path: Optional[Path] = None


@dataclass(frozen=True)
class SimConfig:
    horizon: int = 500_000
    seeds: tuple[int, ...] = (1, 2, 3)
    saturated: bool = False
    subset: Optional[int] = None
    burn_in_frac: float = 0.1
    trace_stride: int = 0             # 0 = automatic


@dataclass(frozen=True)
class EvaluateConfig:
    family: SchedulerKind
    subset: int
    sampling_prob: float
    schedule_dist: Optional[tuple[float, ...]] = None
    count_mode: UserCountMode = UserCountMode.SUBSET_SIZE


@dataclass(frozen=True)
class VerifyCaseConfig:
    """One self-contained saturated verification case; system fields default
    to the config's system block."""

    case_id: str
    family: SchedulerKind
    subset: int
    sampling_prob: float
    params: SystemParams
    schedule_dist: Optional[tuple[float, ...]] = None


@dataclass(frozen=True)
class VerifyConfig:
    horizon: int = 1_000_000
    seeds: tuple[int, ...] = (101, 102, 103)
    tolerance: float = 0.02
    cases: tuple[VerifyCaseConfig, ...] = ()


@dataclass(frozen=True)
class Fig4Config:
    flip_probs: tuple[float, ...]
    arrival_configs: tuple[tuple[str, tuple[float, ...]], ...]
    horizon: int = 500_000
    seeds: tuple[int, ...] = (1, 2, 3, 4, 5)


@dataclass(frozen=True)
class StabilityCaseConfig:
    case_id: str
    params: SystemParams


@dataclass(frozen=True)
class StabilityConfig:
    epsilon: float = 0.01
    horizon: int = 200_000
    seeds: tuple[int, ...] = (7, 8, 9)
    sweep_cases: int = 0
    cases: tuple[StabilityCaseConfig, ...] = ()


@dataclass(frozen=True)
class ExperimentConfig:
    name: str
    master_seed: int
    config_hash: str
    system: SystemParams
    policy: PolicyConfig
    optimizer: OptimizerSettings
    sim: SimConfig
    evaluate: Optional[EvaluateConfig] = None
    verify: VerifyConfig = field(default_factory=VerifyConfig)
    fig4: Optional[Fig4Config] = None
    stability: StabilityConfig = field(default_factory=StabilityConfig)


_TOP_KEYS = {
    "name", "master_seed", "system", "policy", "optimizer", "sim",
    "evaluate", "verify", "fig4", "stability",
}
_SYSTEM_KEYS = {
    "n_users", "arrival_rates", "service_rates", "flip_prob",
    "post_busy_prob", "sampling_cost",
}
_POLICY_KEYS = {"kind", "source", "sampling_prob", "path"}
_OPT_KEYS = {
    "restarts", "seed", "mu_lo", "mu_hi", "pi_floor", "xatol", "fatol",
    "max_iter", "grid_points", "golden_tol",
}
_SIM_KEYS = {"horizon", "seeds", "mode", "subset", "burn_in_frac", "trace_stride"}
_EVAL_KEYS = {"family", "subset", "sampling_prob", "schedule_dist", "count_mode"}
_VERIFY_KEYS = {"horizon", "seeds", "tolerance", "cases"}
_VERIFY_CASE_KEYS = {
    "id", "family", "subset", "sampling_prob", "schedule_dist",
    "service_rates", "flip_prob", "post_busy_prob", "sampling_cost", "n_users",
}
_FIG4_KEYS = {"flip_probs", "arrival_configs", "horizon", "seeds"}
_STAB_KEYS = {"epsilon", "horizon", "seeds", "sweep_cases", "cases"}
_STAB_CASE_KEYS = {
    "arrival_rates", "service_rates", "flip_prob", "post_busy_prob", "sampling_cost",
}


def _scheduler(value, key: str) -> SchedulerKind:
    try:
        return SchedulerKind(value)
    except ValueError:
        raise ConfigError(
            f"'{key}' must be one of {[k.value for k in SchedulerKind]}, got {value!r}"
        ) from None


def _count_mode(value, key: str) -> UserCountMode:
    try:
        return UserCountMode(value)
    except ValueError:
        raise ConfigError(
            f"'{key}' must be one of {[m.value for m in UserCountMode]}, got {value!r}"
        ) from None


def _system_override(base: SystemParams, section: dict, where: str) -> SystemParams:
    """Derive a SystemParams from `base` with per-case overrides."""
    fields = {
        "n_users": base.n_users,
        "arrival_rates": np.asarray(base.arrival_rates),
        "service_rates": np.asarray(base.service_rates),
        "flip_prob": base.flip_prob,
        "post_busy_prob": base.post_busy_prob,
        "sampling_cost": base.sampling_cost,
    }
    for key in ("n_users", "arrival_rates", "service_rates", "flip_prob", "post_busy_prob", "sampling_cost"):
        if key in section:
            fields[key] = section[key]
    if "n_users" in section and "arrival_rates" not in section:
        # resized systems need fresh rate vectors of matching length
        n = _int(section["n_users"], f"{where}.n_users", lo=1)
        if len(fields["arrival_rates"]) != n:
            fields["arrival_rates"] = np.full(n, 0.01)
    try:
        return SystemParams(**fields)
    except ParamError as e:
        raise ConfigError(f"{where}: {e}") from None


def load_config(path) -> ExperimentConfig:
    """Parse and validate one YAML experiment config."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    text = path.read_text()
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as e:
        raise ConfigError(f"{path}: not valid YAML: {e}") from None
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    unknown = set(raw) - _TOP_KEYS
    if unknown:
        raise ConfigError(f"unknown top-level keys: {sorted(unknown)}")
    if "system" not in raw:
        raise ConfigError("section 'system' is required")

    sys_section = _section(raw, "system", _SYSTEM_KEYS)
    try:
        system = validate_params(sys_section)
    except ParamError as e:
        raise ConfigError(f"system: {e}") from None

    name = raw.get("name", path.stem)
    if not isinstance(name, str) or not name:
        raise ConfigError("'name' must be a non-empty string")
    master_seed = _int(raw.get("master_seed", DEFAULT_MASTER_SEED), "master_seed", lo=0)

    pol = _section(raw, "policy", _POLICY_KEYS)
    source = _pick(pol, "source", "optimize", "policy")
    if source not in ("optimize", "uniform", "file"):
        raise ConfigError(f"policy.source must be optimize|uniform|file, got {source!r}")
    pol_path = pol.get("path")
    if source == "file":
        if not pol_path:
            raise ConfigError("policy.source=file requires policy.path")
        pol_path = (path.parent / pol_path).resolve()
        if not pol_path.exists():
            raise ConfigError(f"policy.path does not exist: {pol_path}")
    elif pol_path is not None:
        raise ConfigError("policy.path is only valid with policy.source=file")
    sampling_prob = _float(_pick(pol, "sampling_prob", 1.0, "policy"), "policy.sampling_prob")
    if not (0.0 < sampling_prob <= 1.0):
        raise ConfigError("policy.sampling_prob must lie in (0, 1]")
    policy = PolicyConfig(
        kind=_scheduler(_pick(pol, "kind", "randomized", "policy"), "policy.kind"),
        source=source,
        sampling_prob=sampling_prob,
        path=Path(pol_path) if pol_path else None,
    )

    opt = _section(raw, "optimizer", _OPT_KEYS)
    try:
        optimizer = OptimizerSettings(
            restarts=_int(opt.get("restarts", 16), "optimizer.restarts", lo=0),
            seed=_int(opt.get("seed", 2026), "optimizer.seed", lo=0),
            mu_lo=_float(opt.get("mu_lo", 1e-3), "optimizer.mu_lo"),
            mu_hi=_float(opt.get("mu_hi", 1.0 - 1e-3), "optimizer.mu_hi"),
            pi_floor=_float(opt.get("pi_floor", 1e-4), "optimizer.pi_floor"),
            xatol=_float(opt.get("xatol", 1e-8), "optimizer.xatol"),
            fatol=_float(opt.get("fatol", 1e-8), "optimizer.fatol"),
            max_iter=_int(opt.get("max_iter", 5000), "optimizer.max_iter", lo=1),
            grid_points=_int(opt.get("grid_points", 200), "optimizer.grid_points", lo=3),
            golden_tol=_float(opt.get("golden_tol", 1e-8), "optimizer.golden_tol"),
        )
    except ValueError as e:
        raise ConfigError(f"optimizer: {e}") from None

    sim_sec = _section(raw, "sim", _SIM_KEYS)
    mode = _pick(sim_sec, "mode", "open", "sim")
    if mode not in ("open", "saturated"):
        raise ConfigError(f"sim.mode must be open|saturated, got {mode!r}")
    subset = None
    if mode == "saturated":
        if "subset" not in sim_sec:
            raise ConfigError("sim.mode=saturated requires sim.subset")
        subset = _user_list(sim_sec["subset"], "sim.subset", system.n_users)
    elif "subset" in sim_sec:
        raise ConfigError("sim.subset is only valid with sim.mode=saturated")
    burn_in_frac = _float(_pick(sim_sec, "burn_in_frac", 0.1, "sim"), "sim.burn_in_frac")
    if not (0.0 <= burn_in_frac < 1.0):
        raise ConfigError("sim.burn_in_frac must lie in [0, 1)")
    sim = SimConfig(
        horizon=_int(sim_sec.get("horizon", 500_000), "sim.horizon", lo=1),
        seeds=tuple(_seed_list(sim_sec.get("seeds", [1, 2, 3]), "sim.seeds")),
        saturated=(mode == "saturated"),
        subset=subset,
        burn_in_frac=burn_in_frac,
        trace_stride=_int(sim_sec.get("trace_stride", 0), "sim.trace_stride", lo=0),
    )

    evaluate = None
    if "evaluate" in raw:
        ev = _section(raw, "evaluate", _EVAL_KEYS)
        for req in ("family", "subset", "sampling_prob"):
            if req not in ev:
                raise ConfigError(f"evaluate.{req} is required")
        family = _scheduler(ev["family"], "evaluate.family")
        dist = ev.get("schedule_dist")
        if family is SchedulerKind.RANDOMIZED:
            if dist is None:
                raise ConfigError("evaluate.schedule_dist is required for the randomized family")
            if not isinstance(dist, list) or len(dist) != system.n_users:
                raise ConfigError(f"evaluate.schedule_dist must be a list of length {system.n_users}")
            dist = tuple(_float(x, "evaluate.schedule_dist") for x in dist)
        elif dist is not None:
            raise ConfigError("evaluate.schedule_dist is only valid for the randomized family")
        evaluate = EvaluateConfig(
            family=family,
            subset=_user_list(ev["subset"], "evaluate.subset", system.n_users),
            sampling_prob=_float(ev["sampling_prob"], "evaluate.sampling_prob"),
            schedule_dist=dist,
            count_mode=_count_mode(ev.get("count_mode", "subset_size"), "evaluate.count_mode"),
        )

    ver = _section(raw, "verify", _VERIFY_KEYS)
    cases: list[VerifyCaseConfig] = []
    for i, entry in enumerate(ver.get("cases") or []):
        if not isinstance(entry, dict):
            raise ConfigError(f"verify.cases[{i}] must be a mapping")
        unknown = set(entry) - _VERIFY_CASE_KEYS
        if unknown:
            raise ConfigError(f"unknown keys in verify.cases[{i}]: {sorted(unknown)}")
        for req in ("family", "subset", "sampling_prob"):
            if req not in entry:
                raise ConfigError(f"verify.cases[{i}].{req} is required")
        family = _scheduler(entry["family"], f"verify.cases[{i}].family")
        overrides = {k: entry[k] for k in _STAB_CASE_KEYS | {"n_users"} if k in entry}
        params = _system_override(system, overrides, f"verify.cases[{i}]")
        mask = _user_list(entry["subset"], f"verify.cases[{i}].subset", params.n_users)
        dist = entry.get("schedule_dist")
        if family is SchedulerKind.RANDOMIZED:
            if dist is None:
                raise ConfigError(f"verify.cases[{i}].schedule_dist is required for the randomized family")
            dist = tuple(_float(x, f"verify.cases[{i}].schedule_dist") for x in dist)
        elif dist is not None:
            raise ConfigError(f"verify.cases[{i}].schedule_dist is only valid for the randomized family")
        cases.append(
            VerifyCaseConfig(
                case_id=str(entry.get("id", f"case{i:02d}")),
                family=family,
                subset=mask,
                sampling_prob=_float(entry["sampling_prob"], f"verify.cases[{i}].sampling_prob"),
                params=params,
                schedule_dist=dist,
            )
        )
    tolerance = _float(_pick(ver, "tolerance", 0.02, "verify"), "verify.tolerance")
    if not (0.0 < tolerance < 1.0):
        raise ConfigError("verify.tolerance must lie in (0, 1)")
    verify = VerifyConfig(
        horizon=_int(ver.get("horizon", 1_000_000), "verify.horizon", lo=1000),
        seeds=tuple(_seed_list(ver.get("seeds", [101, 102, 103]), "verify.seeds")),
        tolerance=tolerance,
        cases=tuple(cases),
    )

    fig4 = None
    if "fig4" in raw:
        f4 = _section(raw, "fig4", _FIG4_KEYS)
        for req in ("flip_probs", "arrival_configs"):
            if req not in f4:
                raise ConfigError(f"fig4.{req} is required")
        flips = f4["flip_probs"]
        if not isinstance(flips, list) or not flips:
            raise ConfigError("fig4.flip_probs must be a non-empty list")
        flip_probs = tuple(_float(x, "fig4.flip_probs") for x in flips)
        if any(not (0.0 < x < 1.0) for x in flip_probs):
            raise ConfigError("fig4.flip_probs must lie strictly between 0 and 1")
        if len(set(flip_probs)) != len(flip_probs):
            raise ConfigError("fig4.flip_probs must not repeat values")
        arr = f4["arrival_configs"]
        if not isinstance(arr, dict) or not arr:
            raise ConfigError("fig4.arrival_configs must be a non-empty mapping")
        arrival_configs = []
        for cfg_name in sorted(arr):
            rates = arr[cfg_name]
            if not isinstance(rates, list) or len(rates) != system.n_users:
                raise ConfigError(
                    f"fig4.arrival_configs.{cfg_name} must be a list of length {system.n_users}"
                )
            vec = tuple(_float(x, f"fig4.arrival_configs.{cfg_name}") for x in rates)
            try:
                system.replace(arrival_rates=np.asarray(vec))
            except ParamError as e:
                raise ConfigError(f"fig4.arrival_configs.{cfg_name}: {e}") from None
            arrival_configs.append((str(cfg_name), vec))
        fig4 = Fig4Config(
            flip_probs=flip_probs,
            arrival_configs=tuple(arrival_configs),
            horizon=_int(f4.get("horizon", 500_000), "fig4.horizon", lo=1000),
            seeds=tuple(_seed_list(f4.get("seeds", [1, 2, 3, 4, 5]), "fig4.seeds")),
        )

    stab = _section(raw, "stability", _STAB_KEYS)
    stab_cases: list[StabilityCaseConfig] = []
    case_map = stab.get("cases") or {}
    if not isinstance(case_map, dict):
        raise ConfigError("stability.cases must be a mapping of case name to overrides")
    for case_name in sorted(case_map):
        entry = case_map[case_name]
        if not isinstance(entry, dict):
            raise ConfigError(f"stability.cases.{case_name} must be a mapping")
        unknown = set(entry) - _STAB_CASE_KEYS
        if unknown:
            raise ConfigError(f"unknown keys in stability.cases.{case_name}: {sorted(unknown)}")
        stab_cases.append(
            StabilityCaseConfig(
                case_id=str(case_name),
                params=_system_override(system, entry, f"stability.cases.{case_name}"),
            )
        )
    epsilon = _float(_pick(stab, "epsilon", 0.01, "stability"), "stability.epsilon")
    if epsilon <= 0.0:
        raise ConfigError("stability.epsilon must be positive")
    stability = StabilityConfig(
        epsilon=epsilon,
        horizon=_int(stab.get("horizon", 200_000), "stability.horizon", lo=1000),
        seeds=tuple(_seed_list(stab.get("seeds", [7, 8, 9]), "stability.seeds")),
        sweep_cases=_int(stab.get("sweep_cases", 0), "stability.sweep_cases", lo=0),
        cases=tuple(stab_cases),
    )

    return ExperimentConfig(
        name=name,
        master_seed=master_seed,
        config_hash=hashlib.sha256(text.encode()).hexdigest()[:16],
        system=system,
        policy=policy,
        optimizer=optimizer,
        sim=sim,
        evaluate=evaluate,
        verify=verify,
        fig4=fig4,
        stability=stability,
    )
