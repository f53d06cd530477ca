"""Run configuration loaded from ``config/market_session.json``"""

import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Dict, Optional, Tuple, Union

import structlog

from pyhedonic.core.model import GaConfig, WeightScheme, kwh_to_wh, wh_to_kwh
from pyhedonic.errors import ConfigError, InvalidSpec
from pyhedonic.sim.generator import (
    ENEMY_DOMINANT,
    FRIENDSHIP_DOMINANT,
    NEUTRAL_DOMINANT,
    ScenarioSpec,
    community_spec,
    village_spec,
)

logger = structlog.get_logger(__name__)

DEFAULT_CONFIG_PATH = "config/market_session.json"
PROFILE_SETS = ("village14", "community")


@dataclass(frozen=True)
class ExperimentConfig:
    replications: int = 30
    gammas_kwh: Tuple[float, ...] = (15.0, 10.0, 6.0)
    mixes: Tuple[Tuple[float, float, float], ...] = (FRIENDSHIP_DOMINANT, NEUTRAL_DOMINANT, ENEMY_DOMINANT)
    hours: Tuple[int, ...] = (10, 11, 12)
    workers: int = 1

    def __post_init__(self):
        if self.replications < 1:
            raise ConfigError("experiments.replications must be >= 1")
        if self.workers < 1:
            raise ConfigError("experiments.workers must be >= 1")


@dataclass(frozen=True)
class SimConfig:
    ga: GaConfig = field(default_factory=GaConfig)
    profile_set: str = "village14"
    n_buyers: int = 24
    n_sellers: int = 24
    relation_mix: Tuple[float, float, float] = (1 / 3, 1 / 3, 1 / 3)
    price_range: Tuple[int, int] = (1, 20)
    delta_range: Tuple[int, int] = (0, 2)
    hours: Tuple[int, ...] = tuple(range(24))
    experiments: ExperimentConfig = field(default_factory=ExperimentConfig)
    delivery_noise: float = 0.0
    out_dir: str = "data/runs"
    log_level: str = "info"

    def __post_init__(self):
        if self.profile_set not in PROFILE_SETS:
            raise ConfigError(f"profile_set must be one of {PROFILE_SETS}, got {self.profile_set!r}")
        if not 0.0 <= self.delivery_noise <= 1.0:
            raise ConfigError("delivery_noise must be within [0, 1]")

    def scenario_spec(self, seed: int = 0) -> ScenarioSpec:
        common = dict(
            relation_mix=self.relation_mix,
            price_range=self.price_range,
            delta_range=self.delta_range,
            hours=self.hours,
        )
        if self.profile_set == "village14":
            return village_spec(seed, **common)
        return community_spec(self.n_buyers, self.n_sellers, seed, **common)


def _ga_to_dict(ga: GaConfig) -> Dict[str, Any]:
    return {
        "gamma_kwh": wh_to_kwh(ga.gamma_wh),
        "pop_size": ga.pop_size,
        "iterations": ga.iterations,
        "tournament_k": ga.tournament_k,
        "m": ga.m,
        "weight_scheme": ga.weight_scheme.value,
        "lambda_dup": ga.lambda_dup,
        "lambda_miss": ga.lambda_miss,
        "seed": ga.seed,
    }


def _ga_from_dict(doc: Dict[str, Any]) -> GaConfig:
    doc = dict(doc)
    if "gamma_kwh" in doc:
        doc["gamma_wh"] = kwh_to_wh(doc.pop("gamma_kwh"))
    if "weight_scheme" in doc:
        doc["weight_scheme"] = WeightScheme(doc["weight_scheme"])
    return GaConfig(**doc)


def config_to_dict(cfg: SimConfig) -> Dict[str, Any]:
    return {
        "ga": _ga_to_dict(cfg.ga),
        "scenario": {
            "profile_set": cfg.profile_set,
            "n_buyers": cfg.n_buyers,
            "n_sellers": cfg.n_sellers,
            "relation_mix": list(cfg.relation_mix),
            "price_range": list(cfg.price_range),
            "delta_range": list(cfg.delta_range),
            "hours": list(cfg.hours),
        },
        "experiments": {
            "replications": cfg.experiments.replications,
            "gammas_kwh": list(cfg.experiments.gammas_kwh),
            "mixes": [list(m) for m in cfg.experiments.mixes],
            "hours": list(cfg.experiments.hours),
            "workers": cfg.experiments.workers,
        },
        "delivery_noise": cfg.delivery_noise,
        "out_dir": cfg.out_dir,
        "log_level": cfg.log_level,
    }


def config_from_dict(doc: Dict[str, Any]) -> SimConfig:
    try:
        scenario = dict(doc.get("scenario", {}))
        for key in ("relation_mix", "price_range", "delta_range", "hours"):
            if key in scenario:
                scenario[key] = tuple(scenario[key])
        experiments = dict(doc.get("experiments", {}))
        for key in ("gammas_kwh", "hours"):
            if key in experiments:
                experiments[key] = tuple(experiments[key])
        if "mixes" in experiments:
            experiments["mixes"] = tuple(tuple(m) for m in experiments["mixes"])
        cfg = SimConfig(
            ga=_ga_from_dict(doc.get("ga", {})),
            experiments=ExperimentConfig(**experiments),
            delivery_noise=float(doc.get("delivery_noise", 0.0)),
            out_dir=str(doc.get("out_dir", "data/runs")),
            log_level=str(doc.get("log_level", "info")),
            **scenario,
        )
        # surface scenario problems at load time
        cfg.scenario_spec()
    except (TypeError, ValueError, InvalidSpec) as e:
        raise ConfigError(f"invalid configuration: {e}") from e
    return cfg


def load_config(config_path: Optional[Union[str, Path]] = None) -> SimConfig:
    """Load the run configuration, writing the defaults if the file is missing"""
    config_file = Path(config_path or DEFAULT_CONFIG_PATH)

    if config_file.exists():
        try:
            with open(config_file, "r", encoding="utf-8") as f:
                doc = json.load(f)
        except (OSError, json.JSONDecodeError) as e:
            raise ConfigError(f"cannot read config {config_file}: {e}") from e
        logger.debug("config_loaded", path=str(config_file))
        return config_from_dict(doc)

    cfg = SimConfig()
    config_file.parent.mkdir(parents=True, exist_ok=True)
    with open(config_file, "w", encoding="utf-8") as f:
        json.dump(config_to_dict(cfg), f, indent=2)
        f.write("\n")
    print(f"📋 Created default config at {config_file}")
    return cfg


def with_overrides(cfg: SimConfig, **ga_overrides) -> SimConfig:
    """Replace GaConfig fields, ignoring overrides left at ``None``"""
    changes = {k: v for k, v in ga_overrides.items() if v is not None}
    if not changes:
        return cfg
    try:
        return replace(cfg, ga=replace(cfg.ga, **changes))
    except ValueError as e:
        raise ConfigError(str(e)) from e
