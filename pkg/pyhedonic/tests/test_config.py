import json
from pathlib import Path

import pytest

from pyhedonic.config import (
    ExperimentConfig,
    SimConfig,
    config_from_dict,
    config_to_dict,
    load_config,
    with_overrides,
)
from pyhedonic.core.model import GaConfig, WeightScheme
from pyhedonic.errors import ConfigError
from pyhedonic.log import configure_logging

REPO_CONFIG = Path(__file__).parents[2] / "config" / "market_session.json"


def test_missing_config_writes_defaults(tmp_path, capsys):
    path = tmp_path / "config" / "session.json"
    cfg = load_config(path)
    assert cfg == SimConfig()
    assert json.loads(path.read_text()) == config_to_dict(SimConfig())
    assert "Created default config" in capsys.readouterr().out


def test_shipped_config_holds_the_defaults():
    assert load_config(REPO_CONFIG) == SimConfig()


def test_dict_round_trip():
    cfg = SimConfig(
        ga=GaConfig(gamma_wh=6500, pop_size=12, iterations=40, m=2.0, weight_scheme=WeightScheme.RELATION_PROMOTED, seed=9),
        profile_set="community",
        n_buyers=6,
        n_sellers=8,
        relation_mix=(0.6, 0.3, 0.1),
        hours=(9, 10),
        experiments=ExperimentConfig(replications=4, gammas_kwh=(3.0,), hours=(10,), workers=2),
        delivery_noise=0.25,
        out_dir="out",
        log_level="debug",
    )
    assert config_from_dict(config_to_dict(cfg)) == cfg


def test_partial_document_uses_defaults():
    cfg = config_from_dict({"ga": {"pop_size": 8}})
    assert cfg.ga.pop_size == 8
    assert cfg.ga.iterations == GaConfig().iterations
    assert cfg.profile_set == "village14"


@pytest.mark.parametrize(
    "doc",
    [
        {"scenario": {"profile_set": "city"}},
        {"scenario": {"relation_mix": [0.5, 0.5, 0.5]}},
        {"scenario": {"price_range": [9, 2]}},
        {"scenario": {"colour": "red"}},
        {"ga": {"pop_size": 1}},
        {"ga": {"weight_scheme": "heavy"}},
        {"ga": {"crossover_rate": 0.9}},
        {"experiments": {"replications": 0}},
        {"delivery_noise": 2.0},
    ],
)
def test_invalid_documents(doc):
    with pytest.raises(ConfigError):
        config_from_dict(doc)


def test_unreadable_file(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text("{not json")
    with pytest.raises(ConfigError):
        load_config(path)


def test_with_overrides():
    cfg = SimConfig()
    assert with_overrides(cfg, pop_size=None, seed=None) is cfg
    changed = with_overrides(cfg, pop_size=12, seed=4)
    assert (changed.ga.pop_size, changed.ga.seed) == (12, 4)
    assert changed.ga.iterations == cfg.ga.iterations
    with pytest.raises(ConfigError):
        with_overrides(cfg, m=0.1)


def test_scenario_spec_from_config():
    spec = SimConfig(profile_set="community", n_buyers=3, n_sellers=2, hours=(10,)).scenario_spec(4)
    assert (spec.name, spec.seed) == ("community5", 4)
    assert len(spec.profiles) == 5
    assert SimConfig().scenario_spec().name == "village14"


def test_logging_levels():
    configure_logging("warn", json=True)
    configure_logging("DEBUG")
    with pytest.raises(ConfigError):
        configure_logging("loud")
