from pathlib import Path

import pytest

from plnet.errors import ConfigError
from plnet.harness.config import DEFAULTS, EXPERIMENTS, KEYS, dump_config, load_config, make_spec, parse_config

CONFIG_DIR = Path(__file__).resolve().parents[1] / "configs"


def test_parse_types_and_comments():
    cfg = parse_config("# comment\n\nepochs = 7\nlr=0.5\northogonal = false\nactivation = tanh\n")
    assert cfg == {"epochs": 7, "lr": 0.5, "orthogonal": False, "activation": "tanh"}


@pytest.mark.parametrize("text", ["bogus = 1", "epochs = 1\nepochs = 2", "epochs = x", "no equals sign", "orthogonal = maybe"])
def test_parse_errors(text):
    with pytest.raises(ConfigError):
        parse_config(text)


def test_make_spec_layers_overrides_on_defaults():
    spec = make_spec("rb2d", {"epochs": 3})
    assert spec.epochs == 3 and spec.width == DEFAULTS["rb2d"]["width"]
    assert spec.tau == pytest.approx(spec.nu / spec.mu)
    with pytest.raises(ConfigError):
        make_spec("rb2d", {"experiment": "step"})
    with pytest.raises(ConfigError):
        make_spec("nope")
    with pytest.raises(ConfigError):
        make_spec("step", {"mu": 2.0, "nu": 1.0})


def test_dump_round_trip(tmp_path):
    spec = make_spec("rbNd", {"seed": 4})
    path = tmp_path / "x.cfg"
    path.write_text(dump_config(spec))
    assert make_spec("rbNd", load_config(path)) == spec


@pytest.mark.parametrize("experiment", EXPERIMENTS)
def test_shipped_configs_match_defaults(experiment):
    cfg = load_config(CONFIG_DIR / f"{experiment}.cfg")
    assert set(cfg) <= set(KEYS)
    assert make_spec(experiment, cfg) == make_spec(experiment)
