import math

import numpy as np
import pytest

from rsma_krr import config as cf


def test_bundled_defaults():
    cfg = cf.load_config()
    assert cfg.frequencies.grid()[:3] == [100.0, 200.0, 300.0] and len(cfg.frequencies.grid()) == 20
    assert [m.id for m in cfg.methods] == ["swf", "krr", "proposed", "proposed_noweight", "proposed_md"]
    assert cfg.array.build().num_mics == 60
    assert cfg.lambda_grid.values()[0] == 1e-10 and len(cfg.lambda_grid.values()) == 16
    assert cfg.noise.snr == 20.0 and cfg.eval.region().points().shape == (1000, 3)
    assert cfg.scene().sources[0].position == (3.0, 0.0, 0.0)


def test_defaults_file_matches_model_defaults():
    assert cf.config_hash(cf.load_config()) == cf.config_hash(cf.parse_config({}))


def test_hash_is_stable_and_sensitive():
    a = cf.load_config()
    assert cf.config_hash(a) == cf.config_hash(cf.load_config())
    assert cf.config_hash(a) != cf.config_hash(a.with_overrides(seed=1))


def test_extra_keys_rejected():
    with pytest.raises(cf.ConfigError):
        cf.parse_config({"bogus": 1})
    with pytest.raises(cf.ConfigError):
        cf.parse_config({"array": {"radius": 0.05, "shape": "cube"}})


@pytest.mark.parametrize("data", [
    {"sources": [{"position": [0.01, 0, 0]}]},
    {"sources": [{"position": [0.1, 0, 0]}]},
    {"sources": []},
    {"methods": []},
    {"methods": [{"id": "a", "kind": "swf"}, {"id": "a", "kind": "krr"}]},
    {"methods": [{"id": "bad id", "kind": "swf"}]},
    {"methods": [{"id": "s", "kind": "swf", "lambda_search": "joint"}]},
    {"methods": [{"id": "m", "kind": "proposed_md"}]},
    {"frequencies": {"start": 500, "stop": 100}},
    {"frequencies": {"values": []}},
    {"lambda_grid": {"l_min": 3, "l_max": 1}},
    {"array": {"radius": -1}},
    {"mdopt": {"tau": 0}},
])
def test_invalid_configs(data):
    with pytest.raises(cf.ConfigError):
        cf.parse_config(data)


def test_inf_snr_and_explicit_frequencies():
    cfg = cf.parse_config({"noise": {"snr_db": "inf"}, "frequencies": {"values": [250, 1000]}})
    assert math.isinf(cfg.noise.snr) and cfg.frequencies.grid() == [250.0, 1000.0]
    assert math.isinf(cfg.noise_spec(250.0).snr_db)


def test_noise_seed_depends_on_frequency_only_through_the_cell():
    cfg = cf.load_config()
    a, b = cfg.noise_spec(250.0), cfg.noise_spec(500.0)
    assert a.rng_seed != b.rng_seed and a.rng_seed == cfg.noise_spec(250.0).rng_seed
    assert cfg.with_overrides(seed=3).noise_spec(250.0).rng_seed != a.rng_seed


def test_method_selection():
    cfg = cf.load_config()
    sub = cfg.select_methods(["krr", "swf"])
    assert [m.id for m in sub.methods] == ["krr", "swf"]
    with pytest.raises(cf.ConfigError):
        cfg.method("nope")
    assert cfg.sct_spec(cfg.method("proposed_noweight")).weight_mode == "unit"


def test_toml_file_and_relative_layout(tmp_path):
    (tmp_path / "layout.csv").write_text("x,y,z\n1,0,0\n0,1,0\n0,0,1\n-1,0,0\n")
    (tmp_path / "exp.toml").write_text('seed = 5\n[array]\nlayout = "layout.csv"\n')
    cfg = cf.load_config(tmp_path / "exp.toml")
    assert cfg.seed == 5 and cfg.base_dir == tmp_path
    assert cfg.array.build(cfg.base_dir).num_mics == 4
    (tmp_path / "bad.toml").write_text("seed = = 1\n")
    with pytest.raises(cf.ConfigError):
        cf.load_config(tmp_path / "bad.toml")


def test_box_region():
    cfg = cf.parse_config({"eval": {"kind": "box"}})
    assert cfg.eval.region().points().shape == (320, 3)


def test_models_are_frozen():
    cfg = cf.load_config()
    with pytest.raises(Exception):
        cfg.seed = 3
    assert isinstance(cf.canonical_json({"b": 1, "a": np.nan}), str)
