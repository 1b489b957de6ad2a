import json

import numpy as np
import pytest

from torus_atlas.action_angle import integrable_embedding
from torus_atlas.config import ExperimentConfig, config_hash, load_config
from torus_atlas.errors import ConfigError
from torus_atlas.kam import SolvedTorus
from torus_atlas.output import dumps, fmt, load_tori, save_tori, write_csv


def test_defaults_and_hash_stability(tmp_path):
    cfg = load_config()
    assert cfg.schema_version == 1
    assert config_hash(cfg.solve_tori) == config_hash(ExperimentConfig().solve_tori)
    p = tmp_path / "c.json"
    p.write_text(json.dumps({"solve_tori": {"epsilon": 5e-4}}))
    other = load_config(p)
    assert other.solve_tori.epsilon == 5e-4
    assert config_hash(other.solve_tori) != config_hash(cfg.solve_tori)


@pytest.mark.parametrize("raw", [
    {"schema_version": 2},
    {"unknown": 1},
    {"solve_tori": {"kam": {"N": 48}}},
    {"freqmap": {"I_range": [0.6, 0.05]}},
    {"monodromy": {"loop": {"kind": "polygon"}}},
    {"diophantine": {"params": {"tau": 1.0}}},
])
def test_invalid_configs(tmp_path, raw):
    p = tmp_path / "c.json"
    p.write_text(json.dumps(raw))
    with pytest.raises(ConfigError):
        load_config(p)


def test_unreadable_config(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.json")
    p = tmp_path / "bad.json"
    p.write_text("{not json")
    with pytest.raises(ConfigError):
        load_config(p)


def test_float_formatting_roundtrips():
    for x in [0.1, 1 / 3, 1e-300, -2.5e17, np.pi]:
        assert float(fmt(x)) == x
    assert fmt(np.float64("nan")) == "nan"
    assert fmt(True) == "true"
    assert fmt(np.int64(3)) == "3"
    text = dumps({"a": [0.1, float("inf")], "b": {"c": np.float64(1 / 3)}})
    d = json.loads(text)
    assert d["a"] == [0.1, None]
    assert d["b"]["c"] == 1 / 3


def test_csv_writer(tmp_path):
    p = tmp_path / "x.csv"
    write_csv(p, ["a", "b"], [(1, 0.5), (2, np.nan)])
    assert p.read_text() == "a,b\n1,0.5\n2,nan\n"


def test_tori_binary_roundtrip(tmp_path):
    K = integrable_embedding((0.2, 0.5), 32)
    st = SolvedTorus(K.omega, K, 1e-12, 1e-3, 2)
    save_tori(tmp_path / "t.bin", [st, st])
    header, tori = load_tori(tmp_path / "t.bin")
    assert len(tori) == 2 and header["tori"][0]["perturbation_id"] == 2
    assert np.array_equal(tori[1].coeffs, K.coeffs)
    assert np.array_equal(tori[0].omega, K.omega)
