import json

import numpy as np
import pytest

from photonic_ps.config import RunConfig, config_from_dict, default_config_json, load_config
from photonic_ps.exceptions import ConfigError
from photonic_ps.outputs import read_csv, read_json, write_csv, write_json


def test_default_round_trip():
    doc = json.loads(default_config_json())
    cfg = config_from_dict(doc)
    assert cfg == RunConfig()
    assert cfg.stage1.episodes == 400 and cfg.stage1.batch_size == 10
    assert cfg.stage2.episodes == 1000


def test_partial_config_keeps_defaults():
    cfg = config_from_dict({"seed": 4, "stage2": {"episodes": 10}})
    assert cfg.seed == 4 and cfg.stage2.episodes == 10
    assert cfg.stage1 == RunConfig().stage1


@pytest.mark.parametrize("doc,path", [
    ({"sed": 1}, "sed"),
    ({"stage1": {"batch": 3}}, "stage1.batch"),
    ({"shots": "many"}, "shots"),
    ({"noise": {"g2": "x"}}, "noise.g2"),
    ({"stage1": {"phase_offsets": [0, 0, "a", 0]}}, "stage1.phase_offsets[2]"),
    ({"backend": "gpu"}, "backend"),
    ({"stage1": {"phase_gauge": "mean"}}, "stage1.phase_gauge"),
    ({"stage1": {"fold_beamsplitters": 1}}, "stage1.fold_beamsplitters"),
])
def test_config_errors_name_the_field(doc, path):
    with pytest.raises(ConfigError, match=path.replace("[", r"\[").replace("]", r"\]")):
        config_from_dict(doc)


def test_invalid_noise_values():
    with pytest.raises(ConfigError):
        config_from_dict({"noise": {"transmission": 0.0}})


def test_load_missing_and_bad_json(tmp_path):
    with pytest.raises(ConfigError, match="nope.json"):
        load_config(tmp_path / "nope.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{")
    with pytest.raises(ConfigError):
        load_config(bad)


def test_hash_ignores_paths_and_threads():
    base = RunConfig()
    assert base.result_hash() == RunConfig(output_dir="elsewhere", threads=8).result_hash()
    assert base.result_hash() != RunConfig(seed=1).result_hash()


def test_csv_header_and_round_trip(tmp_path):
    path = write_csv(tmp_path / "a.csv", ["episode", "accuracy"], [[0, 0.5], [1, 1 / 3]], config_hash="abc")
    comments, columns, rows = read_csv(path)
    assert comments[0].startswith("# photonic_ps ")
    assert comments[1] == "# config_hash abc"
    assert columns == ["episode", "accuracy"]
    assert rows[1] == ["1", "0.333333333333"]


def test_json_sorted_and_numpy(tmp_path):
    path = write_json(tmp_path / "p.json", {"b": np.arange(2), "a": np.float64(0.5)})
    assert read_json(path) == {"a": 0.5, "b": [0, 1]}
    text = path.read_text()
    assert text.index('"a"') < text.index('"b"')
