"""Configuration loading: INI and JSON forms, coercion, validation errors."""

import json
from pathlib import Path

import pytest

from mfmor import ConfigurationError, RunConfig, load_config
from mfmor.config import AxisSpec, config_echo, config_from_dict

INI_FULL = """\
[run]
problem = heat2d            ; benchmark name
method = mf
sketch = coarse
sketch_size = 3
points_per_iter = 2
tol = 1e-5
max_iter = 40               # generous cap
seed = 7
require_val_convergence = yes
diagnostics = true
timing = off

[mesh]
fine_nx = 16
fine_ny = 16
coarse_nodes = 25

[parameters]
kind = tensor
axis1 = log 0.1 10 12
axis2 = uniform -1 1 9
n_validation = 10
seed = 3

[problem]
block_side = 0.4
mu_bar = 2.0 0.5

[output]
dir = runs/demo
"""

JSON_FULL = {
    "run": {
        "problem": "heat2d", "method": "mf", "sketch": "coarse",
        "sketch_size": 3, "points_per_iter": 2, "tol": 1e-5, "max_iter": 40,
        "seed": 7, "require_val_convergence": True, "diagnostics": True,
        "timing": False,
    },
    "mesh": {"fine_nx": 16, "fine_ny": 16, "coarse_nodes": 25},
    "parameters": {
        "kind": "tensor", "axis1": "log 0.1 10 12", "axis2": "uniform -1 1 9",
        "n_validation": 10, "seed": 3,
    },
    "problem": {"block_side": 0.4, "mu_bar": [2.0, 0.5]},
    "output": {"dir": "runs/demo"},
}


def test_ini_and_json_forms_load_identically(tmp_path):
    ini = tmp_path / "run.cfg"
    ini.write_text(INI_FULL)
    js = tmp_path / "run.json"
    js.write_text(json.dumps(JSON_FULL))
    assert load_config(ini) == load_config(js)


def test_loaded_values_are_typed(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text(INI_FULL)
    cfg = load_config(path)
    assert cfg.sketch == "coarse"
    assert cfg.sketch_size == 3 and isinstance(cfg.sketch_size, int)
    assert cfg.tol == 1e-5 and isinstance(cfg.tol, float)
    assert cfg.require_val_convergence is True
    assert cfg.timing is False
    assert cfg.fine_nx == 16 and cfg.coarse_nodes == 25
    assert cfg.param_kind == "tensor"
    assert cfg.axes == [
        AxisSpec(kind="log", lo=0.1, hi=10.0, n=12),
        AxisSpec(kind="uniform", lo=-1.0, hi=1.0, n=9),
    ]
    assert cfg.params_seed == 3 and cfg.seed == 7
    assert cfg.mu_bar == (2.0, 0.5)
    assert cfg.block_side == 0.4
    assert cfg.out_dir == "runs/demo"


def test_defaults_survive_a_minimal_config(tmp_path):
    path = tmp_path / "tiny.cfg"
    path.write_text("[run]\nproblem = advdiff9d\n")
    cfg = load_config(path)
    assert cfg == RunConfig(problem="advdiff9d").validate()
    assert cfg.method == "mf" and cfg.param_kind == "default"


def test_axes_promote_default_kind_to_tensor():
    cfg = config_from_dict({"parameters": {"axis1": "uniform 0 1 5"}})
    assert cfg.param_kind == "tensor"
    assert len(cfg.axes) == 1


def test_axes_are_ordered_by_index_not_appearance():
    cfg = config_from_dict(
        {"parameters": {"axis2": "uniform -1 1 3", "axis1": "log 0.1 1 4"}}
    )
    assert [a.kind for a in cfg.axes] == ["log", "uniform"]


@pytest.mark.parametrize(
    "spec, message",
    [("log 0.1 10", "kind lo hi n"), ("log a 10 5", "bad axis spec")],
)
def test_axis_spec_errors(spec, message):
    with pytest.raises(ConfigurationError, match=message):
        config_from_dict({"parameters": {"axis1": spec}})


@pytest.mark.parametrize(
    "data, fragment",
    [
        ({"run": {"problm": "heat2d"}}, "problm"),
        ({"mesh": {"fine": 10}}, "fine"),
        ({"parameters": {"axisX": "uniform 0 1 2"}}, "axisX"),
        ({"parameters": {"count": 5}}, "count"),
        ({"problem": {"viscosity": 1.0}}, "viscosity"),
        ({"output": {"folder": "x"}}, "folder"),
        ({"extra": {}}, "extra"),
    ],
)
def test_unknown_keys_are_named_in_the_error(data, fragment):
    with pytest.raises(ConfigurationError, match=fragment):
        config_from_dict(data)


@pytest.mark.parametrize(
    "patch, fragment",
    [
        (dict(problem="heat3d"), "problem"),
        (dict(method="random-search"), "method"),
        (dict(sketch="dense"), "sketch"),
        (dict(sketch_size=0), "sketch_size"),
        (dict(points_per_iter=-1), "points_per_iter"),
        (dict(max_iter=0), "max_iter"),
        (dict(seed=-1), "seed"),
        (dict(tol=0.0), "tol"),
        (dict(tol="loose"), "tol"),
        (dict(param_kind="sobol"), "parameters.kind"),
        (dict(param_kind="tensor"), "axis"),
        (dict(param_kind="file"), "parameters.file"),
        (dict(param_kind="lhs", lhs_n=1), "parameters.n"),
        (dict(n_validation=-2), "n_validation"),
        (dict(fine_nx=1, fine_ny=4), "fine_nx"),
        (dict(fine_nx=8), "fine_ny"),
        (dict(coarse_ny=8), "coarse_nx"),
        (dict(block_side=1.0), "block_side"),
        (dict(permeability_low=0.0), "permeability_low"),
        (dict(method="greedy", problem="advdiff9d"), "greedy"),
    ],
)
def test_validate_names_the_offending_field(patch, fragment):
    cfg = RunConfig(**patch)
    with pytest.raises(ConfigurationError, match=fragment):
        cfg.validate()


def test_missing_and_malformed_files(tmp_path):
    with pytest.raises(ConfigurationError, match="does not exist"):
        load_config(tmp_path / "nope.cfg")
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(ConfigurationError, match="invalid JSON"):
        load_config(bad)
    dup = tmp_path / "dup.cfg"
    dup.write_text("[run]\nseed = 1\nseed = 2\n")
    with pytest.raises(ConfigurationError):
        load_config(dup)


def test_config_echo_is_json_ready(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text(INI_FULL)
    echoed = config_echo(load_config(path))
    round_tripped = json.loads(json.dumps(echoed))
    assert round_tripped["mu_bar"] == [2.0, 0.5]
    assert round_tripped["axes"][0] == {
        "kind": "log", "lo": 0.1, "hi": 10.0, "n": 12
    }
    assert round_tripped["problem"] == "heat2d"


def test_bundled_configs_all_load():
    config_dir = Path(__file__).resolve().parents[1] / "src" / "mfmor" / "configs"
    paths = sorted(config_dir.glob("*.cfg"))
    assert len(paths) >= 10
    for path in paths:
        cfg = load_config(path)
        assert cfg.problem in ("heat2d", "advdiff9d")
