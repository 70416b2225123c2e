from pathlib import Path

import numpy as np
import pytest

import sflab
from sflab.config import KINDS, build_scenario, load_config, parse_matrix
from sflab.discretize import DirectSumScenario
from sflab.errors import ConfigError

CONFIGS = Path(sflab.__file__).parent / "configs"


@pytest.mark.parametrize("kind", KINDS)
def test_shipped_config_per_kind(kind):
    cfg = load_config(CONFIGS / f"{kind}.toml")
    assert cfg.kind == kind


def test_defaults():
    cfg = load_config()
    assert cfg.kind == "rotating-bc"
    assert (cfg.grid.n_modes, cfg.grid.n_z, cfg.nt) == (32, 64, 64)


def test_overrides_win():
    cfg = load_config(CONFIGS / "ab-flux.toml", {"grid": {"nz": 16}, "tolerance": {"residual": 0.01}})
    assert cfg.grid.n_z == 16 and cfg.residual == 0.01 and cfg.grid.n_modes == 32


def test_complex_entries():
    m = parse_matrix([[1, [0, 2]], [[0.5, -1], 3.0]])
    np.testing.assert_array_equal(m, [[1, 2j], [0.5 - 1j, 3]])


@pytest.mark.parametrize(
    "bad",
    [[], [[1, 2], [3]], [["x"]], [[1, [1, 2, 3]]]],
)
def test_bad_matrices(bad):
    with pytest.raises(ConfigError):
        parse_matrix(bad)


@pytest.mark.parametrize(
    "table",
    [
        {"kind": "nope"},
        {"kind": "rotating-bc", "chern": 1, "flavors": 1},
        {"kind": "rotating-bc", "chern": 1.5},
        {"kind": "direct-sum"},
        {"kind": "direct-sum", "parts": [{"kind": "direct-sum", "parts": []}]},
        {"kind": "custom-T-loop", "flavors": 2, "outer": [{"p": 1, "q": 0, "c": [[1]]}]},
    ],
)
def test_bad_scenarios(table):
    with pytest.raises(ConfigError):
        build_scenario(table)


def test_direct_sum_parts():
    scn = build_scenario({"kind": "direct-sum", "parts": [{"kind": "ab-flux"}, {"kind": "rotating-bc", "chern": 2}]})
    assert isinstance(scn, DirectSumScenario) and len(scn.parts) == 2


@pytest.mark.parametrize(
    "text",
    [
        "[grid]\nnz = 2\n",
        "[grid]\nmodes = 1.5\n",
        "[tolerance]\nresidual = 0.7\n",
        "[tolerance]\nwindow = -1\n",
        "[topology]\nnx = 2\n",
        "not toml [",
    ],
)
def test_invalid_files(tmp_path, text):
    f = tmp_path / "c.toml"
    f.write_text(text)
    with pytest.raises(ConfigError):
        load_config(f)


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "absent.toml")
