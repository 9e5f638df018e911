import json

import numpy as np
import pytest

from ssct.cli import (ConfigError, build_grid, build_potential, config_hash,
                      load_config, main, read_field, rng_from, write_field)
from ssct.geometry import BoxGrid, Field


def test_field_binary_roundtrip(tmp_path):
    g = BoxGrid(3, 1.0, 16)
    rng = np.random.default_rng(0)
    f = Field(g, rng.normal(size=g.shape) + 1j * rng.normal(size=g.shape))
    path = tmp_path / "f.ssct"
    write_field(path, f)
    back = read_field(path)
    assert back.grid.n == 16 and back.grid.L == 1.0 and back.grid.d == 3
    assert np.max(np.abs(back.data - f.data)) == 0.0


def test_field_bad_magic_rejected(tmp_path):
    path = tmp_path / "junk.ssct"
    path.write_bytes(b"NOPE" + b"\x00" * 64)
    with pytest.raises(ValueError):
        read_field(path)


def test_load_config_defaults():
    cfg = load_config()
    assert cfg["grid"]["n"] == "32"
    assert cfg["problem"]["lambda"] == "4.0"
    assert cfg["run"]["seed"] == "12345"


def test_load_config_file_and_overrides(tmp_path):
    path = tmp_path / "exp.ini"
    path.write_text("[grid]\nn = 64\n[problem]\nlambda = 9.0\n")
    cfg = load_config(str(path), overrides={("run", "seed"): 7})
    assert cfg["grid"]["n"] == "64"
    assert cfg["problem"]["lambda"] == "9.0"
    assert cfg["run"]["seed"] == "7"


def test_env_override(monkeypatch):
    monkeypatch.setenv("SSCT_GRID_N", "16")
    cfg = load_config()
    assert cfg["grid"]["n"] == "16"


def test_validation_rejects_bad_values():
    with pytest.raises(ConfigError):
        load_config(overrides={("grid", "n"): 33})
    with pytest.raises(ConfigError):
        load_config(overrides={("problem", "lambda"): -1.0})
    with pytest.raises(ConfigError):
        load_config(overrides={("potential", "frac_s"): 0.4})
    with pytest.raises(ConfigError):
        load_config(overrides={("solver", "tol"): "not-a-number"})


def test_missing_config_file_rejected():
    with pytest.raises(ConfigError):
        load_config("/does/not/exist.ini")


def test_config_hash_stability():
    a = config_hash(load_config())
    b = config_hash(load_config())
    c = config_hash(load_config(overrides={("run", "seed"): 999}))
    assert a == b
    assert a != c
    assert len(a) == 16


def test_build_potential_from_defaults():
    cfg = load_config()
    grid = build_grid(cfg)
    P = build_potential(cfg, grid)
    assert P.v0 is not None
    assert P.shell is None and P.frac is None


def test_rng_streams_deterministic_and_distinct():
    cfg = load_config()
    a = rng_from(cfg, "alpha").normal(size=4)
    b = rng_from(cfg, "alpha").normal(size=4)
    c = rng_from(cfg, "beta").normal(size=4)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_main_config_error_exit_code(tmp_path):
    path = tmp_path / "bad.ini"
    path.write_text("[grid]\nn = 33\n")
    assert main(["direct", "--config", str(path)]) == 2


def test_main_direct_writes_artifacts(tmp_path):
    path = tmp_path / "small.ini"
    path.write_text("[grid]\nn = 16\n[solver]\ntol = 1e-6\n")
    out = tmp_path / "out"
    code = main(["direct", "--config", str(path), "--out", str(out)])
    assert code == 0
    assert (out / "u_sc.ssct").exists()
    report = json.loads((out / "direct_report.json").read_text())
    assert report["converged"] is True
    manifest = json.loads((out / "manifest_direct.json").read_text())
    assert manifest["subcommand"] == "direct"
    assert len(manifest["config_hash"]) == 16
