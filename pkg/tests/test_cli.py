import csv
import json
import subprocess
import sys

import pytest

from covergap import certificate as cert
from covergap.cli import DEFAULTS, config_hash, main, resolve_config, ConfigError


def read_csv(path):
    with open(path, encoding="utf-8") as fh:
        header = fh.readline()
        return header, list(csv.DictReader(fh))


def test_rate_table_matches_module(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"n_grid": [1e3, 1e6, 1e9]}))
    assert main(["--subcommand", "rate-table", "--config", str(cfg), "--out", str(tmp_path)]) == 0
    header, rows = read_csv(tmp_path / "rate-table" / "results.csv")
    assert header.startswith("# covergap rate-table config_hash=")
    for flavor in ("bundle", "cover"):
        sub = [r for r in rows if r["flavor"] == flavor]
        assert len(sub) == 3
        for r, n in zip(sub, [10**3, 10**6, 10**9]):
            assert float(r["kappa"]) == cert.rate_schedule(flavor, n, 2).kappa
    man = json.loads((tmp_path / "rate-table" / "manifest.json").read_text())
    assert man["passed"] and man["config_hash"] in header
    assert set(man["versions"]) >= {"numpy", "scipy", "python"}


def test_rerun_byte_identical(tmp_path):
    args = ["--subcommand", "lattice-grow", "--seed", "5"]
    assert main(args + ["--out", str(tmp_path / "a")]) == 0
    assert main(args + ["--out", str(tmp_path / "b")]) == 0
    a = (tmp_path / "a" / "lattice-grow" / "results.csv").read_bytes()
    b = (tmp_path / "b" / "lattice-grow" / "results.csv").read_bytes()
    assert a == b and b"seeds=[5]" in a


def test_linearize_verify_default(tmp_path):
    assert main(["--subcommand", "linearize-verify", "--out", str(tmp_path), "--threads", "2"]) == 0
    _, rows = read_csv(tmp_path / "linearize-verify" / "results.csv")
    assert len(rows) == 100
    assert max(float(r["residual"]) for r in rows) <= 1e-7


def test_norm_ratio_small(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"n_grid": [30], "seeds": [0, 1], "regular_R": 4}))
    assert main(["--subcommand", "norm-ratio", "--config", str(cfg), "--out", str(tmp_path)]) == 0
    _, rows = read_csv(tmp_path / "norm-ratio" / "results.csv")
    assert len(rows) == 2
    assert all(float(r["ratio"]) >= 1 - 1e-9 for r in rows)


def test_config_errors(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"nonsense": 1}))
    assert main(["--subcommand", "rate-table", "--config", str(bad)]) == 2
    assert "config:" in capsys.readouterr().err
    bad.write_text(json.dumps({"seeds": []}))
    assert main(["--subcommand", "rate-table", "--config", str(bad)]) == 2
    with pytest.raises(SystemExit) as info:
        main(["--subcommand", "frobnicate"])
    assert info.value.code != 0
    with pytest.raises(ConfigError):
        resolve_config("linearize-verify", {"n_max": 10**6})


def test_assertion_failure_exit(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"T_grid": [2, 3], "slope_range": [5, 6]}))
    assert main(["--subcommand", "lattice-grow", "--config", str(cfg), "--out", str(tmp_path)]) == 1
    assert "assert:" in capsys.readouterr().err


def test_config_hash_stable():
    a = resolve_config("rate-table", None)
    b = resolve_config("rate-table", {})
    assert config_hash(a) == config_hash(b)
    assert config_hash(resolve_config("rate-table", None, seed=1)) != config_hash(a)
    assert set(DEFAULTS) == {"norm-ratio", "linearize-verify", "kernel-check", "lattice-grow",
                             "rate-table", "certify-toy"}


def test_module_entry_point(tmp_path):
    res = subprocess.run([sys.executable, "-m", "covergap", "--subcommand", "rate-table",
                          "--out", str(tmp_path)], capture_output=True, text=True)
    assert res.returncode == 0
    assert (tmp_path / "rate-table" / "manifest.json").exists()
