import json

import pytest

from conformal_gamma.cli import (EXIT_CONFIG, EXIT_ERROR, EXIT_FAIL, ConfigError, main, parse_config,
                                 run_experiment)


def write_config(tmp_path, data, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(data))
    return str(p)


def test_defaults():
    c = parse_config([], environ={})
    assert c.command == "counterexample" and c.h == 2.0 ** -12 and c.stencil == 2
    assert c.n_values == tuple(range(2, 10))


def test_negative_h_names_key(tmp_path, capsys):
    with pytest.raises(ConfigError, match="'h'"):
        parse_config(["--h", "-0.1"], environ={})
    assert main(["--h", "-0.1", "--out-dir", str(tmp_path)]) == EXIT_CONFIG
    assert "'h'" in capsys.readouterr().err


def test_layering(tmp_path):
    cfg = write_config(tmp_path, {"h": 0.01, "tol": 0.02, "seed": 3})
    c = parse_config(["--config", cfg], environ={"CGAMMA_TOL": "0.05", "CGAMMA_SEED": "4"})
    assert c.h == 0.01 and c.tol == 0.05 and c.seed == 4
    c = parse_config(["--config", cfg, "--h", "0.02", "--seed", "5"], environ={"CGAMMA_H": "0.03"})
    assert c.h == 0.02 and c.seed == 5
    c = parse_config(["gamma"], environ={"CGAMMA_COMMAND": "distance"})
    assert c.command == "gamma"


def test_rejections(tmp_path):
    with pytest.raises(ConfigError, match="'bogus'"):
        parse_config(["--config", write_config(tmp_path, {"bogus": 1})], environ={})
    with pytest.raises(ConfigError, match="'weight.c'"):
        parse_config(["--config", write_config(tmp_path, {"weight": {"kind": "constant", "c": -1}})], environ={})
    with pytest.raises(ConfigError, match="'stencil'"):
        parse_config(["--stencil", "3"], environ={})
    with pytest.raises(ConfigError, match="'tol'"):
        parse_config(["--tol", "0"], environ={})
    with pytest.raises(ConfigError, match="'alpha'"):
        parse_config(["--config", write_config(tmp_path, {"alpha": 1.0})], environ={})
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(ConfigError, match="malformed JSON"):
        parse_config(["--config", str(bad)], environ={})
    with pytest.raises(ConfigError, match="cannot read"):
        parse_config(["--config", str(tmp_path / "missing.json")], environ={})


def test_module_error_exit(tmp_path, capsys):
    # n = 9 is not resolved at h = 1/64
    cfg = write_config(tmp_path, {"h": 1 / 64, "n_values": [2, 9], "out_dir": str(tmp_path / "o")})
    assert main(["--config", cfg]) == EXIT_ERROR
    err = capsys.readouterr().err
    assert "counterexample" in err and "input:" in err


def test_membership_below_weight_bound_fails(tmp_path, capsys):
    cfg = write_config(tmp_path, {"command": "membership", "h": 1 / 64, "alpha": 1.5, "pair_samples": 64,
                                  "length_pairs": 2, "weight": {"kind": "counterexample", "n": 3},
                                  "out_dir": str(tmp_path)})
    assert main(["--config", cfg]) == EXIT_FAIL
    out = capsys.readouterr()
    assert "FAIL" in out.out and "failing checks" in out.err
    rep = json.loads((tmp_path / "membership.json").read_text())
    assert rep["passed"] is False


def test_gamma_constant_passes(tmp_path):
    cfg = write_config(tmp_path, {"command": "gamma", "h": 1 / 32, "x": [0.3, 0.3], "y": [0.7, 0.6],
                                  "out_dir": str(tmp_path)})
    assert main(["--config", cfg]) == 0
    rep = json.loads((tmp_path / "gamma.json").read_text())
    assert all(r["max_margin"] <= 1e-9 for r in rep["reports"].values())


def test_distance_and_geodesic_commands(tmp_path):
    base = {"h": 1 / 64, "x": [0.2, 0.2], "y": [0.8, 0.8], "out_dir": str(tmp_path)}
    assert main(["distance", "--config", write_config(tmp_path, base)]) == 0
    d = json.loads((tmp_path / "distance.json").read_text())
    assert d["distance"] == pytest.approx(0.72 ** 0.5, rel=0.01)
    edge = dict(base, x=[0.0, 0.5], y=[1.0, 0.5])
    assert main(["distance", "--config", write_config(tmp_path, edge)]) == 0
    assert main(["geodesic", "--config", write_config(tmp_path, base)]) == 0
    assert (tmp_path / "geodesic.csv").read_text().startswith("# conformal-gamma geodesic table, csv format v1\n")
    assert (tmp_path / "geodesic.svg").exists()


def test_counterexample_coarse_run(tmp_path):
    cfg = write_config(tmp_path, {"h": 2.0 ** -9, "tol": 0.05, "n_values": [2, 3, 4, 5, 6],
                                  "out_dir": str(tmp_path)})
    assert main(["--config", cfg]) == 0
    lines = (tmp_path / "counterexample.csv").read_text().splitlines()
    assert lines[1] == "n,d_n_ab,bound_ok" and len(lines) == 7
    assert all(row.endswith(",true") for row in lines[2:])
    assert (tmp_path / "counterexample.svg").read_text().startswith("<svg")


def test_outputs_byte_identical(tmp_path):
    outs = []
    for k in range(2):
        out = tmp_path / f"run{k}"
        c = parse_config(["--h", str(2.0 ** -8), "--tol", "0.05", "--out-dir", str(out)],
                         environ={"CGAMMA_N_VALUES": "[2, 3, 4, 5]"})
        run_experiment(c)
        outs.append({p.name: p.read_bytes() for p in sorted(out.iterdir())})
    assert outs[0] == outs[1]
    assert set(outs[0]) == {"counterexample.csv", "counterexample.json", "counterexample.svg"}
