import csv
import hashlib
import json

import pytest

from pamlab.cli import main
from pamlab.experiments import ConfigError, parse_config, run


def read_rows(path):
    lines = [l for l in path.read_text().splitlines() if not l.startswith("#")]
    return list(csv.DictReader(lines))


def test_classify_cli(tmp_path, capsys):
    code = main(["classify", "--set", "kappa.beta=0", "--set", "gamma=1", "--out", str(tmp_path)])
    assert code == 0
    rep = json.loads((tmp_path / "result.json").read_text())
    assert rep["phase"] == 2 and rep["kappa_star"] == 1.0
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert manifest["status"] == 0
    assert manifest["result_sha256"] == hashlib.sha256((tmp_path / "result.json").read_bytes()).hexdigest()


def test_alpha_cli_from_file(tmp_path):
    cfg = tmp_path / "a.cfg"
    cfg.write_text("kind = alpha\n# power-law speed\nkappa.c = 1\nkappa.beta = 1\ngamma = 0\nt = 8, 1000\n")
    assert main(["run", str(cfg), "--out", str(tmp_path / "out")]) == 0
    rows = read_rows(tmp_path / "out" / "result.csv")
    assert [float(r["alpha"]) for r in rows] == pytest.approx([4.0, 100.0])


def test_partial_failure_exit_code(tmp_path):
    code = main(["alpha", "--set", "kappa.beta=0", "--set", "gamma=0", "--set", "t=0.5,10", "--out", str(tmp_path)])
    assert code == 3
    rows = read_rows(tmp_path / "result.csv")
    assert rows[0]["error"] and not rows[1]["error"]


def test_validation_lists_every_error(tmp_path, capsys):
    code = main(["solve-discrete", "--set", "gamma=-1", "--set", "bogus=1", "--out", str(tmp_path)])
    assert code == 2
    err = capsys.readouterr().err
    assert "rho: required" in err and "bogus" in err and "gamma" in err
    assert not (tmp_path / "result.csv").exists()


def test_solve_discrete_sweep(tmp_path):
    cfg = parse_config("kind = solve-discrete\nvariant = db\ngamma = 0\nrho = 0.5, 5\nR = 6\nrestarts = 2\n")
    res = run(cfg, tmp_path, threads=2)
    assert res.status == 0
    vals = [float(r["value"]) for r in read_rows(res.result_path)]
    assert vals[1] == pytest.approx(2.0, abs=1e-9)
    assert vals[0] < vals[1]


def test_config_hash_stable_under_defaults():
    a = parse_config("kind = classify\ngamma = 0\nkappa.beta = 1\n")
    b = parse_config("kind = classify\ngamma = 0\nkappa.beta = 1\nd = 1\nseed = 0\n")
    assert a.config_hash() == b.config_hash()


def test_unknown_kind():
    with pytest.raises(ConfigError):
        parse_config("kind = nope\n")


def test_model_file_resolves_relative(tmp_path):
    (tmp_path / "xi.txt").write_text("-1\n1\n")
    cfg_path = tmp_path / "c.cfg"
    cfg_path.write_text("kind = fk-moment\nmodel.family = table_based\nmodel.file = xi.txt\n"
                        "model.esssup_class = mean_zero\nkappa.beta = 0\nkappa.c = 0.1\nt = 1\nn_paths = 512\ntilt = 0\n")
    assert main(["run", str(cfg_path), "--out", str(tmp_path / "o")]) == 0
