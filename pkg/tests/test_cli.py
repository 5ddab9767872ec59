import argparse
import json

import pytest

from cdnoma.cli import main, parse_grid, parse_ints
from cdnoma.harness import load_records
from cdnoma.scenario import default_scenario, dump_scenario


def test_parse_grid():
    assert parse_grid("0:5:20") == (0.0, 5.0, 10.0, 15.0, 20.0)
    assert parse_grid("0:2.5:5") == (0.0, 2.5, 5.0)
    assert parse_grid("1,3") == (1.0, 3.0)
    assert parse_grid("7") == (7.0,)
    assert parse_ints("16,32") == (16, 32)
    for bad in ("0:5", "5:1:0", "0:-1:5", "a,b", "x:1:2"):
        with pytest.raises(argparse.ArgumentTypeError):
            parse_grid(bad)


def test_validate(tmp_path, capsys):
    good = tmp_path / "s.json"
    dump_scenario(default_scenario(), good)
    assert main(["validate", "--scenario", str(good)]) == 0
    assert capsys.readouterr().out.startswith("ok ")
    bad = tmp_path / "bad.json"
    d = json.loads(good.read_text())
    d["groups"][0]["rf_chains"] = 1000
    bad.write_text(json.dumps(d))
    assert main(["validate", "--scenario", str(bad)]) == 2
    assert "rf_chains" in capsys.readouterr().err
    assert main(["validate", "--scenario", str(tmp_path / "missing.json")]) == 2


def test_run_small(tmp_path, capsys):
    cfg = default_scenario().replace(antennas=16)
    sc = tmp_path / "s.json"
    dump_scenario(cfg, sc)
    out = tmp_path / "res"
    argv = ["run", "--scenario", str(sc), "--receivers", "musa-pic,musa-mfb", "--eb", "0:10:10",
            "--trials", "1", "--symbols", "1000", "--out", str(out)]
    assert main(argv) == 0
    recs = load_records(out / "ber.csv")
    assert [(r.sweep, r.receiver) for r in recs] == [
        (0.0, "musa-pic"), (0.0, "musa-mfb"), (10.0, "musa-pic"), (10.0, "musa-mfb")
    ]
    assert main(argv[:-2] + ["--experiment", "air", "--format", "json", "--out", str(out)]) == 0
    assert (out / "air.json").exists() and (out / "air_group.json").exists()


def test_run_rejects_bad_spec(tmp_path, capsys):
    assert main(["run", "--receivers", "musa-sic", "--experiment", "air", "--out", str(tmp_path)]) == 2
    assert "AIR" in capsys.readouterr().err
