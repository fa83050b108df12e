from __future__ import annotations

import csv
import json
from pathlib import Path

import pytest

from iomc import __version__, ingest
from iomc.cli import main, sha256_file
from iomc.synthetic import planted_tables

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture(scope="module")
def planted_files(tmp_path_factory):
    d = tmp_path_factory.mktemp("planted")
    paths = []
    for t in planted_tables(group_sizes=(4, 4, 4), n=4, seed=11):
        writer = ingest.write_long if t.year % 2 else ingest.write_wide
        paths.append(str(writer(t, d / f"table_{t.year}.csv")))
    return paths


@pytest.fixture(scope="module")
def spread_files(tmp_path_factory):
    d = tmp_path_factory.mktemp("spread")
    return [str(ingest.write_long(t, d / f"table_{t.year}.csv"))
            for t in planted_tables(group_sizes=(4, 4, 4), n=4, noise=0.5, seed=11)]


def only_run(root: Path) -> Path:
    runs = [p for p in root.iterdir() if p.is_dir()]
    assert len(runs) == 1
    return runs[0]


def manifest(run: Path) -> dict:
    return json.loads((run / "manifest.json").read_text())


def test_stats_single_fixture(tmp_path, capsys):
    code = main(["stats", str(FIXTURES / "toy_long.csv"), "--drop-rows", "VA",
                 "--out", str(tmp_path), "--seed", "3"])
    assert code == 0
    run = only_run(tmp_path)
    rows = list(csv.DictReader((run / "sparsity.csv").open()))
    assert len(rows) == 1 and rows[0]["rows"] == "4" and float(rows[0]["zero_percent"]) == 0.0
    m = manifest(run)
    assert m["seed"] == 3 and m["version"] == __version__
    assert m["inputs"][0]["sha256"] == sha256_file(FIXTURES / "toy_long.csv")
    assert "sparsity.csv" in m["artifacts"]


def test_missing_file_fails(tmp_path, capsys):
    code = main(["stats", str(tmp_path / "absent.csv"), "--out", str(tmp_path / "o")])
    assert code != 0
    assert "absent.csv" in capsys.readouterr().err


def test_parse_error_reported(tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("year,input_country,input_sector,output_country,output_item,value\n"
                   "2010,A,s,A,s,oops\n")
    assert main(["stats", str(bad), "--out", str(tmp_path / "o")]) == 1
    assert "line 2" in capsys.readouterr().err


def test_seed_drawn_and_recorded(tmp_path):
    assert main(["stats", str(FIXTURES / "toy_long.csv"), "--out", str(tmp_path)]) == 0
    seed = manifest(only_run(tmp_path))["seed"]
    assert isinstance(seed, int) and 0 <= seed < 2**32


def test_output_dir_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("IOMC_OUTPUT_DIR", str(tmp_path / "env"))
    assert main(["stats", str(FIXTURES / "toy_long.csv"), "--seed", "1"]) == 0
    assert only_run(tmp_path / "env").name.startswith("stats-")


def test_cluster_auto_planted(spread_files, tmp_path):
    assert main(["cluster", *spread_files, "--reference", "REF", "--out", str(tmp_path),
                 "--seed", "0"]) == 0
    run = only_run(tmp_path)
    m = manifest(run)
    assert m["results"]["k"] == 3
    assert sorted(map(sorted, m["results"]["groups"].values())) == [
        [f"G{g}C{i}" for i in range(1, 5)] for g in (1, 2, 3)]
    assert (run / "dendrogram.txt").read_text().startswith("# leaves")
    assert len(list(csv.reader((run / "wss_tss.csv").open()))) == 13


def test_cluster_fixed_k_and_errors(planted_files, tmp_path, capsys):
    assert main(["cluster", *planted_files, "--reference", "REF", "--k", "5",
                 "--direction", "output", "--linkage", "ward", "--out", str(tmp_path)]) == 0
    assert manifest(only_run(tmp_path))["results"]["k"] == 5
    assert main(["cluster", *planted_files, "--reference", "XXX", "--out", str(tmp_path)]) == 1
    assert main(["cluster", planted_files[0], "--reference", "REF", "--out", str(tmp_path)]) == 1
    assert "two years" in capsys.readouterr().err


def test_complete_planted_panel(planted_files, tmp_path):
    code = main(["complete", *planted_files, "--reference", "REF", "--group",
                 "G1C1,G1C2,G1C3,G1C4", "--obscure", "REF/G1C2,2014", "--threads", "2",
                 "--seed", "4", "--out", str(tmp_path)])
    assert code == 0
    run = only_run(tmp_path)
    res = manifest(run)["results"]
    assert res["best"]["test"]["rmse"] < 0.1 * res["baseline"]["rmse_test"]
    assert res["split_sizes"]["val"] + res["split_sizes"]["test"] == 4 * 6
    for name in ("lambda_path.csv", "spectrum.csv", "original.ppm", "mask.ppm",
                 "completed.ppm", "abs_error.ppm"):
        assert (run / name).is_file()
    lam_rows = list(csv.DictReader((run / "lambda_path.csv").open()))
    assert len(lam_rows) == 40
    assert manifest(run)["config"]["completion"]["rng_seed"] == 4


def test_complete_reproducible(planted_files, tmp_path):
    args = ["complete", *planted_files, "--reference", "REF", "--group", "G1C1,G2C1",
            "--obscure", "REF/G2C1,2014", "--seed", "8", "--lambda-preset", "default"]
    assert main(args + ["--out", str(tmp_path / "a")]) == 0
    assert main(args + ["--out", str(tmp_path / "b")]) == 0
    a = manifest(only_run(tmp_path / "a"))["results"]
    b = manifest(only_run(tmp_path / "b"))["results"]
    assert a == b


def test_complete_ill_posed(planted_files, tmp_path, capsys):
    code = main(["complete", *planted_files, "--reference", "REF", "--group", "G1C1,G1C2",
                 "--obscure", "REF/G1C1,2014", "--stacking", "vertical", "--out", str(tmp_path)])
    assert code == 1
    assert "ill-posed" in capsys.readouterr().err


def test_simulate_single_replication_reproducible(planted_files, tmp_path):
    args = ["simulate", *planted_files, "--reference", "REF", "--replications", "1",
            "--seed", "21", "--direction", "input"]
    assert main(args + ["--out", str(tmp_path / "a")]) == 0
    assert main(args + ["--out", str(tmp_path / "b")]) == 0
    a = (only_run(tmp_path / "a") / "simulation_input.csv").read_text()
    b = (only_run(tmp_path / "b") / "simulation_input.csv").read_text()
    assert a == b and a.splitlines()[1].startswith("0,input,")


def test_usage_error_exit_code(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["cluster"])
    assert exc.value.code == 2
