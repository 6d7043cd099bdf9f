import json

import numpy as np
import pytest

from treeclosure import experiment
from treeclosure.cli import build_parser, main
from treeclosure.experiment import AVG_COLUMNS, RAW_COLUMNS, average_rows, read_csv
from treeclosure.lp import NumericalFailure
from treeclosure.model import load_instance
from treeclosure.oracle import enumerate_feasible
from treeclosure.tree import load_tree, validate_tree


@pytest.fixture(scope="module")
def full_grid(tmp_path_factory):
    out = tmp_path_factory.mktemp("grid")
    code = main(["experiment", "--problem", "mkp", "--sizes", "10", "--out-dir", str(out)])
    return code, out


def test_parser_defaults():
    args = build_parser().parse_args(["experiment"])
    assert args.problem == "mkp" and args.sizes == [[10, 20, 40, 60]]
    assert args.perturbations == 5 and args.depths == [[0.25, 0.5, 0.75, 1.0]]
    assert args.separators == [["Obj", "Sti", "CglpO2", "CglpO1"]]
    assert args.time_limit == 600.0 and args.workers == 1
    assert build_parser().parse_args(["experiment", "--sizes", "10", "20,40"]).sizes == [[10], [20, 40]]


def test_generate_and_solve(tmp_path, capsys):
    assert main(["generate", "--problem", "scp", "--sizes", "8,9", "--instances", "2", "--out-dir",
                 str(tmp_path)]) == 0
    paths = capsys.readouterr().out.split()
    assert len(paths) == 4
    inst = load_instance(paths[0])
    assert inst.n == 8 and inst.original_sense.value == "Min"
    assert main(["solve", paths[0]]) == 0
    info = json.loads(capsys.readouterr().out)
    assert info["complete"] and info["incumbent"] == pytest.approx(
        inst.to_original(enumerate_feasible(inst).optimal_value), abs=1e-7)
    tree = load_tree(info["tree"], inst)
    assert not validate_tree(tree)


def test_generate_is_deterministic(tmp_path):
    for d in ("a", "b"):
        main(["generate", "--sizes", "10", "--seed", "9", "--out-dir", str(tmp_path / d)])
    names = sorted(p.name for p in (tmp_path / "a").iterdir())
    assert names == sorted(p.name for p in (tmp_path / "b").iterdir())
    for name in names:
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_full_grid_emits_sixteen_rows(full_grid):
    code, out = full_grid
    assert code == 0
    avg = read_csv(out / "mkp_averaged.csv")
    assert len(avg) == 16
    assert {r["approx"] for r in avg} == {"Obj", "Sti", "CglpO2", "CglpO1"}
    header = (out / "mkp_averaged.csv").read_text().splitlines()[0]
    assert header == ",".join(AVG_COLUMNS)


def test_averages_recompute_from_raw(full_grid):
    _, out = full_grid
    raw = read_csv(out / "mkp_raw.csv", RAW_COLUMNS)
    avg = read_csv(out / "mkp_averaged.csv")
    assert len(raw) == 5 * 16
    for row, again in zip(avg, average_rows(raw)):
        group = [r for r in raw if r["approx"] == row["approx"] and r["depth"] == row["depth"]]
        assert len(group) == 5
        for col in ("gap", "time_s", "cuts"):
            assert abs(row[col] - np.mean([r[col] for r in group])) <= 1e-12
            assert abs(row[col] - again[col]) <= 1e-12
        assert 0 <= row["timeouts"] <= 5 and row["timeouts"] == sum(r["timed_out"] for r in group)
        assert row["gap"] >= 0 and row["cuts"] >= 0


def test_report_and_plots(full_grid, tmp_path, capsys):
    _, out = full_grid
    assert main(["report", str(out / "mkp_averaged.csv"), "--emit-plots", "--out-dir", str(tmp_path)]) == 0
    text = capsys.readouterr().out
    assert "MKP n=10" in text and "CglpO1" in text
    assert (tmp_path / "gap_mkp_n10.png").stat().st_size > 0


def test_small_grid_with_o3(tmp_path, capsys):
    code = main(["experiment", "--sizes", "10", "--perturbations", "1", "--depths", "0.5", "--separators", "Obj",
                 "--with-o3", "--out-dir", str(tmp_path)])
    assert code == 0
    assert [r["approx"] for r in read_csv(tmp_path / "mkp_averaged.csv")] == ["Obj", "CglpO3"]


def test_numerical_failure_exit_code(tmp_path, monkeypatch):
    def broken(*args, **kwargs):
        raise NumericalFailure("singular basis")

    monkeypatch.setattr(experiment, "run_cutting_plane", broken)
    code = main(["experiment", "--sizes", "10", "--perturbations", "1", "--depths", "1.0", "--separators", "Sti",
                 "--out-dir", str(tmp_path)])
    assert code == 1
    raw = read_csv(tmp_path / "mkp_raw.csv", RAW_COLUMNS)
    assert raw[0]["status"] == "NumericalFailure"


def test_io_and_schema_errors(tmp_path, capsys):
    assert main(["solve", str(tmp_path / "missing.json")]) == 2
    bad = tmp_path / "bad.csv"
    bad.write_text("instance,size\nMKP,10\n")
    assert main(["report", str(bad)]) == 2
    garbled = tmp_path / "garbled.json"
    garbled.write_text("{not json")
    assert main(["solve", str(garbled)]) == 2
    with pytest.raises(SystemExit) as exc:
        main(["experiment", "--separators", "Nope"])
    assert exc.value.code == 2
    with pytest.raises(SystemExit):
        main([])
    assert "error" in capsys.readouterr().err
