import json

import pytest

from morsegauge.cli import main


def run(args):
    return main(args)


def test_run_theorem_writes_outputs(tmp_path, capsys):
    out = tmp_path / "t"
    code = run(["run-theorem", "--fn", "step2", "--eps", "0.1",
                "--trials", "2", "--out", str(out)])
    assert code == 0
    blob = json.loads((out / "report.json").read_text())
    assert blob["command"] == "run-theorem"
    assert blob["fn"] == "step2"
    assert len(blob["results"]) == 2
    csv_text = (out / "summary.csv").read_text()
    header, *rows = csv_text.strip().split("\n")
    assert header.startswith("fn,ynorm,lambda,eps,trial,cells")
    assert len(rows) == 2
    assert rows[0].split(",")[0] == "step2"
    assert rows[0].split(",")[-1] == "1"
    msg = capsys.readouterr().out
    assert "step2 eps=0.1" in msg


def test_run_theorem_multiple_eps(tmp_path):
    out = tmp_path / "t"
    code = run(["run-theorem", "--fn", "linear1", "--eps", "0.1",
                "--eps", "0.05", "--trials", "1", "--out", str(out)])
    assert code == 0
    blob = json.loads((out / "report.json").read_text())
    assert blob["eps"] == [0.1, 0.05]
    assert len(blob["results"]) == 2


def test_run_theorem_defaults_eps(tmp_path):
    out = tmp_path / "t"
    code = run(["run-theorem", "--fn", "constant", "--trials", "1",
                "--out", str(out)])
    assert code == 0
    blob = json.loads((out / "report.json").read_text())
    assert blob["eps"] == [0.1]


def test_byte_determinism(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    args = ["run-theorem", "--fn", "checker2d", "--eps", "0.1",
            "--trials", "3", "--seed", "11"]
    assert run(args + ["--out", str(a)]) == 0
    assert run(args + ["--out", str(b)]) == 0
    assert (a / "report.json").read_bytes() == (b / "report.json").read_bytes()
    assert (a / "summary.csv").read_bytes() == (b / "summary.csv").read_bytes()


def test_sabotage_modes_exit_two(tmp_path, capsys):
    for mode in ("inflate-delta", "overlap-cells", "offcenter-tags"):
        out = tmp_path / mode
        code = run(["run-theorem", "--fn", "linear1", "--eps", "0.1",
                    "--trials", "1", "--sabotage", mode, "--out", str(out)])
        assert code == 2, mode
        assert "BOUND VIOLATED" in capsys.readouterr().err


def test_unreachable_depth_exits_three(tmp_path, capsys):
    code = run(["run-theorem", "--fn", "spike1", "--eps", "0.1",
                "--trials", "1", "--max-depth", "6",
                "--out", str(tmp_path / "t")])
    assert code == 3
    assert "UNREACHABLE" in capsys.readouterr().err


def test_lusin_unreachable_for_smooth_entry(tmp_path, capsys):
    code = run(["run-lusin", "--fn", "lipschitz2d", "--eps", "0.1",
                "--out", str(tmp_path / "t")])
    assert code == 3
    assert "UNREACHABLE" in capsys.readouterr().err


def test_run_corollary(tmp_path):
    out = tmp_path / "c"
    code = run(["run-corollary", "--fn", "linear1", "--eps", "0.1",
                "--out", str(out)])
    assert code == 0
    blob = json.loads((out / "report.json").read_text())
    assert blob["command"] == "run-corollary"
    assert blob["results"][0]["pass_flags"]["mass_bounded"]
    header = (out / "summary.csv").read_text().split("\n")[0]
    assert header == ("fn,eps,riemann_gap,abs_total,worst_family_mass,"
                      "witness_mass,reconstruction_gap,ok")


def test_run_lusin_frozen_step2(tmp_path):
    out = tmp_path / "l"
    code = run(["run-lusin", "--fn", "step2", "--eps", "0.1",
                "--out", str(out)])
    assert code == 0
    blob = json.loads((out / "report.json").read_text())
    res = blob["results"][0]
    (a, b), (c, d) = res["pieces"]
    assert a == [0.0] and d == [1.0]
    assert b[0] == pytest.approx(0.475)
    assert c[0] == pytest.approx(0.525)
    assert res["separation"] == pytest.approx(0.05)
    assert res["omitted_measure"] == pytest.approx(0.05)


def test_lebesgue_map(tmp_path):
    out = tmp_path / "m"
    code = run(["lebesgue-map", "--fn", "step2", "--eps", "0.1",
                "--grid", "16", "--out", str(out)])
    assert code == 0
    lines = (out / "lebesgue_map.csv").read_text().strip().split("\n")
    assert lines[0] == "x0,delta"
    assert len(lines) == 17
    blob = json.loads((out / "report.json").read_text())
    assert blob["grid"] == 16
    assert 0 < blob["delta_min"] <= blob["delta_max"] <= 1


def test_lambda_validation():
    with pytest.raises(SystemExit):
        main(["run-theorem", "--fn", "linear1", "--lambda", "sqrt2"])
    with pytest.raises(SystemExit):
        main(["run-theorem", "--fn", "checker2d", "--lambda", "sqrt3"])


def test_dim_validation():
    with pytest.raises(SystemExit):
        main(["run-theorem", "--fn", "linear1", "--dim", "2"])


def test_unknown_fn_rejected():
    with pytest.raises(SystemExit):
        main(["run-theorem", "--fn", "mystery"])


def test_lambda_one_uses_sup_norm_family(tmp_path):
    out = tmp_path / "s"
    code = run(["run-theorem", "--fn", "checker2d", "--eps", "0.1",
                "--trials", "1", "--lambda", "1", "--out", str(out)])
    assert code == 0
    blob = json.loads((out / "report.json").read_text())
    assert blob["lambda"] == 1.0


def test_density_file_roundtrip(tmp_path):
    grid = tmp_path / "density.json"
    grid.write_text(json.dumps({"level": 0, "values": [2.0]}))
    out = tmp_path / "d"
    # uniform non-unit density: theorem pipeline accepts it
    code = run(["run-theorem", "--fn", "linear1", "--eps", "0.1",
                "--trials", "1", "--density", str(grid), "--out", str(out)])
    assert code == 0
    blob = json.loads((out / "report.json").read_text())
    assert blob["results"][0]["pass_flags"]["l1_partition_lt_eps"]
