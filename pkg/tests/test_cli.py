import json

import pytest

from multiplicity_lab import cli, experiments


def run(tmp_path, name, *extra):
    out = tmp_path / name
    code = cli.main(["run", name, "--out", str(out), *extra])
    return code, out / f"{name}.report.json"


def test_list(capsys):
    assert cli.main(["list"]) == 0
    names = capsys.readouterr().out
    for name in experiments.bundled_names():
        assert name in names


def test_run_and_verify_three_solutions(tmp_path, capsys):
    code, path = run(tmp_path, "three_roots_cos")
    assert code == 0
    report = json.loads(path.read_text())
    assert report["passed"] and report["witnesses"]
    assert (path.parent / "three_roots_cos.timings.json").exists()
    assert cli.main(["verify", str(path)]) == 0
    assert "verified" in capsys.readouterr().out


def test_perturbed_root_fails_verification(tmp_path):
    code, path = run(tmp_path, "three_roots_cos")
    report = json.loads(path.read_text())
    w = next(w for w in report["witnesses"] if "roots" in w)
    w["roots"][0][0] += 1e-2
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps(report))
    assert cli.main(["verify", str(bad)]) == 1


def test_report_without_witnesses_verifies_with_warning(tmp_path, capsys):
    code, path = run(tmp_path, "kirchhoff_validate")
    assert code == 0
    assert json.loads(path.read_text())["witnesses"] == []
    capsys.readouterr()
    assert cli.main(["verify", str(path)]) == 0
    assert "WARN" in capsys.readouterr().out


def test_rerun_and_threads_are_byte_identical(tmp_path):
    _, a = run(tmp_path / "a", "thm110_twopoint")
    _, b = run(tmp_path / "b", "thm110_twopoint", "--threads", "4")
    assert a.read_bytes() == b.read_bytes()


def test_kirchhoff_run_writes_state_csv(tmp_path):
    code, path = run(tmp_path, "kirchhoff_uniqueness")
    assert code == 0
    csvs = sorted(path.parent.glob("kirchhoff_uniqueness.state*.csv"))
    assert csvs and csvs[0].read_text().startswith("t,u")


@pytest.mark.parametrize("content", ["", "{}", "{\"kind\": \"nope\", \"name\": \"x\"}", "[1, 2]"])
def test_bad_config_is_a_usage_error(tmp_path, content):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(content)
    assert cli.main(["run", str(cfg), "--out", str(tmp_path / "o")]) == 2


def test_missing_config_and_bad_arguments():
    assert cli.main(["run", "no_such_experiment"]) == 2
    assert cli.main(["frobnicate"]) == 2
    assert cli.main([]) == 2


def test_scalar_oracle_command(capsys):
    assert cli.main(["oracle", "scalar-roots", "--J", "cos", "--a", "1.2", "--b", "0"]) == 0
    res = json.loads(capsys.readouterr().out)
    assert res["count"] == 3


def test_gap_oracle_command(capsys):
    args = ["oracle", "gap", "--f", "y*x", "--x-range", "-1", "1", "--nx", "2", "--y-range", "-1", "1"]
    assert cli.main(args) == 0
    res = json.loads(capsys.readouterr().out)
    assert res["inf_sup"] - res["sup_inf"] == pytest.approx(1.0)


def test_double_min_oracle_command(capsys):
    assert cli.main(["oracle", "double-min", "--config", "thm110_twopoint", "--y0", "0.025"]) == 0
    res = json.loads(capsys.readouterr().out)
    assert len(res["clusters"]) == 2
