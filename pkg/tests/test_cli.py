import json

import pytest

from resilnet.cli import EXIT_CONFIG, EXIT_IO, EXIT_OK, main


def test_validate_lists_builtins(capsys):
    assert main(["validate"]) == EXIT_OK
    assert "coordinated" in capsys.readouterr().out.split()


def test_validate_scenario(capsys):
    assert main(["validate", "--scenario", "ddos"]) == EXIT_OK
    out = capsys.readouterr().out
    assert "scenario ddos: ok" in out and "iot_device=50" in out


def test_config_error_exit_code(capsys):
    assert main(["validate", "--scenario", "no_such_scenario"]) == EXIT_CONFIG
    assert "error:" in capsys.readouterr().err


def test_io_error_exit_code(tmp_path, capsys):
    assert main(["validate", "--scenario", str(tmp_path / "missing.toml")]) == EXIT_IO


def test_unwritable_output_is_io_error(tmp_path):
    blocker = tmp_path / "f"
    blocker.write_text("x")
    code = main(["run", "--scenario", "no_attack", "--duration", "150", "--out", str(blocker / "o")])
    assert code == EXIT_IO


def test_run_writes_reports(tmp_path, capsys):
    code = main(["run", "--scenario", "ddos", "--duration", "600", "--strategy", "baseline_static",
                 "--out", str(tmp_path), "--format", "json"])
    assert code == EXIT_OK
    assert "ri_mean" in capsys.readouterr().out
    names = sorted(p.name for p in tmp_path.iterdir())
    assert names == ["ddos_baseline_static_runs.json", "ddos_baseline_static_series.json",
                     "ddos_baseline_static_summary.json"]
    summary = json.loads((tmp_path / "ddos_baseline_static_summary.json").read_text())
    assert summary["runs"] == 1


def test_compare_writes_paired_deltas(tmp_path):
    code = main(["compare", "--scenario", "no_attack", "--duration", "150", "--runs", "2",
                 "--strategy", "proposed", "--strategy", "baseline_static", "--out", str(tmp_path)])
    assert code == EXIT_OK
    assert (tmp_path / "no_attack_compare_proposed_vs_baseline_static.csv").exists()


def test_oracle_verb(capsys):
    assert main(["oracle", "--trials", "20000"]) == EXIT_OK
    out = capsys.readouterr().out
    assert "0.9745558179" in out


def test_bad_arguments_exit_via_argparse():
    with pytest.raises(SystemExit) as exc:
        main(["run", "--strategy", "nope"])
    assert exc.value.code == 2
