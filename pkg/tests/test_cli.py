"""CLI subcommands and exit codes."""

import json
import os

import pytest

from editloop.cli import (
    EXIT_EVAL,
    EXIT_LAYOUT,
    EXIT_OK,
    _parse_canvas,
    _parse_seeds,
    main,
)


def test_seed_and_canvas_parsing():
    assert _parse_seeds("3..6") == [3, 4, 5, 6]
    assert _parse_seeds("1,5,9") == [1, 5, 9]
    assert _parse_canvas("128x96") == (128, 96)


@pytest.fixture(scope="module")
def golden(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    bench = str(root / "bench")
    out = str(root / "out")
    report = str(root / "report.json")
    assert main(["genbench", "--seeds", "70..72", "--out", bench,
                 "--canvas", "96x96"]) == EXIT_OK
    assert main(["run", "--bench", bench, "--backend", "symbolic",
                 "--planner", "rule", "--out", out]) == EXIT_OK
    assert main(["eval", "--bench", bench, "--outputs", out,
                 "--report", report, "--quiet"]) == EXIT_OK
    return bench, out, report


def test_golden_pipeline_scores(golden):
    _, _, report_path = golden
    report = json.load(open(report_path))
    assert report["overall"]["if_score"] == 1.0
    assert report["overall"]["ic_score"] == 1.0


def test_eval_mismatched_directories_exit_code(golden, tmp_path, capsys):
    bench, _, _ = golden
    code = main(["eval", "--bench", str(tmp_path / "nothing"),
                 "--outputs", str(tmp_path / "nope"),
                 "--report", str(tmp_path / "r.json")])
    assert code in (EXIT_LAYOUT, EXIT_EVAL)


def test_drift_report_over_degrading_run(golden, tmp_path, capsys):
    bench, _, symbolic_report = golden
    out2 = str(tmp_path / "deg-out")
    report2 = str(tmp_path / "deg-report.json")
    assert main(["run", "--bench", bench, "--backend", "degrading",
                 "--planner", "rule", "--out", out2]) == EXIT_OK
    assert main(["eval", "--bench", bench, "--outputs", out2,
                 "--report", report2, "--quiet"]) == EXIT_OK
    csv_path = str(tmp_path / "drift.csv")
    assert main(["report", "--inputs", symbolic_report, report2,
                 "--drift", "--csv", csv_path]) == EXIT_OK
    captured = capsys.readouterr().out
    assert "slope" in captured
    assert os.path.exists(csv_path)
    header = open(csv_path).readline().strip()
    assert header == "system,metric,turn,value"


def test_env_variable_defaults(golden, tmp_path, monkeypatch):
    bench, _, _ = golden
    out = str(tmp_path / "env-out")
    monkeypatch.setenv("EDITLOOP_BENCH", bench)
    monkeypatch.setenv("EDITLOOP_OUT", out)
    # Rebuild the parser under the patched environment.
    import importlib
    import editloop.cli as cli_module
    importlib.reload(cli_module)
    try:
        assert cli_module.main(["run", "--backend", "symbolic",
                                "--planner", "rule"]) == EXIT_OK
        assert os.path.isdir(out)
    finally:
        monkeypatch.undo()
        importlib.reload(cli_module)


def test_help_mentions_env_vars(capsys):
    with pytest.raises(SystemExit):
        main(["run", "--help"])
    out = capsys.readouterr().out
    assert "EDITLOOP_BENCH" in out and "EDITLOOP_BACKEND" in out


def test_config_file_layer_under_environment(golden, tmp_path, monkeypatch):
    bench, _, _ = golden
    import importlib
    import json as json_module
    import editloop.cli as cli_module

    out_from_file = str(tmp_path / "from-file")
    config_path = str(tmp_path / "editloop.json")
    json_module.dump({"bench": bench, "out": out_from_file},
                     open(config_path, "w"))
    try:
        # File supplies both paths.
        assert cli_module.main(["--config", config_path, "run",
                                "--backend", "symbolic"]) == EXIT_OK
        assert os.path.isdir(out_from_file)
        # Environment overrides the file for OUT.
        out_from_env = str(tmp_path / "from-env")
        monkeypatch.setenv("EDITLOOP_OUT", out_from_env)
        assert cli_module.main(["--config", config_path, "run",
                                "--backend", "symbolic"]) == EXIT_OK
        assert os.path.isdir(out_from_env)
    finally:
        monkeypatch.undo()
        importlib.reload(cli_module)
