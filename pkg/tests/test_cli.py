import json

from mgtlab.cli import main


def test_cli_roots(tmp_path, capsys):
    code = main(["roots", "--out", str(tmp_path), "--seed", "3"])
    out = capsys.readouterr().out
    assert code == 0 and "PASS" in out
    report = json.loads((tmp_path / "report.json").read_text())
    assert report["pass"] is True and report["spec"]["seed"] == 3


def test_cli_config_error(tmp_path, capsys):
    cfg = tmp_path / "bad.yaml"
    cfg.write_text("grid:\n  wrong: 1\n")
    assert main(["kernels", "--config", str(cfg)]) == 2
    assert "grid.wrong" in capsys.readouterr().err
