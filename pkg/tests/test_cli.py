import json
import os
import subprocess
import sys

import pytest

from linresp.cli import main

CONFIGS = os.path.join(os.path.dirname(__file__), os.pardir, "configs")


def cfg(name):
    return os.path.join(CONFIGS, name)


def run(argv, capsys):
    code = main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def test_respond_writes_curve_and_fit(tmp_path, capsys):
    code, out, _ = run(["respond", "--config", cfg("tent19_conj.json"), "--out", str(tmp_path)],
                       capsys)
    assert code == 0 and "PASS respond" in out
    assert (tmp_path / "response.csv").exists()
    fit = json.loads((tmp_path / "fit.json").read_text())
    assert fit["mode"] == "linear" and fit["rel_err"] <= 0.02


def test_non_horizontal_psi1_reports_error(tmp_path, capsys):
    code, _, err = run(["psi1", "--config", cfg("nonhorizontal.json"), "--out", str(tmp_path)],
                       capsys)
    assert code == 1
    assert json.loads(err.strip().splitlines()[-1])["error"] == "NotHorizontal"


def test_config_errors(tmp_path, capsys):
    code, _, err = run(["density", "--config", str(tmp_path / "missing.json")], capsys)
    assert code == 2 and "ConfigError" in err
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert run(["density", "--config", str(bad), "--out", str(tmp_path)], capsys)[0] == 2
    fam = tmp_path / "fam.json"
    fam.write_text(json.dumps({"map": {"family": "tent", "slope": 1.9}}))
    assert run(["tangent-pair", "--config", str(fam), "--out", str(tmp_path)], capsys)[0] == 2


def test_outputs_are_deterministic(tmp_path, capsys):
    a, b = tmp_path / "a", tmp_path / "b"
    for d in (a, b):
        assert run(["decompose", "--config", cfg("tent19_conj.json"), "--out", str(d),
                    "--grid", "1024"], capsys)[0] == 0
    assert (a / "decomposition.csv").read_bytes() == (b / "decomposition.csv").read_bytes()
    assert (a / "decomposition.json").read_bytes() == (b / "decomposition.json").read_bytes()


def test_full_precision_output(tmp_path, capsys):
    run(["validate", "--config", cfg("tent19_conj.json"), "--out", str(tmp_path)], capsys)
    info = json.loads((tmp_path / "map.json").read_text())
    assert info["critical_value"] == 0.95
    assert info["orbit_class"]["kind"] == "none"


@pytest.mark.parametrize("command, produced", [
    ("tce", "tce.csv"), ("horizontality", "horizontality.json"),
    ("susceptibility", "series.csv"), ("pt-derivative", "pt_derivative.json")])
def test_subcommands_produce_files(command, produced, tmp_path, capsys):
    code, out, _ = run([command, "--config", cfg("tent19_conj.json"), "--out", str(tmp_path),
                        "--grid", "2048"], capsys)
    assert code == 0 and f"PASS {command}" in out
    assert (tmp_path / produced).exists()


def test_console_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "linresp.cli", "validate", "--out",
                           str(tmp_path)], capture_output=True, text=True)
    assert proc.returncode == 0 and "PASS validate" in proc.stdout
