import csv
import json

import pytest

from sbscatter import cli
from sbscatter.config import ConfigError, RunConfig, validate
from sbscatter.spectral import TrackingError

SMALL = """
[model]
g = {g}
N_max = 1
[model.grid]
M = 24
"""


def write(tmp_path, text, name="cfg.toml"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def test_validate_default(capsys):
    assert cli.main(["validate"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert all(c["ok"] for c in out["checks"])
    assert len(out["config_hash"]) == 64


@pytest.mark.parametrize("text,needle", [
    ("[model]\ntheta = [0.0, 0.2]\n", "dilation"),
    ("[model.form]\nmu = 0.6\n", "form factor"),
    ("[multiscale]\nrho0 = 0.3\n", "multiscale inequalities"),
    ("packets = [[0.2, 0.3]]\npairs = [[0, 0]]\n", "packets"),
])
def test_validate_rejects(tmp_path, capsys, text, needle):
    assert cli.main(["validate", "--config", write(tmp_path, text)]) == 2
    out = json.loads(capsys.readouterr().out)
    bad = [c["check"] for c in out["checks"] if not c["ok"]]
    assert any(needle in b for b in bad)


def test_unknown_key_and_bad_toml(tmp_path, capsys):
    assert cli.main(["validate", "--config", write(tmp_path, "[model]\nspin = 2\n")]) == 2
    assert "unknown key 'model.spin'" in capsys.readouterr().out
    assert cli.main(["spectrum", "--config", write(tmp_path, "model = [", "b.toml")]) == 2
    assert cli.main(["spectrum", "--config", str(tmp_path / "missing.toml")]) == 2


def test_invalid_config_blocks_run(tmp_path):
    path = write(tmp_path, "[model]\ntheta = [0.0, 0.3]\n")
    assert cli.main(["spectrum", "--config", path, "--out", str(tmp_path / "o")]) == 2


def test_config_hash():
    a, b = RunConfig.default(), RunConfig({"model": {"g": 0.2}})
    assert a.hash == RunConfig.default().hash and a.hash != b.hash
    assert RunConfig({"output_dir": "elsewhere"}).hash == a.hash
    with pytest.raises(ConfigError):
        RunConfig({"model": 3})
    assert all(r["ok"] for r in validate(a))


def test_spectrum_free_model(tmp_path):
    out = tmp_path / "o"
    code = cli.main(["spectrum", "--config", write(tmp_path, SMALL.format(g=0.0)),
                     "--out", str(out)])
    assert code == 0
    s = json.loads((out / "summary.json").read_text())
    assert s["results"]["lambda0"] == [0.0, 0.0]
    assert s["results"]["lambda1"] == [1.0, 0.0]
    assert s["pass"] and s["timings"]["total_s"] >= 0


def test_deterministic_runs_identical(tmp_path):
    cfg = write(tmp_path, SMALL.format(g=0.1))
    texts = []
    for k in range(2):
        out = tmp_path / f"run{k}"
        assert cli.main(["kernel", "--config", cfg, "--out", str(out), "--deterministic"]) == 0
        texts.append([(out / f).read_bytes() for f in ("summary.json", "kernel.csv", "smeared.csv")])
    assert texts[0] == texts[1]
    s = json.loads((tmp_path / "run0" / "summary.json").read_text())
    assert s["timings"] is None and s["deterministic"]


def test_plemelj_check_table(tmp_path):
    out = tmp_path / "p"
    assert cli.main(["plemelj-check", "--out", str(out), "--threads", "1"]) == 0
    with open(out / "plemelj.csv", newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 4 * 5
    assert all(float(r["defect"]) <= 5 * float(r["alpha"]) for r in rows)


def test_numerical_failure_exit_code(tmp_path, monkeypatch, capsys):
    def boom(cfg, out):
        raise TrackingError("ambiguous continuation")

    monkeypatch.setitem(cli.RUNNERS, "spectrum", boom)
    assert cli.main(["spectrum", "--out", str(tmp_path / "x")]) == 3
    assert "TrackingError" in capsys.readouterr().out


def test_acceptance_failure_exit_code(tmp_path, monkeypatch):
    monkeypatch.setitem(cli.RUNNERS, "spectrum",
                        lambda cfg, out: ({}, [{"check": "forced", "pass": False}]))
    assert cli.main(["spectrum", "--out", str(tmp_path / "y")]) == 1


def test_module_entry_point():
    import runpy
    with pytest.raises(SystemExit) as exc:
        runpy.run_module("sbscatter", run_name="__main__", alter_sys=True)
    assert exc.value.code == 2  # argparse: missing command
