import csv
import json
import math
from pathlib import Path

import pytest

from magres.cli import EXIT_CONFIG, EXIT_IO, EXIT_OK, EXIT_TASK, apply_parameter, main
from magres.config import ConfigError, dump_config, load_spec, spec_from_dict, spec_to_dict
from magres.tasks import default_spec

CONFIGS = Path(__file__).resolve().parents[1] / "configs"

SMALL_MG = """
[experiment]
task = "mackey_glass"
sizes = [10, 30]
replicates = 2
train_len = 400
test_len = 60
horizons = [20, 60]
transient = 100
"""

SMALL_EQ = """
[experiment]
task = "equalization"
sizes = [10]
replicates = 2
train_len = 400
test_len = 200
"""


def _write(tmp_path, text, name="cfg.toml"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def _rows(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


class TestCharacterize:
    def test_table(self, tmp_path):
        cfg = _write(tmp_path, "[device]\nalpha0 = 0.05\n[characterize]\nn_points = 11\nsamples_per_point = 500\n")
        assert main(["characterize", "--config", cfg, "--out", str(tmp_path / "o")]) == EXIT_OK
        rows = _rows(tmp_path / "o" / "transfer.csv")
        assert rows[0] == ["v_in", "mean", "min", "max"]
        assert len(rows) == 12
        manifest = json.loads((tmp_path / "o" / "manifest.json").read_text())
        assert manifest["outputs"] == ["transfer.csv"]

    def test_noiseless_matches_curve(self, tmp_path):
        cfg = _write(tmp_path, "[device]\nalpha0 = 0.0\nbeta = 10.0\n[characterize]\nn_points = 9\n"
                               "samples_per_point = 3\n")
        assert main(["characterize", "--config", cfg, "--out", str(tmp_path / "o"), "--format", "json"]) == 0
        for v, mean, lo, hi in _rows(tmp_path / "o" / "transfer.csv")[1:]:
            expect = 0.4 * math.tanh(10.0 * float(v))
            assert float(mean) == pytest.approx(expect, rel=1e-8, abs=1e-12)
            assert lo == mean == hi
        assert (tmp_path / "o" / "transfer.json").exists()

    def test_bad_device(self, tmp_path):
        cfg = _write(tmp_path, "[device]\nbeta = -1.0\n")
        assert main(["characterize", "--config", cfg, "--out", str(tmp_path / "o")]) == EXIT_CONFIG


class TestRun:
    def test_missing_config(self, tmp_path):
        assert main(["run", "--config", str(tmp_path / "nope.toml")]) == EXIT_CONFIG

    def test_unknown_key(self, tmp_path):
        cfg = _write(tmp_path, SMALL_EQ + "\n[reservoir]\nspectral = 0.9\n")
        assert main(["run", "--config", cfg, "--out", str(tmp_path / "o")]) == EXIT_CONFIG

    def test_bad_flag(self):
        assert main(["run"]) == EXIT_CONFIG

    def test_byte_identical_reruns(self, tmp_path):
        cfg = _write(tmp_path, SMALL_MG)
        for d in ("a", "b"):
            assert main(["run", "--config", cfg, "--seed", "5", "--out", str(tmp_path / d)]) == EXIT_OK
        for name in ("report.json", "mg_trace_N10.csv", "config.toml"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()

    def test_mg_report_blocks(self, tmp_path):
        cfg = _write(tmp_path, SMALL_MG)
        assert main(["run", "--config", cfg, "--out", str(tmp_path / "o"), "--format", "csv"]) == EXIT_OK
        report = json.loads((tmp_path / "o" / "report.json").read_text())
        assert set(report["nrmse"]) == {"10", "30"}
        assert set(report["nrmse"]["10"]) == {"20", "60"}
        assert len(report["nrmse"]["30"]["60"]["values"]) == 2
        assert report["srr"] is None
        rows = _rows(tmp_path / "o" / "report.csv")
        assert rows[0] == ["n_nodes", "metric", "median", "iqr", "n_seeds"]
        assert [r[:2] for r in rows[1:]] == [["10", "nrmse_h60"], ["30", "nrmse_h60"]]

    def test_identity_channel_is_task_failure(self, tmp_path, capsys):
        cfg = _write(tmp_path, SMALL_EQ + "\n[task]\nfir_taps = [1.0]\npoly_coeffs = [0.0, 1.0]\nnoise_amp = 0.0\n")
        assert main(["run", "--config", cfg, "--out", str(tmp_path / "o")]) == EXIT_TASK
        assert "SRR" in capsys.readouterr().err

    def test_seed_fallback_env(self, tmp_path, monkeypatch):
        cfg = _write(tmp_path, SMALL_EQ)
        monkeypatch.setenv("MAGRES_SEED", "9")
        assert main(["run", "--config", cfg, "--out", str(tmp_path / "env")]) == EXIT_OK
        monkeypatch.delenv("MAGRES_SEED")
        assert main(["run", "--config", cfg, "--seed", "9", "--out", str(tmp_path / "flag")]) == EXIT_OK
        a = json.loads((tmp_path / "env" / "report.json").read_text())
        b = json.loads((tmp_path / "flag" / "report.json").read_text())
        assert a["seed"] == 9 and a == b

    def test_manifest_lists_outputs(self, tmp_path):
        cfg = _write(tmp_path, SMALL_EQ)
        out = tmp_path / "o"
        assert main(["run", "--config", cfg, "--out", str(out)]) == EXIT_OK
        manifest = json.loads((out / "manifest.json").read_text())
        on_disk = sorted(p.name for p in out.iterdir() if p.name != "manifest.json")
        assert sorted(manifest["outputs"]) == on_disk
        assert len(manifest["spec_hash"]) == 64
        assert {"toolkit_version", "seed", "wall_time"} <= set(manifest)

    def test_written_config_reproduces(self, tmp_path):
        cfg = _write(tmp_path, SMALL_EQ)
        assert main(["run", "--config", cfg, "--seed", "3", "--out", str(tmp_path / "a")]) == EXIT_OK
        again = str(tmp_path / "a" / "config.toml")
        assert main(["run", "--config", again, "--out", str(tmp_path / "b")]) == EXIT_OK
        assert (tmp_path / "a" / "report.json").read_bytes() == (tmp_path / "b" / "report.json").read_bytes()

    def test_unwritable_output(self, tmp_path):
        cfg = _write(tmp_path, SMALL_EQ)
        blocker = tmp_path / "file"
        blocker.write_text("x")
        assert main(["run", "--config", cfg, "--out", str(blocker / "sub")]) == EXIT_IO


class TestSweep:
    def test_size_sweep(self, tmp_path):
        cfg = _write(tmp_path, SMALL_EQ)
        out = tmp_path / "s"
        argv = ["sweep", "--config", cfg, "--param", "n_nodes", "--values", "5", "10", "15", "20", "--out", str(out)]
        assert main(argv) == EXIT_OK
        rows = _rows(out / "sweep.csv")
        assert rows[0] == ["value", "n_nodes", "metric", "median", "iqr", "n_seeds"]
        assert [r[0] for r in rows[1:]] == ["5", "10", "15", "20"]
        assert all(r[1] == r[0] and r[2] == "srr" and r[5] == "2" for r in rows[1:])
        assert (out / "n_nodes=15" / "report.json").exists()

    def test_single_value_matches_run(self, tmp_path):
        cfg = _write(tmp_path, SMALL_EQ)
        assert main(["sweep", "--config", cfg, "--param", "reservoir.leak", "--values", "0.5",
                     "--out", str(tmp_path / "s")]) == EXIT_OK
        cfg2 = _write(tmp_path, SMALL_EQ + "\n[reservoir]\nleak = 0.5\n", "cfg2.toml")
        assert main(["run", "--config", cfg2, "--out", str(tmp_path / "r")]) == EXIT_OK
        swept = json.loads((tmp_path / "s" / "reservoir.leak=0.5" / "report.json").read_text())
        ran = json.loads((tmp_path / "r" / "report.json").read_text())
        assert swept["srr"] == ran["srr"]

    def test_parallel_matches_serial(self, tmp_path):
        cfg = _write(tmp_path, SMALL_EQ)
        base = ["sweep", "--config", cfg, "--param", "input_scale", "--values", "1", "3"]
        assert main(base + ["--out", str(tmp_path / "a")]) == EXIT_OK
        assert main(base + ["--out", str(tmp_path / "b"), "--jobs", "2"]) == EXIT_OK
        assert (tmp_path / "a" / "sweep.csv").read_bytes() == (tmp_path / "b" / "sweep.csv").read_bytes()

    def test_unknown_parameter(self, tmp_path):
        cfg = _write(tmp_path, SMALL_EQ)
        argv = ["sweep", "--config", cfg, "--param", "warp_factor", "--values", "1", "--out", str(tmp_path / "s")]
        assert main(argv) == EXIT_CONFIG

    def test_apply_parameter_rules(self):
        spec = default_spec("mackey_glass")
        assert apply_parameter(spec, "ridge.lambda", 0.1).ridge.lam == 0.1
        assert apply_parameter(spec, "tau_delay", 30).task_params.tau_delay == 30.0
        assert apply_parameter(spec, "train_len", 1000).train_len == 1000
        with pytest.raises(ConfigError):
            apply_parameter(spec, "n_nodes", 2.5)
        with pytest.raises(ConfigError):
            apply_parameter(spec, "leak", 0.0)
        with pytest.raises(ConfigError):
            apply_parameter(spec, "reservoir.tau_delay", 1.0)


@pytest.mark.parametrize("name", ["mackey_glass.toml", "equalization.toml"])
def test_config_round_trip(name, tmp_path):
    spec = load_spec(CONFIGS / name, seed=4)
    text = dump_config(spec_to_dict(spec))
    (tmp_path / "c.toml").write_text(text)
    again = load_spec(tmp_path / "c.toml")
    assert again == spec
    assert dump_config(spec_to_dict(again)) == text


def test_config_requires_task():
    with pytest.raises(ConfigError):
        spec_from_dict({"experiment": {}})
