import json
import subprocess
import sys

import pytest

from fas_aris import cli
from fas_aris.errors import FasArisError


def _write(path, text):
    path.write_text(text, encoding="utf-8")
    return str(path)


class TestCommands:
    def test_run_json(self, tmp_path, capsys):
        conf = _write(tmp_path / "c.cfg", "n_antennas = 2\nm_elements = 2\n")
        assert cli.main(["run", "--config", conf, "--seed", "3", "--scheme", "fpa", "--json"]) == 0
        out = json.loads(capsys.readouterr().out)
        assert out["scheme"] == "fpa" and out["feasible"] and out["rate_bits"] > 0

    def test_config_error_exit_code(self, tmp_path, capsys):
        conf = _write(tmp_path / "c.cfg", "n_antenas = 2\n")
        assert cli.main(["run", "--config", conf]) == 2
        assert "config error" in capsys.readouterr().err
        assert cli.main(["run", "--scheme", "bogus"]) == 2

    def test_runtime_error_exit_code(self, monkeypatch, capsys):
        def boom(*a, **k):
            raise FasArisError("solver gave up")
        monkeypatch.setattr("fas_aris.bench.run_scheme", boom)
        assert cli.main(["run"]) == 1
        assert "solver gave up" in capsys.readouterr().err

    def test_sweep_writes_files(self, tmp_path, capsys):
        conf = _write(tmp_path / "c.cfg", "n_antennas = 2\nm_elements = 2\n")
        spec = _write(tmp_path / "s.spec", "parameter = m_elements\nvalues = 1 2\nschemes = fpa\ntrials = 1\n")
        out = tmp_path / "out"
        assert cli.main(["sweep", "--config", conf, "--spec", spec, "--out", str(out)]) == 0
        assert {p.name for p in out.iterdir()} == {"sweep.csv", "sweep_summary.csv", "sweep_meta.json"}
        assert "m_elements=2" in capsys.readouterr().out

    def test_selftest_failure_exit_code(self, monkeypatch):
        from fas_aris import selftest as st

        bad = st.SelfTestReport([st.CheckResult("x", False, 1.0, 0.0)])
        monkeypatch.setattr(st, "selftest", lambda *a, **k: bad)
        assert cli.main(["selftest"]) == 1

    def test_unknown_figure_rejected_by_parser(self):
        with pytest.raises(SystemExit):
            cli.main(["figure", "bogus", "--out", "x"])


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "fas_aris", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0 and "selftest" in proc.stdout
