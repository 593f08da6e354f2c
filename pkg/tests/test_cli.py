import os
import re
import subprocess
import sys

import numpy as np
import pytest

from rirsf.cli import main
from rirsf.io import read_tensor

TINY = """
[experiment]
rooms = 1
utterances = 1
duration = 1.0
bands = strong
scenarios = ideal, sce1
[features]
k = 1, 10
"""


@pytest.fixture(scope="module")
def tiny_cfg(tmp_path_factory):
    path = tmp_path_factory.mktemp("cfg") / "tiny.cfg"
    path.write_text(TINY)
    return str(path)


@pytest.fixture(scope="module")
def mixed(tmp_path_factory, tiny_cfg):
    out = str(tmp_path_factory.mktemp("run"))
    assert main(["--config", tiny_cfg, "--out", out, "--seed", "3", "mix"]) == 0
    return out


def tree(root):
    files = {}
    for dp, _, fs in os.walk(root):
        for f in fs:
            p = os.path.join(dp, f)
            with open(p, "rb") as fh:
                files[os.path.relpath(p, root)] = fh.read()
    return files


class TestUsage:
    def test_unknown_command(self, capsys):
        assert main(["frobnicate"]) == 1
        assert "usage" in capsys.readouterr().err

    def test_unknown_flag(self, capsys, tmp_path):
        assert main(["--out", str(tmp_path), "eval", "--bogus"]) == 1
        assert "usage" in capsys.readouterr().err

    def test_missing_command(self, capsys):
        assert main([]) == 1

    def test_help(self, capsys):
        assert main(["--help"]) == 0
        assert "simulate" in capsys.readouterr().out

    def test_bad_k(self, tmp_path):
        assert main(["--out", str(tmp_path), "features", "--k", "ten"]) == 1

    def test_bad_count(self, tmp_path, capsys):
        assert main(["--out", str(tmp_path), "simulate", "--rooms", "0"]) == 1


class TestDataErrors:
    def test_bad_config(self, tmp_path, capsys):
        cfg = tmp_path / "bad.cfg"
        cfg.write_text("[experiment]\nrooms = -2\n")
        assert main(["--config", str(cfg), "--out", str(tmp_path / "o"), "eval"]) == 2
        assert "rooms" in capsys.readouterr().err
        assert not (tmp_path / "o").exists()  # rejected before any work

    def test_report_without_inputs(self, tmp_path):
        assert main(["--out", str(tmp_path), "report"]) == 2

    def test_features_without_bundles(self, tmp_path):
        assert main(["--out", str(tmp_path), "features"]) == 2

    def test_plot_bad_tensor(self, tmp_path):
        bad = tmp_path / "x.rsft"
        bad.write_bytes(b"garbage")
        assert main(["--out", str(tmp_path), "plot", "--tensor", str(bad)]) == 2


class TestCommands:
    def test_simulate_then_report(self, tmp_path, capsys):
        out = str(tmp_path)
        assert main(["--out", out, "simulate", "--rt60", "0.6", "--rooms", "1"]) == 0
        assert read_tensor(tmp_path / "rirs" / "room000.rsft").data.shape[0] == 8
        capsys.readouterr()
        assert main(["--out", out, "report"]) == 0
        text = capsys.readouterr().out
        measured = float(re.search(r"measured ([0-9.]+) s", text).group(1))
        assert measured == pytest.approx(0.6, rel=0.2)

    def test_mix_bundle(self, mixed):
        files = sorted(os.listdir(os.path.join(mixed, "mix", "strong_r000_u00")))
        assert files == ["interferer.wav", "meta.txt", "mixture.wav", "target.wav", "target_rir.rsft"]

    def test_k1_equals_sf(self, mixed):
        assert main(["--out", mixed, "features", "--k", "1"]) == 0
        assert main(["--out", mixed, "features", "--feature", "sf"]) == 0
        d = os.path.join(mixed, "features", "strong_r000_u00")
        a = read_tensor(os.path.join(d, "rsf_k1_ideal.rsft"))
        b = read_tensor(os.path.join(d, "sf_k1_ideal.rsft"))
        assert np.max(np.abs(a.data - b.data)) <= 1e-6
        assert a.meta["kind"] == "rsf" and a.meta["pairs"] == "0-7,1-6,2-5,3-4"

    def test_k_in_seconds(self, mixed):
        assert main(["--out", mixed, "features", "--k", "0.16s", "--scenario", "sce1"]) == 0
        assert os.path.exists(os.path.join(mixed, "features", "strong_r000_u00", "rsf_k10_sce1.rsft"))

    def test_plot(self, mixed):
        assert main(["--out", mixed, "features", "--k", "10"]) == 0
        assert main(["--out", mixed, "plot"]) == 0
        plots = os.listdir(os.path.join(mixed, "plots"))
        assert "strong_r000_u00_rsf_k10_ideal.pgm" in plots and "strong_r000_u00_mask.pgm" in plots

    def test_eval_and_report(self, tmp_path, tiny_cfg, capsys):
        out = str(tmp_path)
        assert main(["eval", "--config", tiny_cfg, "--seed", "7", "--out", out]) == 0
        lines = (tmp_path / "report.csv").read_bytes().split(b"\n")
        assert lines[0] == b"band,scenario,feature,k,n_utterances,mean_on_target,mean_on_interferer,auc,lps_correlation"
        assert len([ln for ln in lines[1:] if ln]) == 2 * 1 + 2 * 2
        assert b"\r" not in (tmp_path / "report.csv").read_bytes()
        capsys.readouterr()
        assert main(["--out", out, "report"]) == 0
        assert "AUC" in capsys.readouterr().out

    def test_deterministic_outputs(self, tmp_path, tiny_cfg):
        for run in ("a", "b"):
            out = str(tmp_path / run)
            assert main(["--config", tiny_cfg, "--seed", "5", "--out", out, "mix"]) == 0
            assert main(["--out", out, "features", "--k", "2"]) == 0
        assert tree(tmp_path / "a") == tree(tmp_path / "b")

    def test_writes_only_under_out(self, tmp_path, tiny_cfg, monkeypatch):
        cwd = tmp_path / "cwd"
        cwd.mkdir()
        monkeypatch.chdir(cwd)
        assert main(["--config", tiny_cfg, "--out", str(tmp_path / "o"), "simulate", "--rooms", "1"]) == 0
        assert os.listdir(cwd) == []

    def test_console_script(self, tmp_path):
        res = subprocess.run([sys.executable, "-m", "rirsf.cli", "--out", str(tmp_path), "report"],
                             capture_output=True, text=True)
        assert res.returncode == 2
        assert "report.csv" in res.stderr
