import pathlib

import numpy as np
import pytest

from rirsf.config import ExperimentConfig, load_config
from rirsf.experiment import (REPORT_COLUMNS, _aggregate, UtteranceResult, evaluate_utterance,
                              run_experiment, sample_room)
from rirsf.room import absorption_from_rt60

SMOKE = pathlib.Path(__file__).resolve().parents[1] / "configs" / "smoke.cfg"


@pytest.fixture(scope="module")
def smoke_report():
    return run_experiment(load_config(SMOKE).replace(seed=7))


class TestSampling:
    @pytest.mark.parametrize("band", ["weak", "strong"])
    def test_rooms_in_bounds(self, band):
        cfg = ExperimentConfig()
        rng = np.random.default_rng(0)
        for _ in range(50):
            room, arr = sample_room(cfg, band, rng)
            assert room.within_protocol()
            lo, hi = cfg.band(band)
            assert lo <= room.rt60 <= hi
            absorption_from_rt60(room)
            assert all(room.contains(p, 0.49) for p in arr.mic_positions)


class TestRunExperiment:
    def test_one_row_per_key(self, smoke_report):
        keys = [(r["band"], r["scenario"], r["feature"], r["k"]) for r in smoke_report.rows]
        assert len(keys) == len(set(keys)) == 2 * 3 * (1 + 3)
        assert all(r["n_utterances"] == 4 for r in smoke_report.rows)
        assert not smoke_report.failures

    def test_metric_ranges(self, smoke_report):
        for r in smoke_report.rows:
            assert 0.0 <= r["auc"] <= 1.0
            assert -1.0 <= r["lps_correlation"] <= 1.0

    def test_rsf_k1_row_equals_sf(self, smoke_report):
        for band in ("weak", "strong"):
            for scen in ("ideal", "sce1", "sce2"):
                a, b = smoke_report.row(band, scen, "sf", 1), smoke_report.row(band, scen, "rsf", 1)
                for m in REPORT_COLUMNS[5:]:
                    assert a[m] == pytest.approx(b[m], abs=1e-9)

    def test_csv(self, smoke_report):
        text = smoke_report.to_csv()
        assert text.isascii() and "\r" not in text
        assert text.splitlines()[0] == ",".join(REPORT_COLUMNS)

    def test_order_independent(self):
        cfg = load_config(SMOKE).replace(seed=7, rooms=1, utterances=2, bands=("weak",), scenarios=("ideal",))
        jobs = [(cfg, "weak", 0, u) for u in range(2)]
        fwd = _aggregate(cfg, [evaluate_utterance(*j) for j in jobs])
        rev = _aggregate(cfg, [evaluate_utterance(*j) for j in reversed(jobs)])
        assert fwd.to_csv() == rev.to_csv()

    def test_failures_recorded(self, monkeypatch):
        import rirsf.experiment as ex
        cfg = load_config(SMOKE).replace(rooms=1, utterances=2, bands=("weak",), scenarios=("ideal",))
        real = ex.build_utterance

        def flaky(cfg_, band, room, utt):
            if utt == 1:
                raise ValueError("synthetic failure")
            return real(cfg_, band, room, utt)

        monkeypatch.setattr(ex, "build_utterance", flaky)
        rep = run_experiment(cfg)
        assert rep.failures == [("weak", 0, 1, "ValueError: synthetic failure")]
        assert all(r["n_utterances"] == 1 for r in rep.rows)
        assert "synthetic failure" in rep.failures_text()

    def test_all_failed_rows_are_nan(self):
        cfg = ExperimentConfig(rooms=1, utterances=1, bands=("weak",), scenarios=("ideal",), k=(2,))
        rep = _aggregate(cfg, [UtteranceResult(("weak", 0, 0), error="boom")])
        assert all(np.isnan(r["auc"]) and r["n_utterances"] == 0 for r in rep.rows)
