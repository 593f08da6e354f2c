"""End-to-end acceptance criteria 1-9, each at its stated tolerance and time budget.

Every test logs one PASS/FAIL line; the lines are repeated in the pytest
terminal summary under "acceptance criteria".
"""
import os
import pathlib
import shutil
import time

import numpy as np
import pytest

from rirsf.cli import main as cli_main
from rirsf.config import load_config
from rirsf.dsp import FrameParams, Spectrogram, Waveform, istft, matched_filter_time_axis, stft
from rirsf.experiment import run_experiment, sample_room, sample_speaker
from rirsf.features import compute_c_kernel, compute_rsf, compute_sf, kernel_concentration
from rirsf.room import (AcousticsError, ArrayGeometry, CtfFilter, RoomSpec, absorption_from_rt60,
                        ctf_from_rir, measure_rt60, simulate_rir, synth_reverberant)
from rirsf.sources import derive_seed, speech_like

pytestmark = pytest.mark.acceptance

CONFIGS = pathlib.Path(__file__).resolve().parents[1] / "configs"
MARGIN_MIN = 0.15


def brute_matched_filter(spec, kernel, k):
    t_len = spec.shape[0]
    out = np.zeros_like(spec)
    for t in range(t_len):
        for n in range(k):
            if t + n < t_len:
                out[t] += np.conj(kernel[n]) * spec[t + n]
    return out


@pytest.fixture(scope="module")
def experiment():
    cfg = load_config(CONFIGS / "acceptance.cfg")
    t0 = time.perf_counter()
    report = run_experiment(cfg)
    return cfg, report, time.perf_counter() - t0


def test_criterion_1_reduction_identity(record_criterion):
    t0 = time.perf_counter()
    rng = np.random.default_rng(101)
    worst = 0.0
    for _ in range(50):
        t, k = rng.integers(5, 40), rng.integers(1, 12)
        spec = Spectrogram(rng.standard_normal((8, t, 257)) + 1j * rng.standard_normal((8, t, 257)))
        ctf = CtfFilter(rng.standard_normal((8, k, 257)) + 1j * rng.standard_normal((8, k, 257)))
        worst = max(worst, np.max(np.abs(compute_rsf(spec, ctf, k=1).values - compute_sf(spec, ctf).values)))
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-6 and elapsed < 5
    record_criterion(1, ok, f"max |RSF(k=1) - SF| = {worst:.2e} (<= 1e-6) over 50 fixtures, {elapsed:.1f} s (< 5 s)")
    assert ok


def test_criterion_2_mtf_sanity(record_criterion):
    t0 = time.perf_counter()
    p = FrameParams()
    room = RoomSpec((6.0, 5.0, 3.0), 0.3, max_order=0)
    arr = ArrayGeometry.linear([2.0, 1.2, 1.3])
    # integer-sample direct paths only
    rir = simulate_rir(room, [4.0, 3.5, 1.6], arr, sinc_taps=1, highpass_hz=None)
    assert all(np.count_nonzero(ch) == 1 for ch in rir.taps)
    y = stft(synth_reverberant(speech_like(2.0, 3), rir), p)
    sf = compute_sf(y, ctf_from_rir(rir, p)).values
    mag = np.abs(y.bins[0])
    active = mag > mag.max() * 10 ** (-40 / 20)
    mean = float(sf[active].mean())
    elapsed = time.perf_counter() - t0
    ok = mean >= 0.99 * 4 and elapsed < 10
    record_criterion(2, ok, f"mean SF on active bins = {mean:.4f} (>= {0.99 * 4:.2f}), {elapsed:.1f} s (< 10 s)")
    assert ok


def test_criterion_3_strong_reverb_superiority(record_criterion, experiment):
    cfg, rep, elapsed = experiment
    sf = rep.row("strong", "ideal", "sf", 1)
    r2 = rep.row("strong", "ideal", "rsf", 2)
    r10 = rep.row("strong", "ideal", "rsf", 10)
    margin = r10["mean_on_target"] - sf["mean_on_target"]
    order = r10["auc"] > r2["auc"] > sf["auc"]
    ok = margin >= MARGIN_MIN and order and elapsed < 600 and sf["n_utterances"] == cfg.rooms * cfg.utterances
    record_criterion(3, ok, (
        f"target-bin mean RSF10 - SF = {r10['mean_on_target']:.3f} - {sf['mean_on_target']:.3f} = {margin:.3f} "
        f"(>= {MARGIN_MIN}); AUC RSF10 {r10['auc']:.3f} > RSF2 {r2['auc']:.3f} > SF {sf['auc']:.3f}: {order}; "
        f"{cfg.rooms} rooms x {cfg.utterances} mixtures, run {elapsed:.0f} s (< 600 s)"))
    assert order, "AUC ordering"
    assert margin >= MARGIN_MIN, f"target-bin margin {margin:.3f} < {MARGIN_MIN}"
    assert elapsed < 600
    assert sf["n_utterances"] == cfg.rooms * cfg.utterances, "failed utterances"


def test_criterion_4_robustness_gap(record_criterion, experiment):
    _, rep, _ = experiment
    drop = {}
    for feat, k in (("sf", 1), ("rsf", 10)):
        drop[feat] = rep.row("weak", "ideal", feat, k)["auc"] - rep.row("strong", "ideal", feat, k)["auc"]
    ok = drop["rsf"] < drop["sf"]
    record_criterion(4, ok, f"weak->strong AUC drop RSF10 {drop['rsf']:.3f} < SF {drop['sf']:.3f}")
    assert ok


def test_criterion_5_scenario_ordering(record_criterion, experiment):
    cfg, rep, elapsed = experiment
    parts, ok = [], elapsed < 600
    for band in cfg.bands:
        ideal, s1, s2 = (rep.row(band, s, "rsf", 10)["auc"] for s in ("ideal", "sce1", "sce2"))
        band_ok = abs(s1 - ideal) <= 0.05 and s2 < s1
        ok &= band_ok
        parts.append(f"{band}: ideal {ideal:.3f}, sce1 {s1:.3f} (|d| {abs(s1 - ideal):.3f} <= 0.05), sce2 {s2:.3f} < sce1")
    record_criterion(5, ok, "; ".join(parts) + f"; run {elapsed:.0f} s (< 600 s)")
    assert ok


def test_criterion_6_kernel_concentration(record_criterion):
    t0 = time.perf_counter()
    cfg = load_config(CONFIGS / "acceptance.cfg")
    p = cfg.frame_params
    band = cfg.bands.index("strong") if "strong" in cfg.bands else 1
    worst, n = np.inf, 0
    for i in range(cfg.rooms):
        room, arr = sample_room(cfg, "strong", np.random.default_rng(derive_seed(cfg.seed, band, i)))
        src = sample_speaker(cfg, room, arr, np.random.default_rng(derive_seed(cfg.seed, band, i, 1)))
        ctf = ctf_from_rir(simulate_rir(room, src, arr, cfg.sample_rate), p)
        gain = kernel_concentration(ctf, 10) - kernel_concentration(ctf, 1)
        worst = min(worst, float(gain.min()))
        n += len(gain)
    elapsed = time.perf_counter() - t0
    ok = worst > 0 and elapsed < 60
    record_criterion(6, ok, f"min concentration(k=10) - concentration(k=1) = {worst:.3f} (> 0) over {n} "
                            f"RIR channels, {elapsed:.1f} s (< 60 s)")
    assert ok


def test_criterion_7_acoustics_validity(record_criterion):
    t0 = time.perf_counter()
    rng = np.random.default_rng(7)
    worst, n = 0.0, 0
    for dims in ((3.0, 3.0, 2.5), (5.0, 4.0, 3.0), (4.0, 6.0, 3.5), (8.0, 6.0, 4.0)):
        for rt60 in (0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7):
            room = RoomSpec(dims, rt60)
            try:
                absorption_from_rt60(room)
            except AcousticsError:
                continue  # below this room's Sabine minimum
            d = np.asarray(dims)
            mic = ArrayGeometry(rng.uniform(0.2, 0.8, (1, 3)) * d)
            src = rng.uniform(0.2, 0.8, 3) * d
            err = measure_rt60(simulate_rir(room, src, mic)) / rt60 - 1
            worst = max(worst, abs(err))
            n += 1
    room = RoomSpec((5.0, 4.0, 3.0), 0.4, max_order=1)
    taps = simulate_rir(room, [1.2, 2.6, 1.4], ArrayGeometry(np.array([[3.3, 1.1, 1.9]])),
                        sinc_taps=1, highpass_hz=None).taps[0]
    arrivals = int(np.count_nonzero(taps))
    elapsed = time.perf_counter() - t0
    ok = worst <= 0.2 and n >= 20 and arrivals == 7 and elapsed < 60
    record_criterion(7, ok, f"worst RT60 error {100 * worst:.1f}% (<= 20%) over {n} rooms; "
                            f"order-1 arrivals {arrivals} (== 7); {elapsed:.1f} s (< 60 s)")
    assert ok


def test_criterion_8_numerical_core(record_criterion, rir_strong):
    t0 = time.perf_counter()
    rng = np.random.default_rng(8)
    p = FrameParams()
    rt = max(np.max(np.abs(istft(stft(Waveform(x, 16000), p)).samples - x))
             for x in (rng.standard_normal((2, n)) for n in (1, 255, 256, 4097, 16000)))
    mf = 0.0
    for _ in range(10):
        t, f, kk = rng.integers(1, 64), rng.integers(1, 65), rng.integers(1, 16)
        k = int(rng.integers(1, kk + 1))
        spec = rng.standard_normal((t, f)) + 1j * rng.standard_normal((t, f))
        ker = rng.standard_normal((kk, f)) + 1j * rng.standard_normal((kk, f))
        mf = max(mf, np.max(np.abs(matched_filter_time_axis(spec, ker, k) - brute_matched_filter(spec, ker, k))))
    c0_ok = True
    fixtures = [ctf_from_rir(rir_strong, p)] + [
        CtfFilter(rng.standard_normal((3, 12, 257)) + 1j * rng.standard_normal((3, 12, 257))) for _ in range(5)]
    for ctf in fixtures:
        for k in (1, 2, 10):
            c0 = compute_c_kernel(ctf, k).values[:, 0]
            c0_ok &= bool(np.all(c0.imag == 0) and np.all(c0.real >= 0))
    elapsed = time.perf_counter() - t0
    ok = rt <= 1e-6 and mf <= 1e-10 and c0_ok and elapsed < 30
    record_criterion(8, ok, f"STFT round trip {rt:.1e} (<= 1e-6); matched filter vs brute force {mf:.1e} "
                            f"(<= 1e-10); C(0) real, non-negative: {c0_ok}; {elapsed:.1f} s (< 30 s)")
    assert ok


def _tree(root):
    out = {}
    for dp, _, fs in os.walk(root):
        for f in fs:
            path = os.path.join(dp, f)
            with open(path, "rb") as fh:
                out[os.path.relpath(path, root)] = fh.read()
    return out


def test_criterion_9_determinism(record_criterion, tmp_path):
    smoke = str(CONFIGS / "smoke.cfg")
    out = str(tmp_path / "run")
    trees, times = [], []
    for _ in range(2):  # identical command lines into the same directory
        shutil.rmtree(out, ignore_errors=True)
        t0 = time.perf_counter()
        assert cli_main(["eval", "--config", smoke, "--seed", "7", "--out", out]) == 0
        times.append(time.perf_counter() - t0)
        assert cli_main(["--config", smoke, "--seed", "7", "--out", out, "mix", "--rooms", "1"]) == 0
        assert cli_main(["--config", smoke, "--out", out, "features", "--k", "10"]) == 0
        assert cli_main(["--config", smoke, "--out", out, "features", "--feature", "sf"]) == 0
        trees.append(_tree(out))
    a, b = trees
    kinds = sorted({os.path.splitext(name)[1] for name in a})
    same = a == b
    ok = same and max(times) < 60 and {".csv", ".rsft", ".wav"} <= set(kinds)
    record_criterion(9, ok, f"{len(a)} files ({', '.join(kinds)}) byte-identical across reruns: {same}; "
                            f"smoke eval {max(times):.1f} s (< 60 s)")
    assert ok
