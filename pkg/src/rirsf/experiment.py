"""Desk-scale experiment driver: rooms -> mixtures -> features -> metrics -> report.

Each utterance is a pure function of ``(config, band, room, utterance)``, with
its randomness drawn from seeds derived from the master seed, so utterances can
run in any order or in parallel and the report is unchanged.
"""
from __future__ import annotations

import csv
import io
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .config import BAND_NAMES, ExperimentConfig
from .dsp import stft
from .evaluation import ScenarioSpec, dominance_mask, feature_metrics, perturb_scenario
from .features import PairSet, compute_rsf, compute_sf
from .mixer import MixSpec, make_mixture
from .room import (AcousticsError, ArrayGeometry, RoomSpec, absorption_from_rt60,
                   ctf_from_rir, simulate_rir)
from .sources import derive_seed, speech_like

__all__ = ["Utterance", "UtteranceResult", "ExperimentReport", "sample_room", "sample_speaker",
           "build_utterance", "evaluate_utterance", "run_experiment", "REPORT_COLUMNS"]

log = logging.getLogger(__name__)

REPORT_COLUMNS = ("band", "scenario", "feature", "k", "n_utterances",
                  "mean_on_target", "mean_on_interferer", "auc", "lps_correlation")
METRICS = REPORT_COLUMNS[5:]
_BAND_INDEX = {name: i for i, name in enumerate(BAND_NAMES)}
_SPEAKER_TRIES = 1000


def sample_room(cfg: ExperimentConfig, band: str, rng) -> tuple[RoomSpec, ArrayGeometry]:
    """Room uniform in the size bounds with RT60 uniform in ``band``.

    Draws whose RT60 is physically unreachable for their size are redrawn.
    """
    lo, hi = cfg.band(band)
    span = cfg.offsets[-1] - cfg.offsets[0]
    for _ in range(_SPEAKER_TRIES):
        dims = rng.uniform(cfg.dims_min, cfg.dims_max)
        room = RoomSpec(tuple(float(d) for d in dims), float(rng.uniform(lo, hi)), cfg.speed_of_sound)
        try:
            absorption_from_rt60(room)
        except AcousticsError:
            continue
        m = cfg.wall_margin
        z_hi = min(cfg.array_height[1], dims[2] - m)
        origin = rng.uniform([m, m, min(cfg.array_height[0], z_hi)], [dims[0] - m - span, dims[1] - m, z_hi])
        offsets = np.asarray(cfg.offsets) - cfg.offsets[0]
        return room, ArrayGeometry.linear(origin, offsets)
    raise AcousticsError(f"no room in the size bounds reaches RT60 in [{lo}, {hi}] s")


def sample_speaker(cfg: ExperimentConfig, room: RoomSpec, array: ArrayGeometry, rng) -> np.ndarray:
    m = cfg.wall_margin
    d = room.dims
    z_hi = min(cfg.source_height[1], d[2] - m)
    lo = [m, m, min(cfg.source_height[0], z_hi)]
    hi = [d[0] - m, d[1] - m, z_hi]
    for _ in range(_SPEAKER_TRIES):
        p = rng.uniform(lo, hi)
        if np.linalg.norm(p - array.center) >= cfg.min_distance:
            return p
    raise AcousticsError("cannot place a speaker away from the array")


@dataclass
class Utterance:
    """Everything needed to score one mixture."""

    band: str
    room_index: int
    index: int
    room: RoomSpec
    array: ArrayGeometry
    target: np.ndarray
    interferer: np.ndarray
    bundle: object
    target_rir: object
    scenario_seeds: dict


@dataclass
class UtteranceResult:
    key: tuple  # (band, room, utterance)
    rows: dict = field(default_factory=dict)  # (scenario, feature, k) -> metrics
    error: str | None = None


def build_utterance(cfg: ExperimentConfig, band: str, room_index: int, utt: int) -> Utterance:
    """Sample geometry and dry signals, simulate RIRs and mix."""
    b = _BAND_INDEX[band]
    room_rng = np.random.default_rng(derive_seed(cfg.seed, b, room_index))
    room, array = sample_room(cfg, band, room_rng)
    rng = np.random.default_rng(derive_seed(cfg.seed, b, room_index, utt + 1))
    target = sample_speaker(cfg, room, array, rng)
    interferer = sample_speaker(cfg, room, array, rng)
    fs = cfg.sample_rate
    dry_t = speech_like(cfg.duration, int(rng.integers(2**62)), fs)
    dry_i = speech_like(cfg.duration, int(rng.integers(2**62)), fs)
    spec = MixSpec(float(rng.uniform(*cfg.sir_db)), float(rng.uniform(*cfg.overlap)),
                   cfg.noise_snr_db, int(rng.integers(2**62)))
    scen_seeds = {kind: int(rng.integers(2**62)) for kind in ("sce1", "sce2")}
    rirs = (simulate_rir(room, target, array, fs), simulate_rir(room, interferer, array, fs))
    meta = dict(band=band, room=room_index, utterance=utt, dims=room.dims, rt60=room.rt60,
                target_pos=tuple(target), interferer_pos=tuple(interferer),
                array_origin=tuple(array.mic_positions[0]))
    bundle = make_mixture(dry_t, dry_i, rirs, spec, meta)
    return Utterance(band, room_index, utt, room, array, target, interferer, bundle, rirs[0], scen_seeds)


def estimated_ctf(cfg: ExperimentConfig, utt: Utterance, kind: str):
    """Target CTF as an RIR estimator under scenario ``kind`` would produce it."""
    params = cfg.frame_params
    if kind == "ideal":
        return ctf_from_rir(utt.target_rir, params)
    spec = ScenarioSpec(kind, seed=utt.scenario_seeds[kind])
    room, src, arr = perturb_scenario(utt.room, utt.target, utt.array, spec)
    return ctf_from_rir(simulate_rir(room, src, arr, cfg.sample_rate), params)


def evaluate_utterance(cfg: ExperimentConfig, band: str, room_index: int, utt: int) -> UtteranceResult:
    key = (band, room_index, utt)
    try:
        u = build_utterance(cfg, band, room_index, utt)
        params = cfg.frame_params
        y = stft(u.bundle.mixture, params)
        xt = stft(u.bundle.images[0], params)
        xi = stft(u.bundle.images[1], params)
        mask = dominance_mask(xt, xi, cfg.margin_db, floor_db=cfg.floor_db)
        lps = 10 * np.log10(np.abs(xt.bins[0]) ** 2 + 1e-12)
        pairs = PairSet(cfg.pairs)
        res = UtteranceResult(key)
        for kind in cfg.scenarios:
            ctf = estimated_ctf(cfg, u, kind)
            res.rows[(kind, "sf", 1)] = feature_metrics(compute_sf(y, ctf, pairs), mask, lps)
            for k in cfg.k:
                k_eff = min(k, ctf.n_frames)
                res.rows[(kind, "rsf", k)] = feature_metrics(compute_rsf(y, ctf, pairs, k_eff), mask, lps)
        return res
    except Exception as err:  # recorded per utterance; the run goes on
        log.warning("utterance %s failed: %s", key, err)
        return UtteranceResult(key, error=f"{type(err).__name__}: {err}")


@dataclass
class ExperimentReport:
    rows: list  # dicts keyed by REPORT_COLUMNS
    failures: list  # (band, room, utterance, message)

    def row(self, band, scenario, feature, k) -> dict:
        for r in self.rows:
            if (r["band"], r["scenario"], r["feature"], r["k"]) == (band, scenario, feature, k):
                return r
        raise KeyError((band, scenario, feature, k))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(REPORT_COLUMNS)
        for r in self.rows:
            w.writerow([_cell(r[c]) for c in REPORT_COLUMNS])
        return buf.getvalue()

    def failures_text(self) -> str:
        return "".join(f"{b},{r},{u},{msg}\n" for b, r, u, msg in self.failures)


def _cell(v) -> str:
    if isinstance(v, float):
        return "nan" if math.isnan(v) else f"{v:.6f}"
    return str(v)


def _aggregate(cfg: ExperimentConfig, results: list) -> ExperimentReport:
    results = sorted(results, key=lambda r: (_BAND_INDEX[r.key[0]], r.key[1], r.key[2]))
    rows = []
    row_keys = [(s, "sf", 1) for s in cfg.scenarios] + [(s, "rsf", k) for s in cfg.scenarios for k in cfg.k]
    for band in cfg.bands:
        ok = [r for r in results if r.key[0] == band and r.error is None]
        for scen, feat, k in row_keys:
            per_utt = [r.rows[(scen, feat, k)] for r in ok]
            row = dict(band=band, scenario=scen, feature=feat, k=k, n_utterances=len(per_utt))
            for m in METRICS:
                vals = np.array([d[m] for d in per_utt], float)
                vals = vals[~np.isnan(vals)]
                row[m] = float(vals.mean()) if len(vals) else float("nan")
            rows.append(row)
    failures = [(*r.key, r.error) for r in results if r.error is not None]
    return ExperimentReport(rows, failures)


def run_experiment(cfg: ExperimentConfig) -> ExperimentReport:
    """Score SF and RSF for every (band, scenario, k) over the configured rooms.

    Returns
    -------
    ExperimentReport
        One row per (band, scenario, feature, k) holding utterance means; failed
        utterances are listed separately and left out of the means.
    """
    jobs = [(cfg, band, r, u) for band in cfg.bands for r in range(cfg.rooms) for u in range(cfg.utterances)]
    if cfg.workers > 1:
        with ProcessPoolExecutor(cfg.workers) as pool:
            results = list(pool.map(evaluate_utterance, *zip(*jobs)))
    else:
        results = [evaluate_utterance(*job) for job in jobs]
    return _aggregate(cfg, results)
