"""Oracle dominance masks, feature-quality metrics and RIR-estimation scenarios."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats

from .dsp import Spectrogram
from .features import FeatureMap
from .room import ArrayGeometry, RoomSpec

__all__ = [
    "TARGET", "INTERFERER", "NEITHER",
    "DominanceMask", "ScenarioSpec", "ScenarioError",
    "dominance_mask", "auc", "feature_metrics", "perturb_scenario",
]

TARGET, INTERFERER, NEITHER = 1, -1, 0
FLOOR_DB = -60.0


class ScenarioError(ValueError):
    pass


@dataclass
class DominanceMask:
    labels: np.ndarray  # int8 [T x F]
    active: np.ndarray  # bool [T x F]
    margin_db: float = 3.0
    ref_channel: int = 0

    def fraction(self, label: int) -> float:
        return float(np.mean(self.labels[self.active] == label)) if self.active.any() else 0.0


def dominance_mask(target: Spectrogram, interferer: Spectrogram, margin_db: float = 3.0,
                   ref_channel: int = 0, floor_db: float = FLOOR_DB) -> DominanceMask:
    """Label each bin by which reverberant image is louder by ``margin_db``.

    Bins whose combined power is more than ``floor_db`` below the utterance
    peak are inactive and labelled neither.
    """
    if target.bins.shape != interferer.bins.shape:
        raise ValueError(f"image shapes differ: {target.bins.shape} vs {interferer.bins.shape}")
    pt = np.abs(target.bins[ref_channel]) ** 2
    pi = np.abs(interferer.bins[ref_channel]) ** 2
    total = pt + pi
    active = total > total.max() * 10 ** (floor_db / 10) if total.max() > 0 else np.zeros_like(total, bool)
    ratio = 10 ** (margin_db / 10)
    labels = np.full(pt.shape, NEITHER, dtype=np.int8)
    if margin_db == 0:
        labels[active & (pt >= pi)] = TARGET
        labels[active & (pt < pi)] = INTERFERER
    else:
        labels[active & (pt > ratio * pi)] = TARGET
        labels[active & (pi > ratio * pt)] = INTERFERER
    return DominanceMask(labels, active, margin_db, ref_channel)


def auc(scores_pos, scores_neg) -> float:
    """Mann-Whitney AUC with midranks, P(pos > neg) + 0.5 P(tie)."""
    pos = np.asarray(scores_pos, float).ravel()
    neg = np.asarray(scores_neg, float).ravel()
    if not len(pos) or not len(neg):
        return float("nan")
    ranks = stats.rankdata(np.concatenate([pos, neg]))
    u = ranks[: len(pos)].sum() - len(pos) * (len(pos) + 1) / 2
    return float(u / (len(pos) * len(neg)))


def feature_metrics(feature: FeatureMap | np.ndarray, mask: DominanceMask, target_lps: np.ndarray,
                    normalize: bool = True) -> dict:
    """Class means, target-vs-interferer AUC and LPS correlation over active bins.

    Metrics whose class is empty come back as NaN.
    """
    if isinstance(feature, FeatureMap):
        values = feature.normalized() if normalize else feature.values
    else:
        values = np.asarray(feature, float)
    if values.shape != mask.labels.shape or target_lps.shape != values.shape:
        raise ValueError("feature, mask and LPS shapes differ")
    on_t = values[mask.labels == TARGET]
    on_i = values[mask.labels == INTERFERER]
    act_v, act_l = values[mask.active], target_lps[mask.active]
    if len(act_v) > 1 and np.ptp(act_v) > 0 and np.ptp(act_l) > 0:
        corr = float(np.corrcoef(act_v, act_l)[0, 1])
    else:
        corr = float("nan")
    return {
        "mean_on_target": float(on_t.mean()) if len(on_t) else float("nan"),
        "mean_on_interferer": float(on_i.mean()) if len(on_i) else float("nan"),
        "auc": auc(on_t, on_i),
        "lps_correlation": corr,
        "n_target": int(len(on_t)),
        "n_interferer": int(len(on_i)),
    }


SCENARIOS = ("ideal", "sce1", "sce2")


@dataclass(frozen=True)
class ScenarioSpec:
    kind: str = "ideal"
    rt60_range: tuple = (0.3, 0.8)
    shift_bound: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if self.kind not in SCENARIOS:
            raise ScenarioError(f"unknown scenario {self.kind!r}")


def perturb_scenario(room: RoomSpec, source, array: ArrayGeometry, spec: ScenarioSpec,
                     margin: float = 0.1, retries: int = 100):
    """Room and positions as a mismatched RIR estimator would believe them.

    ``ideal`` returns the inputs. ``sce1`` redraws RT60. ``sce2`` also shifts
    the room size and the array by up to ``shift_bound`` per axis and moves
    the source with the array, so the source-to-array vector is unchanged.

    Returns
    -------
    (RoomSpec, source ndarray, ArrayGeometry)
    """
    source = np.asarray(source, float)
    if spec.kind == "ideal":
        return room, source, array
    rng = np.random.default_rng(spec.seed)
    rt60 = float(rng.uniform(*spec.rt60_range))
    if spec.kind == "sce1":
        return RoomSpec(room.dims, rt60, room.speed_of_sound, room.max_order), source, array

    b = spec.shift_bound
    rel = source - array.center
    for _ in range(retries):
        dims = np.asarray(room.dims) + rng.uniform(-b, b, 3)
        shift = rng.uniform(-b, b, 3)
        new_array = array.translated(shift)
        new_source = new_array.center + rel
        new_room = RoomSpec(tuple(dims), rt60, room.speed_of_sound, room.max_order)
        pts = np.vstack([new_array.mic_positions, new_source])
        if all(new_room.contains(p, margin) for p in pts):
            return new_room, new_source, new_array
    raise ScenarioError("could not place perturbed geometry inside the room")
