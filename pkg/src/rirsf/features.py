"""Phase-difference spatial features: IPD/TPD, the direct-path SF, and RIR-SF.

All maps are [frames x bins]; every operation works bin by bin.

The RIR-based feature matched-filters each channel of the mixture with the
conjugated first ``k`` CTF frames of the target RIR for that channel. Where
the target dominates, the output is the dry target filtered by the kernel
``C(t) = sum_n R(t+n) R(n)^*``, whose zero-lag tap is real and positive on
every channel, so the output phase no longer depends on the channel and the
cosine of the pairwise phase difference approaches 1. With ``k = 1`` the
filter is a single tap and the feature collapses to the direct-path SF.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dsp import Spectrogram, matched_filter_time_axis, phase_map
from .room import CtfFilter

__all__ = [
    "DEFAULT_PAIRS",
    "PairSet",
    "FeatureMap",
    "CKernel",
    "wrap_phase",
    "compute_ipd",
    "compute_tpd",
    "compute_sf",
    "compute_rp",
    "compute_rsf",
    "compute_c_kernel",
    "kernel_concentration",
]

# outer-in symmetric pairs of the 8-mic array
DEFAULT_PAIRS = ((0, 7), (1, 6), (2, 5), (3, 4))
FEATURE_KINDS = ("sf", "rsf", "ipd", "tpd", "rp", "diagnostic")
SHARP_SENTINEL = float(np.finfo(float).max)


@dataclass(frozen=True)
class PairSet:
    pairs: tuple = DEFAULT_PAIRS

    def __post_init__(self):
        pairs = tuple((int(a), int(b)) for a, b in self.pairs)
        if not pairs:
            raise ValueError("pair set is empty")
        for a, b in pairs:
            if a == b or a < 0 or b < 0:
                raise ValueError(f"invalid mic pair ({a}, {b})")
        object.__setattr__(self, "pairs", pairs)

    def __len__(self):
        return len(self.pairs)

    def __iter__(self):
        return iter(self.pairs)

    def check(self, n_mics: int) -> None:
        for a, b in self.pairs:
            if max(a, b) >= n_mics:
                raise ValueError(f"pair ({a}, {b}) needs at least {max(a, b) + 1} mics, have {n_mics}")

    @property
    def channels(self) -> list[int]:
        return sorted({m for p in self.pairs for m in p})


@dataclass
class FeatureMap:
    values: np.ndarray
    kind: str
    k: int | None = None
    pairs: PairSet | None = None

    def __post_init__(self):
        if self.kind not in FEATURE_KINDS:
            raise ValueError(f"unknown feature kind {self.kind!r}")
        self.values = np.asarray(self.values, dtype=float)

    def normalized(self) -> np.ndarray:
        """Values divided by the pair count (per-pair units)."""
        return self.values / (len(self.pairs) if self.pairs else 1)


@dataclass
class CKernel:
    values: np.ndarray  # [M x Kc x F]
    k: int


def wrap_phase(x):
    """Map angles to (-pi, pi]."""
    return np.pi - np.mod(np.pi - np.asarray(x, dtype=float), 2 * np.pi)


def _pair(pair, n_mics):
    ps = PairSet((tuple(pair),))
    ps.check(n_mics)
    return ps.pairs[0]


def _steering(source) -> np.ndarray:
    if isinstance(source, CtfFilter):
        if source.n_frames < 1:
            raise ValueError("CTF has no frames")
        return source.steering()
    return np.asarray(source, dtype=complex)


def compute_ipd(spec: Spectrogram, pair) -> FeatureMap:
    m1, m2 = _pair(pair, spec.bins.shape[0])
    ph = phase_map(spec.bins[[m1, m2]])
    return FeatureMap(wrap_phase(ph[0] - ph[1]), "ipd", pairs=PairSet((pair,)))


def compute_tpd(source, pair, n_frames: int = 1) -> FeatureMap:
    """Direct-path phase difference from CTF frame 0 or a [M x F] steering matrix."""
    steer = _steering(source)
    m1, m2 = _pair(pair, steer.shape[0])
    ph = phase_map(steer[[m1, m2]])
    tpd = wrap_phase(ph[0] - ph[1])
    return FeatureMap(np.broadcast_to(tpd, (n_frames, tpd.size)).copy(), "tpd",
                      pairs=PairSet((pair,)))


def compute_sf(spec: Spectrogram, source, pairs: PairSet = PairSet(), normalize: bool = False) -> FeatureMap:
    """Sum over pairs of ``cos(IPD - TPD)``; ``normalize`` turns the sum into a mean."""
    steer = _steering(source)
    pairs.check(min(spec.bins.shape[0], steer.shape[0]))
    spec_ph = phase_map(spec.bins)
    steer_ph = phase_map(steer)
    out = np.zeros(spec.bins.shape[1:])
    for m1, m2 in pairs:
        out += np.cos((spec_ph[m1] - spec_ph[m2]) - (steer_ph[m1] - steer_ph[m2]))
    if normalize:
        out /= len(pairs)
    return FeatureMap(out, "sf", pairs=pairs)


def _check_k(ctf: CtfFilter, k: int) -> int:
    k = int(k)
    if not 1 <= k <= ctf.n_frames:
        raise ValueError(f"k={k} outside [1, {ctf.n_frames}] CTF frames")
    return k


def compute_rp(spec: Spectrogram, ctf: CtfFilter, channel: int, k: int) -> FeatureMap:
    """Phase of channel ``channel`` after matched filtering with its first ``k`` CTF frames."""
    k = _check_k(ctf, k)
    filtered = matched_filter_time_axis(spec.bins[channel], ctf.frames[channel], k)
    return FeatureMap(phase_map(filtered), "rp", k=k)


def compute_rsf(spec: Spectrogram, ctf: CtfFilter, pairs: PairSet = PairSet(), k: int = 10,
                normalize: bool = False) -> FeatureMap:
    """Sum over pairs of ``cos(RP_m1 - RP_m2)`` with matched-filter length ``k``."""
    k = _check_k(ctf, k)
    pairs.check(min(spec.bins.shape[0], ctf.frames.shape[0]))
    rp = {m: compute_rp(spec, ctf, m, k).values for m in pairs.channels}
    out = np.zeros(spec.bins.shape[1:])
    for m1, m2 in pairs:
        out += np.cos(rp[m1] - rp[m2])
    if normalize:
        out /= len(pairs)
    return FeatureMap(out, "rsf", k=k, pairs=pairs)


def compute_c_kernel(ctf: CtfFilter, k: int) -> CKernel:
    """``C[m, t, f] = sum_{n<k} R[m, t+n, f] * conj(R[m, n, f])`` for every lag t >= 0."""
    k = _check_k(ctf, k)
    vals = np.stack([matched_filter_time_axis(ch, ch, k) for ch in ctf.frames])
    # zero lag is a sum of squared magnitudes; drop rounding residue
    vals[:, 0, :] = vals[:, 0, :].real
    return CKernel(vals, k)


def kernel_concentration(ctf: CtfFilter, k: int) -> np.ndarray:
    """Per-channel ``||C(0)|| / max_{t>=1} ||C(t)||``, norms taken over frequency.

    A kernel with no energy past lag 0 reports ``SHARP_SENTINEL``.
    """
    ck = compute_c_kernel(ctf, k).values
    norms = np.linalg.norm(ck, axis=-1)  # [M x Kc]
    if np.any(norms[:, 0] == 0):
        raise ValueError("degenerate all-zero kernel")
    tail = norms[:, 1:].max(axis=1) if norms.shape[1] > 1 else np.zeros(len(norms))
    with np.errstate(divide="ignore"):
        ratio = np.where(tail > 0, norms[:, 0] / np.where(tail > 0, tail, 1.0), SHARP_SENTINEL)
    return ratio
