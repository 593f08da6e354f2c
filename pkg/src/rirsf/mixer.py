"""Two-talker reverberant mixtures with controlled SIR, overlap and noise."""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .dsp import Waveform
from .room import Rir, synth_reverberant

__all__ = ["MixSpec", "MixtureBundle", "MixError", "scale_to_sir", "make_mixture",
           "add_noise", "measure_sir", "REF_CHANNEL"]

REF_CHANNEL = 0


class MixError(ValueError):
    pass


@dataclass(frozen=True)
class MixSpec:
    sir_db: float = 0.0
    overlap_ratio: float = 1.0
    noise_snr_db: float | None = None
    seed: int = 0

    def __post_init__(self):
        if not 0.5 <= self.overlap_ratio <= 1.0:
            raise MixError(f"overlap_ratio {self.overlap_ratio} outside [0.5, 1]")
        if not np.isfinite(self.sir_db):
            raise MixError("sir_db must be finite")


@dataclass
class MixtureBundle:
    mixture: Waveform
    images: tuple  # (target, interferer), each [M x N]
    noise: Waveform | None = None
    meta: dict = field(default_factory=dict)

    @property
    def overlap_region(self) -> slice:
        return slice(*self.meta["overlap_samples"])


def _power(x: np.ndarray) -> float:
    return float(np.mean(np.square(x)))


def measure_sir(target: np.ndarray, interferer: np.ndarray, region=slice(None),
                channel: int = REF_CHANNEL) -> float:
    return 10 * np.log10(_power(target[channel, region]) / _power(interferer[channel, region]))


def scale_to_sir(target_img: Waveform, interferer_img: Waveform, sir_db: float,
                 region: slice = slice(None), channel: int = REF_CHANNEL) -> float:
    """Interferer gain giving ``sir_db`` on ``channel`` over ``region``."""
    pt = _power(target_img.samples[channel, region])
    pi = _power(interferer_img.samples[channel, region])
    if pt == 0 or pi == 0:
        raise MixError("an image is silent over the overlapped region")
    return float(np.sqrt(pt / (pi * 10 ** (sir_db / 10))))


def _place_interferer(n_target: int, n_interf: int, ratio: float, rng) -> int:
    """Interferer onset (relative to target start) giving the requested overlap."""
    want = int(round(ratio * n_target))
    if want > n_interf:
        raise MixError(
            f"overlap {ratio:.2f} of a {n_target}-sample target needs at least "
            f"{want} interferer samples, have {n_interf}")
    lo, hi = want - n_interf, n_target - want  # onsets on the two trapezoid edges
    if want == min(n_target, n_interf):
        return int(rng.integers(min(lo, hi), max(lo, hi) + 1))
    return int(lo if rng.random() < 0.5 else hi)


def make_mixture(dry_target: Waveform, dry_interferer: Waveform, rirs: tuple[Rir, Rir],
                 spec: MixSpec, meta: dict | None = None) -> MixtureBundle:
    """Convolve both talkers, offset and scale the interferer, sum.

    ``overlap_ratio`` is the fraction of the target's dry duration shared with
    the interferer; SIR is set on the reference channel over that span.
    """
    if dry_target.sample_rate != dry_interferer.sample_rate:
        raise MixError("dry signals disagree on sample rate")
    if dry_target.n_channels != 1 or dry_interferer.n_channels != 1:
        raise MixError("dry signals must be mono")
    rng = np.random.default_rng(spec.seed)
    nt, ni = dry_target.n_samples, dry_interferer.n_samples
    onset = _place_interferer(nt, ni, spec.overlap_ratio, rng)

    wet_t = synth_reverberant(dry_target, rirs[0]).samples
    wet_i = synth_reverberant(dry_interferer, rirs[1]).samples
    start = min(0, onset)
    t0, i0 = -start, onset - start
    total = max(t0 + wet_t.shape[1], i0 + wet_i.shape[1])
    img_t = np.zeros((wet_t.shape[0], total))
    img_i = np.zeros((wet_i.shape[0], total))
    img_t[:, t0:t0 + wet_t.shape[1]] = wet_t
    img_i[:, i0:i0 + wet_i.shape[1]] = wet_i

    region = slice(max(t0, i0), min(t0 + nt, i0 + ni))
    fs = dry_target.sample_rate
    gain = scale_to_sir(Waveform(img_t, fs), Waveform(img_i, fs), spec.sir_db, region)
    img_i *= gain
    info = dict(meta or {})
    info.update(sir_db=float(spec.sir_db), overlap_ratio=float(spec.overlap_ratio),
                onset=int(onset), gain=gain, seed=int(spec.seed),
                overlap_samples=(region.start, region.stop), target_offset=int(t0))
    bundle = MixtureBundle(Waveform(img_t + img_i, fs), (Waveform(img_t, fs), Waveform(img_i, fs)),
                           None, info)
    if spec.noise_snr_db is not None:
        bundle = add_noise(bundle, spec.noise_snr_db, spec.seed)
    return bundle


def add_noise(bundle: MixtureBundle, snr_db: float | None, seed: int) -> MixtureBundle:
    """White Gaussian noise per channel at ``snr_db`` below that channel's mixture power."""
    if snr_db is None or np.isposinf(snr_db):
        return bundle
    if not np.isfinite(snr_db):
        raise MixError("snr_db must be finite or +inf")
    clean = bundle.images[0].samples + bundle.images[1].samples
    rng = np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(0x6E6F,)))
    noise = rng.standard_normal(clean.shape)
    p_clean = np.mean(clean ** 2, axis=1, keepdims=True)
    p_noise = np.mean(noise ** 2, axis=1, keepdims=True)
    noise *= np.sqrt(p_clean / (p_noise * 10 ** (snr_db / 10)))
    fs = bundle.mixture.sample_rate
    meta = dict(bundle.meta, noise_snr_db=float(snr_db))
    return replace(bundle, mixture=Waveform(clean + noise, fs), noise=Waveform(noise, fs), meta=meta)
