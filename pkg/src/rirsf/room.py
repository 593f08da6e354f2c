"""Shoebox image-source RIRs, RT60 handling and STFT-domain filters."""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import optimize, signal

from ._backend import kernels
from .dsp import FrameParams, Spectrogram, Waveform, stft

__all__ = [
    "AcousticsError",
    "REFERENCE_ARRAY_OFFSETS",
    "RoomSpec",
    "ArrayGeometry",
    "Rir",
    "CtfFilter",
    "absorption_from_rt60",
    "calibrated_reflection",
    "ctf_apply",
    "image_sources",
    "simulate_rir",
    "measure_rt60",
    "schroeder_curve",
    "ctf_from_rir",
    "synth_reverberant",
    "steering_from_geometry",
]

SABINE = 0.161
# 15-10-5-20-5-10-15 cm spacing, as cumulative offsets
REFERENCE_ARRAY_OFFSETS = np.cumsum([0.0, 0.15, 0.10, 0.05, 0.20, 0.05, 0.10, 0.15])
REFERENCE_ROOM_MIN = np.array([3.0, 3.0, 2.5])
REFERENCE_ROOM_MAX = np.array([8.0, 6.0, 4.0])
SINC_TAPS = 81
SINC_RESOLUTION = 1024
HIGHPASS_HZ = 50.0


class AcousticsError(ValueError):
    """Physically unrealisable room or an unmeasurable decay."""


@dataclass(frozen=True)
class RoomSpec:
    dims: tuple
    rt60: float
    speed_of_sound: float = 343.0
    max_order: int | None = None

    def __post_init__(self):
        dims = tuple(float(d) for d in self.dims)
        if len(dims) != 3 or min(dims) <= 0:
            raise ValueError(f"room dims must be three positive lengths, got {self.dims}")
        object.__setattr__(self, "dims", dims)
        if not self.rt60 > 0:
            raise ValueError(f"rt60 must be positive, got {self.rt60}")
        if self.max_order is not None and self.max_order < 0:
            raise ValueError("max_order must be >= 0")

    @property
    def volume(self) -> float:
        x, y, z = self.dims
        return x * y * z

    @property
    def surface(self) -> float:
        x, y, z = self.dims
        return 2 * (x * y + x * z + y * z)

    def contains(self, point, margin: float = 0.0) -> bool:
        p = np.asarray(point, dtype=float)
        return bool(np.all(p > margin) and np.all(p < np.asarray(self.dims) - margin))

    def within_protocol(self) -> bool:
        d = np.asarray(self.dims)
        return bool(np.all(d >= REFERENCE_ROOM_MIN) and np.all(d <= REFERENCE_ROOM_MAX))


@dataclass
class ArrayGeometry:
    mic_positions: np.ndarray

    def __post_init__(self):
        pos = np.atleast_2d(np.asarray(self.mic_positions, dtype=float))
        if pos.shape[1] != 3:
            raise ValueError(f"mic positions must be [M x 3], got {pos.shape}")
        self.mic_positions = pos

    @classmethod
    def linear(cls, origin, offsets=REFERENCE_ARRAY_OFFSETS, axis=(1.0, 0.0, 0.0)) -> "ArrayGeometry":
        """Mics at ``origin + offset * axis``; defaults to the 8-mic protocol array."""
        axis = np.asarray(axis, dtype=float)
        axis = axis / np.linalg.norm(axis)
        return cls(np.asarray(origin, dtype=float) + np.outer(offsets, axis))

    @property
    def n_mics(self) -> int:
        return self.mic_positions.shape[0]

    @property
    def center(self) -> np.ndarray:
        return self.mic_positions.mean(axis=0)

    def translated(self, shift) -> "ArrayGeometry":
        return ArrayGeometry(self.mic_positions + np.asarray(shift, dtype=float))


@dataclass
class Rir:
    taps: np.ndarray
    sample_rate: int = 16000

    def __post_init__(self):
        taps = np.atleast_2d(np.asarray(self.taps, dtype=float))
        if taps.shape[1] < 1 or not np.all(np.isfinite(taps)):
            raise ValueError("RIR taps must be finite and non-empty")
        self.taps = taps

    @property
    def n_channels(self) -> int:
        return self.taps.shape[0]

    @property
    def length(self) -> int:
        return self.taps.shape[1]


@dataclass
class CtfFilter:
    """Band-to-band filters, ``frames`` shaped [M x K x F]."""

    frames: np.ndarray
    params: FrameParams = field(default_factory=FrameParams)

    @property
    def n_frames(self) -> int:
        return self.frames.shape[1]

    def steering(self) -> np.ndarray:
        """Frame-0 entries, [M x F]."""
        return self.frames[:, 0, :]


def absorption_from_rt60(room: RoomSpec) -> tuple[float, float]:
    """Sabine absorption ``alpha`` and wall reflection coefficient ``beta``.

    Raises
    ------
    AcousticsError
        If the room cannot be made absorbent enough (``alpha > 1``).
    """
    alpha = SABINE * room.volume / (room.rt60 * room.surface)
    if alpha > 1.0:
        min_rt60 = SABINE * room.volume / room.surface
        raise AcousticsError(
            f"rt60={room.rt60:.3f} s needs absorption {alpha:.3f} > 1 in a "
            f"{room.dims} m room; minimum feasible rt60 is {min_rt60:.3f} s")
    return alpha, float(np.sqrt(1.0 - alpha))


def _rir_length(room: RoomSpec, fs: int) -> int:
    return int(np.ceil(room.rt60 * fs)) + SINC_TAPS


@lru_cache(maxsize=4)
def _sinc_table(taps: int, res: int) -> np.ndarray:
    if taps == 1:
        return np.ones((2, 1))
    half = taps // 2
    frac = np.arange(res + 1) / res - 0.5
    x = np.arange(-half, half + 1)[None, :] - frac[:, None]
    win = 0.5 * (1.0 + np.cos(np.pi * x / (half + 0.5)))
    table = np.sinc(x) * win
    table.setflags(write=False)
    return table


def _lattice_images(room: RoomSpec, source, reach: float, max_order=None):
    """Image positions and reflection orders within ``reach`` of the room box."""
    dims = np.asarray(room.dims)
    nmax = np.ceil(reach / (2 * dims)).astype(int) + 1
    grid = np.meshgrid(*[np.arange(-n, n + 1) for n in nmax], indexing="ij")
    lattice = np.stack([g.ravel() for g in grid], axis=1)
    positions, orders = [], []
    for parity in np.ndindex(2, 2, 2):
        parity = np.asarray(parity)
        order = np.abs(2 * lattice - parity).sum(axis=1)
        keep = order <= max_order if max_order is not None else slice(None)
        positions.append((1 - 2 * parity) * np.asarray(source, float) + 2 * lattice[keep] * dims)
        orders.append(order[keep])
    return np.concatenate(positions), np.concatenate(orders)


def image_sources(room: RoomSpec, source, max_order: int):
    """All images of ``source`` with at most ``max_order`` wall reflections.

    Returns ``(positions [N x 3], orders [N])``, sorted by order.
    """
    reach = 2 * max_order * max(room.dims) + 2 * max(room.dims)
    pos, order = _lattice_images(room, source, reach, max_order)
    idx = np.argsort(order, kind="stable")
    return pos[idx], order[idx]


def _t30(edc_db: np.ndarray, fs: float, lo=-5.0, hi=-35.0) -> float:
    below_lo = np.nonzero(edc_db <= lo)[0]
    below_hi = np.nonzero(edc_db <= hi)[0]
    if not len(below_hi):
        raise AcousticsError(f"decay range shorter than {lo - hi:.0f} dB")
    i0, i1 = below_lo[0], below_hi[0]
    if i1 - i0 < 2:
        raise AcousticsError(f"decay range shorter than {lo - hi:.0f} dB")
    t = np.arange(i0, i1) / fs
    slope = np.polyfit(t, edc_db[i0:i1], 1)[0]
    if slope >= 0:
        raise AcousticsError("energy decay curve is not decreasing")
    return -60.0 / slope


def calibrated_reflection(room: RoomSpec, source, mic, sample_rate: int = 16000) -> float:
    """Reflection coefficient whose image-source decay has T30 equal to ``rt60``.

    Works on the arrival energy histogram (no interpolation filter), which is
    cheap to re-weight for each trial coefficient. The Sabine value seeds the
    bracket; shoebox image decays generally deviate from it by tens of percent.
    """
    length = _rir_length(room, sample_rate)
    c = room.speed_of_sound
    dims = np.asarray(room.dims, dtype=float)
    nmax = np.ceil(length / sample_rate * c / (2 * dims)).astype(int) + 1
    # energy histogram factored by order: E(n) = sum_q beta^(2q) H[n, q]
    hist = np.zeros((length, int(np.sum(2 * nmax + 1)) + 1))
    kernels.ism_energy_histogram(dims, np.ascontiguousarray(source, dtype=float),
                                 np.ascontiguousarray(mic, dtype=float), float(sample_rate), float(c), hist)
    max_q = int(np.nonzero(hist.any(axis=0))[0].max())
    hist = hist[:, :max_q + 1]
    tail = np.cumsum(hist[::-1], axis=0)[::-1]

    def log_ratio(beta):
        edc = tail @ (beta ** (2.0 * np.arange(max_q + 1)))
        with np.errstate(divide="ignore"):
            edc_db = 10 * np.log10(edc / edc[0])
        try:
            return np.log(_t30(edc_db, sample_rate) / room.rt60)
        except AcousticsError:
            return -10.0

    # near beta = 1 truncation dominates and T30 stops growing, so bracket
    # outward from the Sabine value instead of over the whole unit interval
    seed = absorption_from_rt60(room)[1]
    f_seed = log_ratio(seed)
    if f_seed > 0:
        lo = seed
        while True:
            lo *= 0.8
            if log_ratio(lo) <= 0 or lo < 1e-3:
                break
        return float(optimize.brentq(log_ratio, lo, seed, xtol=1e-7))
    lo, prev = seed, f_seed
    for _ in range(60):
        hi = 1.0 - (1.0 - lo) * 0.7
        f_hi = log_ratio(hi)
        if f_hi >= 0:
            return float(optimize.brentq(log_ratio, lo, hi, xtol=1e-7))
        if f_hi < prev:
            break
        lo, prev = hi, f_hi
    return lo


def simulate_rir(room: RoomSpec, source, array: ArrayGeometry, sample_rate: int = 16000,
                 absorption: str = "calibrated", sinc_taps: int = SINC_TAPS,
                 highpass_hz: float | None = HIGHPASS_HZ) -> Rir:
    """Image-source RIR from ``source`` to every mic of ``array``.

    Parameters
    ----------
    room : RoomSpec
        Geometry and target RT60. ``max_order=None`` keeps every image whose
        arrival falls inside the RIR.
    source : array_like, shape (3,)
    array : ArrayGeometry
    sample_rate : int
    absorption : {"calibrated", "sabine"}
        How the wall reflection coefficient is derived from ``room.rt60``.
    sinc_taps : int
        Odd fractional-delay filter length; 1 rounds arrivals to the nearest
        sample.
    highpass_hz : float or None
        Cutoff of the 2nd-order Butterworth DC blocker applied afterwards.
        All image amplitudes share a sign, so without it the dense tail piles
        up at DC and decays more slowly than the wall losses imply.

    Returns
    -------
    Rir
        ``ceil(rt60 * fs) + 81`` taps per mic.
    """
    source = np.asarray(source, dtype=float)
    if not room.contains(source):
        raise ValueError(f"source {source} outside room {room.dims}")
    for p in array.mic_positions:
        if not room.contains(p):
            raise ValueError(f"mic {p} outside room {room.dims}")
    if sinc_taps < 1 or sinc_taps % 2 == 0:
        raise ValueError("sinc_taps must be odd and positive")
    _, beta = absorption_from_rt60(room)
    if absorption == "calibrated":
        beta = calibrated_reflection(room, source, array.center, sample_rate)
    elif absorption != "sabine":
        raise ValueError(f"unknown absorption mode {absorption!r}")

    out = np.zeros((array.n_mics, _rir_length(room, sample_rate)))
    kernels.ism_rir(
        np.ascontiguousarray(room.dims, dtype=float), np.ascontiguousarray(source),
        np.ascontiguousarray(array.mic_positions), float(beta), float(sample_rate),
        float(room.speed_of_sound), -1 if room.max_order is None else int(room.max_order),
        _sinc_table(sinc_taps, SINC_RESOLUTION), out)
    if highpass_hz:
        sos = signal.butter(2, highpass_hz, "highpass", fs=sample_rate, output="sos")
        out = signal.sosfilt(sos, out, axis=1)
    return Rir(out, sample_rate)


def schroeder_curve(taps: np.ndarray) -> np.ndarray:
    """Backward-integrated energy in dB, normalised to 0 dB at the start."""
    energy = np.cumsum(np.asarray(taps, float)[::-1] ** 2)[::-1]
    if energy[0] <= 0:
        raise AcousticsError("silent impulse response")
    with np.errstate(divide="ignore"):
        return 10 * np.log10(energy / energy[0])


def measure_rt60(rir: Rir, channel: int = 0) -> float:
    """T30 estimate: line fit to the Schroeder curve over -5..-35 dB, scaled to 60 dB."""
    return _t30(schroeder_curve(rir.taps[channel]), rir.sample_rate)


def ctf_from_rir(rir: Rir, params: FrameParams | None = None) -> CtfFilter:
    """Per-channel STFT of the RIR, framed exactly like the mixture."""
    params = params or FrameParams()
    if params.sample_rate != rir.sample_rate:
        raise ValueError("RIR and frame parameters disagree on sample rate")
    spec = stft(Waveform(rir.taps, rir.sample_rate), params)
    return CtfFilter(spec.bins, params)


def ctf_apply(ctf: CtfFilter, dry: Spectrogram) -> Spectrogram:
    """Reverberant spectrogram under the CTF model: causal convolution along frames."""
    x = dry.bins[0]
    n_frames = x.shape[0]
    out = np.zeros((ctf.frames.shape[0], n_frames, x.shape[1]), dtype=complex)
    for n in range(min(ctf.n_frames, n_frames)):
        out[:, n:] += ctf.frames[:, n, None, :] * x[None, : n_frames - n]
    return Spectrogram(out, dry.params, dry.length)


def synth_reverberant(dry: Waveform, rir: Rir) -> Waveform:
    """Full linear convolution of a mono signal with every RIR channel."""
    if dry.sample_rate != rir.sample_rate:
        raise ValueError(
            f"sample rate mismatch: dry {dry.sample_rate} Hz, rir {rir.sample_rate} Hz")
    if dry.n_channels != 1:
        raise ValueError("dry signal must be mono")
    wet = signal.oaconvolve(dry.samples, rir.taps, axes=1)
    return Waveform(wet, dry.sample_rate)


def steering_from_geometry(source, array: ArrayGeometry, params: FrameParams | None = None,
                           speed_of_sound: float = 343.0) -> np.ndarray:
    """Free-field direct-path gains ``exp(-j 2 pi f d / c) / (4 pi d)``, [M x F]."""
    params = params or FrameParams()
    d = np.linalg.norm(array.mic_positions - np.asarray(source, float), axis=1)
    f = params.bin_hz
    return np.exp(-2j * np.pi * f[None, :] * d[:, None] / speed_of_sound) / (4 * np.pi * d[:, None])
