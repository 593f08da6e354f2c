"""STFT analysis/synthesis and the per-bin primitives built on it.

Frames are centred: frame ``t`` covers samples ``[t*hop - win_len/2,
t*hop + win_len/2)`` and its phase is referenced to the frame centre, so a
unit impulse at sample ``t*hop`` has a real, positive spectrum in frame ``t``.
With that convention a time-axis convolution of two spectrograms lines up
with time-domain convolution, which the CTF machinery relies on.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._backend import kernels

__all__ = [
    "ConfigError",
    "FrameParams",
    "Waveform",
    "Spectrogram",
    "window",
    "stft",
    "istft",
    "matched_filter_time_axis",
    "phase_map",
]


class ConfigError(ValueError):
    """Invalid framing or experiment configuration."""


@dataclass(frozen=True)
class FrameParams:
    sample_rate: int = 16000
    win_len: int = 512
    hop: int = 256
    fft_size: int = 512
    window: str = "sqrt_hann"

    def __post_init__(self):
        if self.window not in ("hann", "sqrt_hann"):
            raise ConfigError(f"unknown window {self.window!r}")
        if not 0 < self.hop <= self.win_len <= self.fft_size:
            raise ConfigError(
                f"need 0 < hop <= win_len <= fft_size, got hop={self.hop}, "
                f"win_len={self.win_len}, fft_size={self.fft_size}")
        if self.win_len % 2:
            raise ConfigError("win_len must be even")
        if self.sample_rate <= 0:
            raise ConfigError("sample_rate must be positive")
        w2 = window(self) ** 2
        ola = np.zeros(self.hop)
        for start in range(0, self.win_len, self.hop):
            seg = w2[start:start + self.hop]
            ola[: len(seg)] += seg
        if np.ptp(ola) > 1e-10:
            raise ConfigError(
                f"{self.window} window with hop {self.hop} does not overlap-add "
                f"to a constant (spread {np.ptp(ola):.3g})")

    @property
    def n_bins(self) -> int:
        return self.fft_size // 2 + 1

    @property
    def bin_hz(self) -> np.ndarray:
        return np.arange(self.n_bins) * self.sample_rate / self.fft_size

    def n_frames(self, n_samples: int) -> int:
        """Frames needed so every sample is covered by a full set of windows."""
        return 1 + -(-n_samples // self.hop)

    def frames_for_seconds(self, seconds: float) -> int:
        return max(1, int(round(seconds * self.sample_rate / self.hop)))


def window(params: FrameParams) -> np.ndarray:
    """Periodic analysis window of length ``win_len``."""
    n = np.arange(params.win_len)
    hann = 0.5 - 0.5 * np.cos(2 * np.pi * n / params.win_len)
    return np.sqrt(hann) if params.window == "sqrt_hann" else hann


@dataclass
class Waveform:
    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        x = np.asarray(self.samples, dtype=float)
        if x.ndim == 1:
            x = x[None, :]
        if x.ndim != 2 or x.shape[0] < 1:
            raise ValueError(f"samples must be [channels x samples], got {x.shape}")
        if not np.all(np.isfinite(x)):
            raise ValueError("waveform contains non-finite samples")
        self.samples = x

    @property
    def n_channels(self) -> int:
        return self.samples.shape[0]

    @property
    def n_samples(self) -> int:
        return self.samples.shape[1]


@dataclass
class Spectrogram:
    """Complex one-sided spectrogram, ``bins`` shaped [M x T x F]."""

    bins: np.ndarray
    params: FrameParams = field(default_factory=FrameParams)
    length: int | None = None

    def __post_init__(self):
        self.bins = np.asarray(self.bins, dtype=complex)
        if self.bins.ndim == 2:
            self.bins = self.bins[None]
        if self.bins.shape[-1] != self.params.n_bins:
            raise ValueError(
                f"expected {self.params.n_bins} bins, got {self.bins.shape[-1]}")

    @property
    def n_frames(self) -> int:
        return self.bins.shape[1]


def _center_shift(params: FrameParams) -> int:
    # rotates the window centre to index 0 of the FFT buffer
    return params.win_len // 2


def stft(wave: Waveform, params: FrameParams | None = None) -> Spectrogram:
    """One-sided STFT with centred frames and centre-referenced phase.

    Parameters
    ----------
    wave : Waveform
        Input, any number of channels.
    params : FrameParams, optional
        Framing; defaults to 16 kHz / 512 / 256 / sqrt-Hann.

    Returns
    -------
    Spectrogram
        ``bins`` of shape [M, T, fft_size//2 + 1] with
        ``T = 1 + ceil(N / hop)``.
    """
    params = params or FrameParams()
    x = wave.samples
    if x.shape[1] == 0:
        raise ValueError("cannot analyse an empty waveform")
    n_frames = params.n_frames(x.shape[1])
    half = params.win_len // 2
    total = (n_frames - 1) * params.hop + params.win_len
    padded = np.zeros((x.shape[0], total))
    padded[:, half:half + x.shape[1]] = x
    idx = np.arange(params.win_len)[None, :] + params.hop * np.arange(n_frames)[:, None]
    frames = padded[:, idx] * window(params)
    buf = np.zeros(frames.shape[:-1] + (params.fft_size,))
    buf[..., : params.win_len] = frames
    buf = np.roll(buf, -_center_shift(params), axis=-1)
    return Spectrogram(np.fft.rfft(buf, axis=-1), params, x.shape[1])


def istft(spec: Spectrogram, length: int | None = None) -> Waveform:
    """Least-squares overlap-add inverse of :func:`stft`."""
    params = spec.params
    length = spec.length if length is None else length
    n_frames = spec.n_frames
    if length is None:
        length = (n_frames - 1) * params.hop
    buf = np.fft.irfft(spec.bins, n=params.fft_size, axis=-1)
    buf = np.roll(buf, _center_shift(params), axis=-1)[..., : params.win_len]
    win = window(params)
    total = (n_frames - 1) * params.hop + params.win_len
    out = np.zeros((spec.bins.shape[0], total))
    norm = np.zeros(total)
    for t in range(n_frames):
        sl = slice(t * params.hop, t * params.hop + params.win_len)
        out[:, sl] += buf[:, t] * win
        norm[sl] += win ** 2
    norm[norm < 1e-12] = 1.0
    half = params.win_len // 2
    y = (out / norm)[:, half:half + length]
    if y.shape[1] < length:
        y = np.pad(y, ((0, 0), (0, length - y.shape[1])))
    return Waveform(y, params.sample_rate)


def matched_filter_time_axis(channel_spec: np.ndarray, kernel: np.ndarray, k: int) -> np.ndarray:
    """Correlate each frequency row with the conjugated first ``k`` kernel frames.

    ``out[t, f] = sum_{n<k} conj(kernel[n, f]) * channel_spec[t + n, f]``, with
    frames past the end of ``channel_spec`` taken as zero. Bins never mix.
    """
    spec = np.ascontiguousarray(channel_spec, dtype=complex)
    ker = np.ascontiguousarray(kernel, dtype=complex)
    if spec.ndim != 2 or ker.ndim != 2 or spec.shape[1] != ker.shape[1]:
        raise ValueError(f"shape mismatch: spec {spec.shape}, kernel {ker.shape}")
    if not 1 <= k <= ker.shape[0]:
        raise ValueError(f"k={k} outside [1, {ker.shape[0]}]")
    out = np.empty_like(spec)
    kernels.matched_filter(spec, ker, int(k), out)
    return out


def phase_map(spec: np.ndarray) -> np.ndarray:
    """Principal phase in (-pi, pi]; exact zeros map to 0."""
    ph = np.angle(spec)
    # np.angle gives -pi for negative reals with a -0.0 imaginary part
    ph[ph <= -np.pi] = np.pi
    return ph
