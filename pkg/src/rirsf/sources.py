"""Seed derivation and a speech-like synthetic dry-signal generator."""
from __future__ import annotations

import numpy as np

from .dsp import Waveform

__all__ = ["derive_seed", "speech_like"]


def derive_seed(master: int, *path: int) -> int:
    """Child seed for ``path`` under ``master``: SeedSequence(master, spawn_key=path).

    Stable across runs and platforms, independent of how many siblings exist,
    so work items can be generated in any order.
    """
    ss = np.random.SeedSequence(int(master), spawn_key=tuple(int(p) for p in path))
    return int(ss.generate_state(1, np.uint64)[0] >> np.uint64(1))


def _formant_gain(freqs, formants, bandwidths):
    g = np.zeros_like(freqs)
    for fc, bw in zip(formants, bandwidths):
        g += 1.0 / (1.0 + ((freqs - fc) / bw) ** 2)
    return g + 0.05


def speech_like(duration: float, seed: int, sample_rate: int = 16000,
                f0_range=(90.0, 240.0)) -> Waveform:
    """Syllable-rate sequence of voiced tones, noise bursts and pauses.

    Voiced segments are harmonic series with a gliding pitch, a -6 dB/octave
    tilt and three random formant bumps; unvoiced segments are tilted noise.
    Pauses leave the time-frequency plane sparse, as real speech does, so two
    such talkers produce bins dominated by one or the other. Output is
    normalised to unit peak.
    """
    rng = np.random.default_rng(seed)
    n_total = int(round(duration * sample_rate))
    out = np.zeros(n_total)
    f0_base = rng.uniform(*f0_range)
    pos = int(rng.uniform(0.0, 0.05) * sample_rate)
    while pos < n_total:
        kind = rng.choice(3, p=[0.6, 0.15, 0.25])
        if kind == 2:  # pause
            pos += int(rng.uniform(0.03, 0.2) * sample_rate)
            continue
        seg = int(rng.uniform(0.08, 0.25 if kind == 0 else 0.12) * sample_rate)
        seg = min(seg, n_total - pos)
        if seg < 16:
            break
        t = np.arange(seg) / sample_rate
        env = np.sin(np.pi * np.arange(seg) / seg) ** 0.7
        if kind == 0:
            f0 = f0_base * rng.uniform(0.85, 1.15) * (1 + rng.uniform(-0.15, 0.15) * t / t[-1])
            phase = 2 * np.pi * np.cumsum(f0) / sample_rate
            formants = np.sort(rng.uniform([300, 900, 2000], [900, 2200, 3500]))
            n_harm = int(0.45 * sample_rate // f0.max())
            x = np.zeros(seg)
            for h in range(1, n_harm + 1):
                amp = _formant_gain(h * f0.mean(), formants, (80, 120, 200)) / h
                x += amp * np.sin(h * phase + rng.uniform(0, 2 * np.pi))
        else:
            noise = rng.standard_normal(seg)
            spec = np.fft.rfft(noise)
            f = np.fft.rfftfreq(seg, 1 / sample_rate)
            shape = 1.0 / (1.0 + (f / 4000.0) ** 2) * (f > 1500)
            x = np.fft.irfft(spec * shape, n=seg) * 0.5
        out[pos:pos + seg] += x * env * rng.uniform(0.5, 1.0)
        pos += seg
    peak = np.abs(out).max()
    if peak > 0:
        out /= peak
    return Waveform(out, sample_rate)
