"""RIR-based spatial features for multichannel target-speaker extraction.

Modules
-------
dsp         framing, STFT/iSTFT and the frame-axis matched filter
room        image-source RIR simulation, RT60 measurement, CTF and steering
mixer       two-talker reverberant mixtures at a set SIR and overlap
features    IPD/TPD, the direct-path SF, RSF and the C-kernel
evaluation  dominance masks, AUC/correlation metrics, estimation scenarios
experiment  the seeded desk-scale experiment driver
config, io  config files, tensors, WAV, PGM
cli         the ``rirsf`` command
"""
from ._backend import COMPILED
from .dsp import ConfigError, FrameParams, Spectrogram, Waveform, istft, matched_filter_time_axis, stft
from .evaluation import DominanceMask, ScenarioSpec, auc, dominance_mask, feature_metrics, perturb_scenario
from .experiment import run_experiment
from .features import (CKernel, FeatureMap, PairSet, compute_c_kernel, compute_ipd, compute_rp,
                       compute_rsf, compute_sf, compute_tpd, kernel_concentration)
from .mixer import MixSpec, MixtureBundle, make_mixture, scale_to_sir
from .room import (AcousticsError, ArrayGeometry, CtfFilter, Rir, RoomSpec, ctf_from_rir,
                   measure_rt60, simulate_rir, synth_reverberant)
from .sources import derive_seed, speech_like

__version__ = "0.1.0"

__all__ = [
    "COMPILED", "ConfigError", "FrameParams", "Spectrogram", "Waveform", "istft",
    "matched_filter_time_axis", "stft", "DominanceMask", "ScenarioSpec", "auc", "dominance_mask",
    "feature_metrics", "perturb_scenario", "run_experiment", "CKernel", "FeatureMap", "PairSet",
    "compute_c_kernel", "compute_ipd", "compute_rp", "compute_rsf", "compute_sf", "compute_tpd",
    "kernel_concentration", "MixSpec", "MixtureBundle", "make_mixture", "scale_to_sir",
    "AcousticsError", "ArrayGeometry", "CtfFilter", "Rir", "RoomSpec", "ctf_from_rir",
    "measure_rt60", "simulate_rir", "synth_reverberant", "derive_seed", "speech_like",
]
