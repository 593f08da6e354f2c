"""Experiment configuration: flat ``key = value`` text with ``[section]`` headers.

Every key is declared in a schema with a parser and a range check, so unknown
keys and out-of-range values are rejected while loading, before any work
starts. Example::

    [experiment]
    rooms = 2
    utterances = 2
    bands = weak, strong

    [features]
    k = 1, 2, 10
"""
from __future__ import annotations

import configparser
from dataclasses import dataclass, fields

import numpy as np

from .dsp import ConfigError, FrameParams
from .features import DEFAULT_PAIRS, PairSet
from .room import REFERENCE_ARRAY_OFFSETS, REFERENCE_ROOM_MAX, REFERENCE_ROOM_MIN

__all__ = ["ExperimentConfig", "load_config", "parse_config", "dump_config", "BAND_NAMES"]

BAND_NAMES = ("weak", "strong")
SCENARIO_NAMES = ("ideal", "sce1", "sce2")


def _floats(text: str) -> tuple:
    try:
        return tuple(float(v) for v in text.replace(" ", "").split(",") if v)
    except ValueError:
        raise ConfigError(f"expected comma-separated numbers, got {text!r}") from None


def _ints(text: str) -> tuple:
    try:
        return tuple(int(v) for v in text.replace(" ", "").split(",") if v)
    except ValueError:
        raise ConfigError(f"expected comma-separated integers, got {text!r}") from None


def _names(text: str) -> tuple:
    return tuple(v.strip() for v in text.split(",") if v.strip())


def _int(text: str) -> int:
    try:
        return int(text)
    except ValueError:
        raise ConfigError(f"expected an integer, got {text!r}") from None


def _float(text: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise ConfigError(f"expected a number, got {text!r}") from None


def _optional_float(text: str):
    return None if text.strip().lower() in ("off", "none", "") else _float(text)


def _pairs(text: str) -> tuple:
    out = []
    for item in _names(text):
        try:
            a, b = item.split("-")
            out.append((int(a), int(b)))
        except ValueError:
            raise ConfigError(f"mic pair must look like '0-7', got {item!r}") from None
    return tuple(out)


def _fmt(value) -> str:
    if value is None:
        return "off"
    if isinstance(value, tuple):
        if value and isinstance(value[0], tuple):
            return ", ".join(f"{a}-{b}" for a, b in value)
        return ", ".join(_fmt(v) for v in value)
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


@dataclass(frozen=True)
class ExperimentConfig:
    """Desk-scale experiment parameters; defaults reproduce the reference protocol."""

    rooms: int = 20
    utterances: int = 5
    duration: float = 3.0
    seed: int = 0
    workers: int = 1
    bands: tuple = BAND_NAMES
    scenarios: tuple = SCENARIO_NAMES
    weak: tuple = (0.1, 0.6)
    strong: tuple = (0.5, 0.7)
    dims_min: tuple = tuple(float(v) for v in REFERENCE_ROOM_MIN)
    dims_max: tuple = tuple(float(v) for v in REFERENCE_ROOM_MAX)
    speed_of_sound: float = 343.0
    wall_margin: float = 0.5
    min_distance: float = 0.7
    source_height: tuple = (1.2, 1.9)
    offsets: tuple = tuple(float(v) for v in REFERENCE_ARRAY_OFFSETS)
    array_height: tuple = (0.8, 1.5)
    k: tuple = (1, 2, 10)
    pairs: tuple = DEFAULT_PAIRS
    margin_db: float = 3.0
    floor_db: float = -60.0
    sample_rate: int = 16000
    win_len: int = 512
    hop: int = 256
    fft_size: int = 512
    window: str = "sqrt_hann"
    sir_db: tuple = (-6.0, 6.0)
    overlap: tuple = (0.5, 1.0)
    noise_snr_db: float | None = None
    out_dir: str = "out"

    def __post_init__(self):
        _validate(self)

    @property
    def frame_params(self) -> FrameParams:
        return FrameParams(self.sample_rate, self.win_len, self.hop, self.fft_size, self.window)

    def band(self, name: str) -> tuple:
        return getattr(self, name)

    def replace(self, **changes) -> "ExperimentConfig":
        vals = {f.name: getattr(self, f.name) for f in fields(self)}
        vals.update(changes)
        return ExperimentConfig(**vals)


# section -> key -> (field name, parser)
_SCHEMA = {
    "experiment": {
        "rooms": ("rooms", _int),
        "utterances": ("utterances", _int),
        "duration": ("duration", _float),
        "seed": ("seed", _int),
        "workers": ("workers", _int),
        "bands": ("bands", _names),
        "scenarios": ("scenarios", _names),
    },
    "rt60": {"weak": ("weak", _floats), "strong": ("strong", _floats)},
    "room": {
        "dims_min": ("dims_min", _floats),
        "dims_max": ("dims_max", _floats),
        "speed_of_sound": ("speed_of_sound", _float),
        "wall_margin": ("wall_margin", _float),
        "min_distance": ("min_distance", _float),
        "source_height": ("source_height", _floats),
    },
    "array": {"offsets": ("offsets", _floats), "height": ("array_height", _floats)},
    "features": {
        "k": ("k", _ints),
        "pairs": ("pairs", _pairs),
        "margin_db": ("margin_db", _float),
        "floor_db": ("floor_db", _float),
    },
    "stft": {
        "sample_rate": ("sample_rate", _int),
        "win_len": ("win_len", _int),
        "hop": ("hop", _int),
        "fft_size": ("fft_size", _int),
        "window": ("window", str.strip),
    },
    "mix": {
        "sir_db": ("sir_db", _floats),
        "overlap": ("overlap", _floats),
        "noise_snr_db": ("noise_snr_db", _optional_float),
    },
    "output": {"dir": ("out_dir", str.strip)},
}


def _range(name, value, lo, hi):
    if not lo <= value <= hi:
        raise ConfigError(f"{name}={value} outside [{lo}, {hi}]")


def _interval(name, value, lo, hi, n=2):
    if len(value) != n:
        raise ConfigError(f"{name} needs {n} values, got {len(value)}")
    if n == 2:
        if value[0] > value[1]:
            raise ConfigError(f"{name} lower bound exceeds upper bound")
        for v in value:
            _range(name, v, lo, hi)


def _validate(c: ExperimentConfig) -> None:
    _range("rooms", c.rooms, 1, 100000)
    _range("utterances", c.utterances, 1, 1000)
    _range("duration", c.duration, 0.5, 30.0)
    _range("seed", c.seed, 0, 2**63 - 1)
    _range("workers", c.workers, 1, 256)
    if not c.bands or any(b not in BAND_NAMES for b in c.bands) or len(set(c.bands)) != len(c.bands):
        raise ConfigError(f"bands={c.bands!r}: expected distinct names from {BAND_NAMES}")
    if not c.scenarios or any(s not in SCENARIO_NAMES for s in c.scenarios) \
            or len(set(c.scenarios)) != len(c.scenarios):
        raise ConfigError(f"scenarios={c.scenarios!r}: expected distinct names from {SCENARIO_NAMES}")
    _interval("weak", c.weak, 0.05, 2.0)
    _interval("strong", c.strong, 0.05, 2.0)
    _interval("dims_min", c.dims_min, 0, 0, n=3)
    _interval("dims_max", c.dims_max, 0, 0, n=3)
    for lo, hi in zip(c.dims_min, c.dims_max):
        _range("dims_min", lo, 1.5, 50.0)
        _range("dims_max", hi, lo, 50.0)
    _range("speed_of_sound", c.speed_of_sound, 300.0, 400.0)
    _range("wall_margin", c.wall_margin, 0.1, 2.0)
    _range("min_distance", c.min_distance, 0.0, 10.0)
    _interval("source_height", c.source_height, 0.1, 10.0)
    _interval("array_height", c.array_height, 0.1, 10.0)
    if len(c.offsets) < 2 or np.any(np.diff(c.offsets) <= 0):
        raise ConfigError("offsets must be at least two strictly increasing positions")
    span = c.offsets[-1] - c.offsets[0]
    if span + 2 * c.wall_margin >= c.dims_min[0]:
        raise ConfigError(f"array span {span:.2f} m does not fit the smallest room length")
    if not c.k or len(set(c.k)) != len(c.k) or any(k < 1 or k > 200 for k in c.k):
        raise ConfigError(f"k={c.k!r}: values must be distinct and lie in [1, 200]")
    try:
        PairSet(c.pairs).check(len(c.offsets))
    except ValueError as err:
        raise ConfigError(f"pairs: {err}") from None
    _range("margin_db", c.margin_db, 0.0, 40.0)
    _range("floor_db", c.floor_db, -200.0, -1.0)
    _range("sample_rate", c.sample_rate, 8000, 96000)
    _ = c.frame_params  # raises ConfigError on bad framing
    _interval("sir_db", c.sir_db, -40.0, 40.0)
    _interval("overlap", c.overlap, 0.5, 1.0)
    if c.noise_snr_db is not None:
        _range("noise_snr_db", c.noise_snr_db, -20.0, 100.0)
    if not c.out_dir:
        raise ConfigError("output dir is empty")


def parse_config(text: str, base: ExperimentConfig | None = None) -> ExperimentConfig:
    """Parse config text over ``base`` (defaults when omitted)."""
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    try:
        cp.read_string(text)
    except configparser.Error as err:
        raise ConfigError(f"malformed config: {err}") from None
    if cp.defaults():
        raise ConfigError("keys must sit under a [section] header")
    changes = {}
    for section in cp.sections():
        if section not in _SCHEMA:
            raise ConfigError(f"unknown section [{section}]")
        for key, raw in cp.items(section):
            if key not in _SCHEMA[section]:
                raise ConfigError(f"unknown key {key!r} in [{section}]")
            name, parser = _SCHEMA[section][key]
            try:
                changes[name] = parser(raw)
            except ConfigError as err:
                raise ConfigError(f"[{section}] {key}: {err}") from None
    return (base or ExperimentConfig()).replace(**changes)


def load_config(path, base: ExperimentConfig | None = None) -> ExperimentConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as err:
        raise ConfigError(f"cannot read config {path}: {err.strerror}") from None
    return parse_config(text, base)


def dump_config(cfg: ExperimentConfig) -> str:
    """Config text that parses back to ``cfg``."""
    lines = []
    for section, keys in _SCHEMA.items():
        lines.append(f"[{section}]")
        for key, (name, _) in keys.items():
            lines.append(f"{key} = {_fmt(getattr(cfg, name))}")
        lines.append("")
    return "\n".join(lines)
