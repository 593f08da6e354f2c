"""Command-line driver: ``rirsf [--seed N] [--config FILE] [--out DIR] <command>``.

Commands
--------
simulate  target RIRs per sampled room -> ``rirs/*.rsft`` and ``simulate.csv``
mix       reverberant two-talker bundles -> ``mix/<bundle>/*.wav`` and ``meta.txt``
features  SF or RSF maps of mix bundles -> ``features/<bundle>/*.rsft``
eval      full experiment -> ``report.csv`` and ``failures.txt``
report    readable summary of ``report.csv`` and ``simulate.csv``
plot      PGM heatmaps of feature tensors -> ``plots/*.pgm``

Every file is written below ``--out``. Exit status is 0 on success, 1 on a
usage error and 2 on a data error.
"""
from __future__ import annotations

import argparse
import csv
import io
import logging
import os
import sys

import numpy as np

from . import io as rio
from .config import BAND_NAMES, ExperimentConfig, dump_config, load_config
from .dsp import ConfigError, stft
from .evaluation import ScenarioSpec, dominance_mask, perturb_scenario
from .experiment import build_utterance, run_experiment, sample_room, sample_speaker
from .features import PairSet, compute_rsf, compute_sf
from .room import ArrayGeometry, RoomSpec, Rir, ctf_from_rir, measure_rt60, simulate_rir
from .sources import derive_seed

log = logging.getLogger("rirsf")

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _global_flags(suppress: bool) -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    default = argparse.SUPPRESS if suppress else None
    p.add_argument("--seed", type=int, default=default, help="master seed (overrides the config)")
    p.add_argument("--config", default=default, help="experiment config file")
    p.add_argument("--out", default=default, help="output directory (overrides the config)")
    return p


def _k_arg(text: str):
    """Frames as an integer, or seconds with an ``s`` suffix (``0.1s``)."""
    t = text.strip().lower()
    try:
        return ("s", float(t[:-1])) if t.endswith("s") else ("f", int(t))
    except ValueError:
        raise argparse.ArgumentTypeError(f"k must be frames (10) or seconds (0.1s), got {text!r}")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="rirsf", description="RIR-based spatial feature experiments.",
                     parents=[_global_flags(False)])
    sub = parser.add_subparsers(dest="command", metavar="command", parser_class=_Parser)
    sub.required = True
    common = [_global_flags(True)]

    p = sub.add_parser("simulate", parents=common, help="simulate target RIRs")
    p.add_argument("--rooms", type=int, help="room count (default from config)")
    p.add_argument("--rt60", type=float, help="fixed RT60 in seconds instead of a band draw")
    p.add_argument("--band", choices=BAND_NAMES, default="strong")

    p = sub.add_parser("mix", parents=common, help="synthesise mixture bundles")
    p.add_argument("--rooms", type=int)
    p.add_argument("--utterances", type=int)
    p.add_argument("--band", choices=BAND_NAMES, default="strong")

    p = sub.add_parser("features", parents=common, help="extract SF/RSF from bundles")
    p.add_argument("--bundle", action="append", help="bundle directory (default: all under OUT/mix)")
    p.add_argument("--feature", choices=("sf", "rsf"), default="rsf")
    p.add_argument("--k", type=_k_arg, default=("f", 10), help="frames, or seconds with 's' suffix")
    p.add_argument("--scenario", choices=("ideal", "sce1", "sce2"), default="ideal")

    sub.add_parser("eval", parents=common, help="run the experiment and write report.csv")
    sub.add_parser("report", parents=common, help="summarise report.csv / simulate.csv")

    p = sub.add_parser("plot", parents=common, help="render feature tensors as PGM heatmaps")
    p.add_argument("--tensor", action="append", help="tensor file (default: all under OUT/features)")
    return parser


# --- helpers ----------------------------------------------------------------

def _enc(v) -> str:
    if isinstance(v, (tuple, list, np.ndarray)):
        return ",".join(_enc(x) for x in np.asarray(v).ravel().tolist())
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _floats(text: str) -> np.ndarray:
    return np.array([float(x) for x in text.split(",")])


def _write_text(path, text: str) -> None:
    rio._atomic_write(path, text.encode("ascii"))


def _resolve_config(args) -> ExperimentConfig:
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    changes = {}
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.out is not None:
        changes["out_dir"] = args.out
    return cfg.replace(**changes) if changes else cfg


def _count(value, name):
    if value is not None and value < 1:
        raise UsageError(f"--{name} must be at least 1")
    return value


# --- commands ---------------------------------------------------------------

def cmd_simulate(cfg, args, out):
    n_rooms = _count(args.rooms, "rooms") or cfg.rooms
    if args.rt60 is not None:
        cfg = cfg.replace(**{args.band: (args.rt60, args.rt60)})
    os.makedirs(os.path.join(out, "rirs"), exist_ok=True)
    rows = [("room", "dims", "target_rt60", "measured_rt60")]
    b = BAND_NAMES.index(args.band)
    for i in range(n_rooms):
        rng = np.random.default_rng(derive_seed(cfg.seed, b, i))
        room, array = sample_room(cfg, args.band, rng)
        src = sample_speaker(cfg, room, array, np.random.default_rng(derive_seed(cfg.seed, b, i, 1)))
        rir = simulate_rir(room, src, array, cfg.sample_rate)
        measured = measure_rt60(rir)
        rio.write_tensor(os.path.join(out, "rirs", f"room{i:03d}.rsft"), rir.taps, {
            "kind": "rir", "sample_rate": rir.sample_rate, "dims": _enc(room.dims),
            "rt60": _enc(room.rt60), "source": _enc(src), "mics": _enc(array.mic_positions)})
        rows.append((i, "x".join(f"{d:.3f}" for d in room.dims), f"{room.rt60:.6f}", f"{measured:.6f}"))
        log.info("room %d: rt60 %.3f s, measured %.3f s", i, room.rt60, measured)
    _write_text(os.path.join(out, "simulate.csv"), _csv(rows))
    return EXIT_OK


def cmd_mix(cfg, args, out):
    n_rooms = _count(args.rooms, "rooms") or cfg.rooms
    n_utts = _count(args.utterances, "utterances") or cfg.utterances
    for r in range(n_rooms):
        for u in range(n_utts):
            utt = build_utterance(cfg, args.band, r, u)
            name = f"{args.band}_r{r:03d}_u{u:02d}"
            d = os.path.join(out, "mix", name)
            os.makedirs(d, exist_ok=True)
            b = utt.bundle
            rio.write_wav(os.path.join(d, "mixture.wav"), b.mixture)
            rio.write_wav(os.path.join(d, "target.wav"), b.images[0])
            rio.write_wav(os.path.join(d, "interferer.wav"), b.images[1])
            rio.write_tensor(os.path.join(d, "target_rir.rsft"), utt.target_rir.taps,
                             {"kind": "rir", "sample_rate": cfg.sample_rate})
            meta = {key: _enc(val) for key, val in b.meta.items()}
            meta.update(mics=_enc(utt.array.mic_positions), speed_of_sound=_enc(cfg.speed_of_sound),
                        sce1_seed=utt.scenario_seeds["sce1"], sce2_seed=utt.scenario_seeds["sce2"],
                        master_seed=cfg.seed)
            rio.write_meta(os.path.join(d, "meta.txt"), meta)
            log.info("bundle %s written", name)
    return EXIT_OK


def _bundle_ctf(cfg, bdir, meta, scenario):
    params = cfg.frame_params
    if scenario == "ideal":
        t = rio.read_tensor(os.path.join(bdir, "target_rir.rsft"))
        return ctf_from_rir(Rir(t.data.astype(float), int(t.meta["sample_rate"])), params)
    room = RoomSpec(tuple(_floats(meta["dims"])), float(meta["rt60"]), float(meta["speed_of_sound"]))
    array = ArrayGeometry(_floats(meta["mics"]).reshape(-1, 3))
    spec = ScenarioSpec(scenario, seed=int(meta[f"{scenario}_seed"]))
    room, src, array = perturb_scenario(room, _floats(meta["target_pos"]), array, spec)
    return ctf_from_rir(simulate_rir(room, src, array, cfg.sample_rate), params)


def cmd_features(cfg, args, out):
    params = cfg.frame_params
    unit, val = args.k
    k = params.frames_for_seconds(val) if unit == "s" else val
    if k < 1:
        raise UsageError("--k must be at least one frame")
    bundles = args.bundle or _listdirs(os.path.join(out, "mix"))
    if not bundles:
        raise FileNotFoundError(f"no bundles under {os.path.join(out, 'mix')}")
    pairs = PairSet(cfg.pairs)
    for bdir in bundles:
        meta = rio.read_meta(os.path.join(bdir, "meta.txt"))
        y = stft(rio.read_wav(os.path.join(bdir, "mixture.wav")), params)
        ctf = _bundle_ctf(cfg, bdir, meta, args.scenario)
        if args.feature == "sf":
            fmap, k_used = compute_sf(y, ctf, pairs), 1
        else:
            k_used = min(k, ctf.n_frames)
            fmap = compute_rsf(y, ctf, pairs, k_used)
        name = os.path.basename(os.path.normpath(bdir))
        d = os.path.join(out, "features", name)
        os.makedirs(d, exist_ok=True)
        info = {"kind": args.feature, "k": k_used, "scenario": args.scenario,
                "pairs": ",".join(f"{a}-{b}" for a, b in pairs), "bundle": name}
        rio.write_tensor(os.path.join(d, f"{args.feature}_k{k_used}_{args.scenario}.rsft"),
                         fmap.values, info)
        xt = stft(rio.read_wav(os.path.join(bdir, "target.wav")), params)
        xi = stft(rio.read_wav(os.path.join(bdir, "interferer.wav")), params)
        mask = dominance_mask(xt, xi, cfg.margin_db, floor_db=cfg.floor_db)
        rio.write_tensor(os.path.join(d, "mask.rsft"), mask.labels.astype(np.float32),
                         {"kind": "mask", "margin_db": _enc(cfg.margin_db), "bundle": name})
        log.info("features %s: %s k=%d %s", name, args.feature, k_used, args.scenario)
    return EXIT_OK


def cmd_eval(cfg, args, out):
    report = run_experiment(cfg)
    _write_text(os.path.join(out, "report.csv"), report.to_csv())
    _write_text(os.path.join(out, "failures.txt"), report.failures_text())
    _write_text(os.path.join(out, "config.cfg"), dump_config(cfg))
    for band, room, utt, msg in report.failures:
        log.warning("failed %s room %d utterance %d: %s", band, room, utt, msg)
    if report.rows and all(r["n_utterances"] == 0 for r in report.rows):
        print("every utterance failed; see failures.txt", file=sys.stderr)
        return EXIT_DATA
    print(f"wrote {os.path.join(out, 'report.csv')} ({len(report.failures)} failed utterances)")
    return EXIT_OK


def cmd_report(cfg, args, out):
    shown = False
    sim = os.path.join(out, "simulate.csv")
    if os.path.exists(sim):
        shown = True
        print("Simulated RIRs (Schroeder T30)")
        for row in _read_csv(sim):
            t, m = float(row["target_rt60"]), float(row["measured_rt60"])
            print(f"  room {row['room']:>3}  {row['dims']:>17} m  target {t:.3f} s  "
                  f"measured {m:.3f} s  ({100 * (m - t) / t:+.1f}%)")
    rep = os.path.join(out, "report.csv")
    if os.path.exists(rep):
        shown = True
        rows = _read_csv(rep)
        print("Feature quality (means over utterances)")
        print(f"  {'band':<7}{'scenario':<9}{'feature':<9}{'k':>3}{'n':>5}"
              f"{'on tgt':>9}{'on int':>9}{'AUC':>8}{'LPS r':>8}")
        for r in rows:
            print(f"  {r['band']:<7}{r['scenario']:<9}{r['feature']:<9}{r['k']:>3}{r['n_utterances']:>5}"
                  f"{r['mean_on_target']:>9}{r['mean_on_interferer']:>9}{r['auc']:>8}{r['lps_correlation']:>8}")
    if not shown:
        raise FileNotFoundError(f"neither simulate.csv nor report.csv under {out}")
    return EXIT_OK


def cmd_plot(cfg, args, out):
    feats = os.path.join(out, "features")
    paths = args.tensor or sorted(
        os.path.join(dp, f) for dp, _, fs in os.walk(feats) for f in fs if f.endswith(".rsft"))
    if not paths:
        raise FileNotFoundError(f"no tensors under {feats}")
    os.makedirs(os.path.join(out, "plots"), exist_ok=True)
    for path in paths:
        t = rio.read_tensor(path)
        if t.data.ndim != 2 or np.iscomplexobj(t.data):
            raise rio.FormatError(f"{path}: heatmaps need a real 2-D tensor, got shape {t.data.shape}")
        rel = os.path.relpath(path, feats) if os.path.abspath(path).startswith(os.path.abspath(feats)) \
            else os.path.basename(path)
        name = rel[: -len(".rsft")].replace(os.sep, "_") + ".pgm"
        rio.render_heatmap(t.data, os.path.join(out, "plots", name))
    return EXIT_OK


COMMANDS = {"simulate": cmd_simulate, "mix": cmd_mix, "features": cmd_features,
            "eval": cmd_eval, "report": cmd_report, "plot": cmd_plot}


def _listdirs(path):
    if not os.path.isdir(path):
        return []
    return [os.path.join(path, d) for d in sorted(os.listdir(path)) if os.path.isdir(os.path.join(path, d))]


def _csv(rows) -> str:
    buf = io.StringIO()
    csv.writer(buf, lineterminator="\n").writerows(rows)
    return buf.getvalue()


def _read_csv(path):
    with open(path, newline="", encoding="ascii") as fh:
        return list(csv.DictReader(fh))


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(message)s", stream=sys.stderr)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse: help -> 0, usage error -> 1
        return int(exc.code or 0)
    try:
        cfg = _resolve_config(args)
    except ConfigError as err:
        print(f"rirsf: config error: {err}", file=sys.stderr)
        return EXIT_DATA
    out = cfg.out_dir
    try:
        if args.command != "report":
            os.makedirs(out, exist_ok=True)
        return COMMANDS[args.command](cfg, args, out)
    except UsageError as err:
        parser.print_usage(sys.stderr)
        print(f"rirsf: error: {err}", file=sys.stderr)
        return EXIT_USAGE
    except (ValueError, OSError, KeyError) as err:
        print(f"rirsf: {args.command}: {type(err).__name__}: {err}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
