"""Command-line interface.

Exit codes: 0 success, 2 usage error, 3 data or format error, 4 numeric
failure. Every randomised command takes an explicit ``--seed``.
"""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from collections import defaultdict
from pathlib import Path

import numpy as np

from . import __version__
from .datagen import MANIFEST_NAME, build_pairs, load_corpus_songs, make_songs, read_manifest, write_corpus
from .doubletrack import (
    AdtConfig, MixConfig, SynthConfig, mix_tracks, peak_normalize, read_wav, render_adt, render_ndt, write_wav,
)
from .errors import FormatError, NumericError
from .evaluate import EvalReport, eval_mmd, eval_variation
from .f0core import read_f0, remove_mean, write_f0
from .gmmn.cmmd import CmmdConfig
from .gmmn.serialize import load_model, save_model
from .gmmn.train import DEFAULT_BATCH, DEFAULT_EPOCHS, DEFAULT_LR, train
from .modspec import StftConfig, extract_ms, normalizer_from_values, reconstruct, write_ms
from .postfilter import PostfilterConfig, sample_variations

log = logging.getLogger("pitchvar")

EXIT_DATA = 3
EXIT_NUMERIC = 4


def _bins(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(b) for b in text.split(",") if b.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad bin list {text!r}") from None


def _add_stft(p):
    p.add_argument("--window", type=int, default=96, help="STFT window in frames (default 96)")
    p.add_argument("--hop", type=int, default=48, help="STFT hop in frames (default 48)")


def _add_mix(p, delay=True):
    if delay:
        p.add_argument("--delay-ms", type=float, default=20.0, help="delay of the second track (default 20)")
        p.add_argument("--gain-db", type=float, default=-3.0, help="gain of the second track (default -3)")
    p.add_argument("--sample-rate", type=int, default=16000, help="output sample rate in Hz (default 16000)")
    p.add_argument("--peak", type=float, default=0.9,
                   help="peak-normalise the mix to this level before writing; 0 disables (default 0.9)")


def _add_synth(p):
    p.add_argument("--harmonics", type=int, default=10, help="harmonics per voice (default 10)")
    p.add_argument("--rolloff", type=float, default=0.7, help="amplitude ratio between harmonics (default 0.7)")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="pitchvar", description="Stochastic pitch post-filter and double-tracking tools.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    ap.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("datagen", help="generate a synthetic paired corpus")
    p.add_argument("--songs", type=int, required=True, help="number of songs")
    p.add_argument("--takes", type=int, required=True, help="natural takes per song")
    p.add_argument("--seed", type=int, required=True, help="corpus seed")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--notes", type=int, default=16, help="notes per song (default 16)")

    p = sub.add_parser("extract", help="write the modulation spectrum of an F0 file")
    p.add_argument("--f0", required=True, help="input F0 file")
    p.add_argument("--out", required=True, help="output MS file (a prefix with --all-offsets)")
    g = p.add_mutually_exclusive_group()
    g.add_argument("--offset", type=int, default=0, help="segmentation offset in frames (default 0)")
    g.add_argument("--all-offsets", action="store_true", help="write one MS per offset as <out>.offNN")
    _add_stft(p)

    p = sub.add_parser("train", help="train the generator on a corpus directory")
    p.add_argument("--corpus", required=True, help="directory written by datagen")
    p.add_argument("--epochs", type=int, default=DEFAULT_EPOCHS, help=f"epochs (default {DEFAULT_EPOCHS})")
    p.add_argument("--batch", type=int, default=DEFAULT_BATCH, help=f"batch size in segments (default {DEFAULT_BATCH})")
    p.add_argument("--seed", type=int, required=True, help="initialisation, noise and ordering seed")
    p.add_argument("--mode", choices=("exact", "rff"), default="exact", help="CMMD weight computation (default exact)")
    p.add_argument("--out", required=True, help="output model file")
    p.add_argument("--lr", type=float, default=DEFAULT_LR, help=f"AdaGrad learning rate (default {DEFAULT_LR})")
    p.add_argument("--lambda", dest="lam", type=float, default=0.01, help="CMMD ridge term (default 0.01)")
    p.add_argument("--sigma-in", type=float, default=100.0, help="condition kernel bandwidth (default 100)")
    p.add_argument("--sigma-out", type=float, default=1.0, help="output kernel bandwidth (default 1)")
    p.add_argument("--rff-dim", type=int, default=1024, help="random Fourier features (default 1024)")
    p.add_argument("--bins", type=_bins, default=(1,), help="comma-separated modulation bins (default 1)")
    _add_stft(p)

    p = sub.add_parser("filter", help="sample post-filtered takes of an F0 file")
    p.add_argument("--model", required=True, help="model file")
    p.add_argument("--f0", required=True, help="input F0 file")
    p.add_argument("--seed", type=int, required=True, help="noise seed")
    p.add_argument("--takes", type=int, default=1, help="number of takes (default 1)")
    p.add_argument("--out", required=True, help="output prefix; writes <out>_takeNNN.f0")

    p = sub.add_parser("adt", help="render LFO double-tracking to WAV")
    p.add_argument("--f0", required=True, help="input F0 file")
    p.add_argument("--rate", type=float, default=0.775, help="LFO rate in Hz (default 0.775)")
    p.add_argument("--depth", type=float, default=0.1, help="LFO peak depth in semitones (default 0.1)")
    p.add_argument("--phase", type=float, default=0.0, help="LFO start phase in radians (default 0)")
    p.add_argument("--out", required=True, help="output WAV")
    _add_mix(p)
    _add_synth(p)

    p = sub.add_parser("ndt", help="render post-filter double-tracking to WAV")
    p.add_argument("--model", required=True, help="model file")
    p.add_argument("--f0", required=True, help="input F0 file")
    p.add_argument("--seed", type=int, required=True, help="noise seed")
    p.add_argument("--out", required=True, help="output WAV")
    _add_mix(p)
    _add_synth(p)

    p = sub.add_parser("mix", help="mix two WAV files with delay and gain")
    p.add_argument("--a", required=True, help="primary WAV")
    p.add_argument("--b", required=True, help="secondary WAV")
    p.add_argument("--delay-ms", type=float, default=20.0, help="delay of --b (default 20)")
    p.add_argument("--gain-db", type=float, default=-3.0, help="gain of --b (default -3)")
    p.add_argument("--peak", type=float, default=0.0, help="peak-normalise the mix; 0 disables (default 0)")
    p.add_argument("--out", required=True, help="output WAV")

    p = sub.add_parser("eval", help="objective report comparing natural contours and sampled takes")
    p.add_argument("--natural", required=True, help="directory of natural F0 files (or a datagen corpus)")
    p.add_argument("--takes", required=True, help="directory of sampled takes (<name>_takeNNN.f0)")
    p.add_argument("--report", required=True, help="output report file")
    p.add_argument("--sigma", type=float, default=1.0, help="MMD kernel bandwidth (default 1)")
    p.add_argument("--bins", type=_bins, default=(1,), help="modulation bins compared (default 1)")

    p = sub.add_parser("plot", help="write contours side by side as CSV columns")
    p.add_argument("--f0", nargs="+", required=True, help="F0 files")
    p.add_argument("--out", required=True, help="output CSV")
    return ap


def cmd_datagen(a):
    songs = make_songs(a.songs, a.takes, a.seed, a.notes)
    path = write_corpus(songs, a.out)
    print(f"wrote {len(songs)} songs x {a.takes} takes to {path}")


def cmd_extract(a):
    cfg = StftConfig(a.window, a.hop)
    mrc = remove_mean(read_f0(a.f0))
    _ensure_parent(a.out)
    if a.all_offsets:
        for k in range(cfg.hop_frames):
            write_ms(f"{a.out}.off{k:02d}", extract_ms(mrc, cfg, k))
    else:
        write_ms(a.out, extract_ms(mrc, cfg, a.offset))


def cmd_train(a):
    cfg = StftConfig(a.window, a.hop)
    songs = load_corpus_songs(a.corpus)
    pairs = build_pairs(songs, cfg, a.bins).interior_only()
    if len(pairs) == 0:
        raise FormatError("corpus has no segments fully inside a contour")
    norm = normalizer_from_values(pairs.target, a.bins)
    ccfg = CmmdConfig(a.lam, a.sigma_in, a.sigma_out, a.rff_dim, a.mode)
    result = train((norm.apply(pairs.cond), norm.apply(pairs.target)), ccfg,
                   epochs=a.epochs, batch_size=a.batch, seed=a.seed, lr=a.lr)
    _ensure_parent(a.out)
    save_model(a.out, result.model, norm, cfg)
    for i, h in enumerate(result.history, 1):
        print(f"epoch {i} cmmd {h!r}")


def _postfilter_cfg(path, seed):
    model, norm, stft = load_model(path, with_assets=True)
    if norm is None:
        raise FormatError(f"{path}: model file carries no normaliser")
    return model, PostfilterConfig(norm.bins, seed, norm, stft or StftConfig())


def cmd_filter(a):
    model, cfg = _postfilter_cfg(a.model, a.seed)
    contour = read_f0(a.f0)
    _ensure_parent(f"{a.out}_take")
    for i, take in enumerate(sample_variations(model, contour, cfg, a.takes)):
        write_f0(f"{a.out}_take{i:03d}.f0", take)


def _ensure_parent(path):
    Path(path).parent.mkdir(parents=True, exist_ok=True)


def _write_audio(path, w, peak):
    if peak > 0:
        w = peak_normalize(w, peak)
    _ensure_parent(path)
    write_wav(path, w)


def cmd_adt(a):
    w = render_adt(read_f0(a.f0), AdtConfig(a.rate, a.depth, a.phase),
                   MixConfig(a.delay_ms, a.gain_db, a.sample_rate), SynthConfig(a.harmonics, a.rolloff, a.sample_rate))
    _write_audio(a.out, w, a.peak)


def cmd_ndt(a):
    model, cfg = _postfilter_cfg(a.model, a.seed)
    w = render_ndt(model, read_f0(a.f0), cfg, MixConfig(a.delay_ms, a.gain_db, a.sample_rate),
                   SynthConfig(a.harmonics, a.rolloff, a.sample_rate))
    _write_audio(a.out, w, a.peak)


def cmd_mix(a):
    wa, wb = read_wav(a.a), read_wav(a.b)
    w = mix_tracks(wa, wb, MixConfig(a.delay_ms, a.gain_db, wa.sample_rate_hz))
    _write_audio(a.out, w, a.peak)


def _natural_files(directory: Path) -> list[Path]:
    manifest = directory / MANIFEST_NAME
    if manifest.exists():
        return [directory / n for _, _, nats in read_manifest(manifest) for n in nats]
    return sorted(directory.glob("*.f0"))


def cmd_eval(a):
    nat_files = _natural_files(Path(a.natural))
    take_files = sorted(Path(a.takes).glob("*.f0"))
    if not nat_files or not take_files:
        raise FormatError("no F0 files found")
    cfg = StftConfig()
    cols = list(a.bins)

    def interior_bins(contour):
        ms = extract_ms(remove_mean(contour), cfg, 0)
        return ms.log_power[ms.interior][:, cols]

    naturals = [read_f0(p) for p in nat_files]
    takes = [read_f0(p) for p in take_files]
    nat_ms = np.concatenate([interior_bins(c) for c in naturals])
    take_ms = np.concatenate([interior_bins(c) for c in takes])
    norm = normalizer_from_values(nat_ms, a.bins)
    report = EvalReport()
    report.add("mmd_squared", eval_mmd(norm.apply(nat_ms), norm.apply(take_ms), a.sigma))

    groups = defaultdict(list)
    for p, c in zip(take_files, takes):
        groups[p.stem.rsplit("_take", 1)[0]].append(c)
    stats = [eval_variation(g) for g in groups.values() if len(g) >= 2]
    if stats:
        report.add("std_mean", np.mean([s.mean_std for s in stats]))
        report.add("std_max", max(s.max_std for s in stats))
        report.add("max_dev_from_first", max(s.max_dev_from_first for s in stats))
    report.add("recon_error_max", max(
        float(np.max(np.abs(reconstruct(extract_ms(remove_mean(c), cfg, 0)).values - c.values)))
        for c in naturals + takes
    ))
    report.add("n_natural", len(naturals))
    report.add("n_takes", len(takes))
    _ensure_parent(a.report)
    report.write(a.report)
    print(report.to_text(), end="")


def cmd_plot(a):
    contours = [read_f0(p) for p in a.f0]
    n = max(len(c) for c in contours)
    shift = contours[0].frame_shift_ms
    _ensure_parent(a.out)
    with open(a.out, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["frame", "time_ms"] + [Path(p).stem for p in a.f0])
        for t in range(n):
            w.writerow([t, repr(t * shift)] + [repr(float(c.values[t])) if t < len(c) else "" for c in contours])


COMMANDS = {
    "datagen": cmd_datagen, "extract": cmd_extract, "train": cmd_train, "filter": cmd_filter,
    "adt": cmd_adt, "ndt": cmd_ndt, "mix": cmd_mix, "eval": cmd_eval, "plot": cmd_plot,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(name)s: %(message)s")
    try:
        COMMANDS[args.command](args)
    except NumericError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_NUMERIC
    except (FormatError, ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_DATA
    return 0


if __name__ == "__main__":
    sys.exit(main())
