"""Synthetic paired corpus: deterministic "generated" contours and varied "natural" takes.

Every song is a random score. Its generated contour renders the score with
the mean singing style and no drift, standing in for a deterministic
synthesiser. Natural takes render the same score with independently sampled
styles (vibrato, overshoot, slow drift), so all takes share note timing and
segment-wise pairing needs no alignment.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from numpy.typing import NDArray
from scipy.signal import lfilter

from .errors import FormatError
from .f0core import DEFAULT_FRAME_SHIFT_MS, F0Contour, PathLike, read_f0, remove_mean, write_f0
from .modspec import StftConfig, extract_ms

MIDI_LOW, MIDI_HIGH = 40, 90
NOTE_MS_LOW, NOTE_MS_HIGH = 200, 1000
SMOOTH_TAU_MS = 40.0
OVERSHOOT_TAU_MS = 60.0
VIBRATO_ONSET_MS = 200.0
DRIFT_CUTOFF_HZ = 1.5
MANIFEST_HEADER = "#CORPUS v1"
MANIFEST_NAME = "manifest.txt"


def min_score_ms(cfg: StftConfig = StftConfig(), frame_shift_ms: float = DEFAULT_FRAME_SHIFT_MS) -> float:
    return 2 * cfg.window_frames * frame_shift_ms


@dataclass(frozen=True)
class Note:
    midi: int
    duration_ms: float
    rest: bool = False


@dataclass(frozen=True)
class Score:
    notes: tuple[Note, ...]

    def __post_init__(self):
        notes = tuple(self.notes)
        if not notes:
            raise ValueError("score has no notes")
        for n in notes:
            if not (MIDI_LOW <= n.midi <= MIDI_HIGH):
                raise ValueError(f"pitch {n.midi} outside {MIDI_LOW}-{MIDI_HIGH}")
            if not n.duration_ms > 0:
                raise ValueError("note durations must be > 0")
        if all(n.rest for n in notes):
            raise ValueError("score has only rests")
        if self.duration_ms < min_score_ms():
            raise ValueError(f"score shorter than {min_score_ms():.0f} ms")
        object.__setattr__(self, "notes", notes)

    @property
    def duration_ms(self) -> float:
        return float(sum(n.duration_ms for n in self.notes))

    def mean_pitch(self) -> float:
        """Duration-weighted mean pitch of the sung notes."""
        sung = [n for n in self.notes if not n.rest]
        w = np.array([n.duration_ms for n in sung])
        return float(np.dot(w, [n.midi for n in sung]) / w.sum())


@dataclass(frozen=True)
class NaturalStyle:
    vibrato_rate_hz: float = 6.0
    vibrato_depth: float = 0.5
    vibrato_phase: float = 0.0
    overshoot: float = 0.25
    drift_std: float = 0.0
    seed: int = 0


RANGES = {
    "vibrato_rate_hz": (5.0, 7.0),
    "vibrato_depth": (0.2, 0.8),
    "overshoot": (0.0, 0.5),
    "drift_std": (0.05, 0.2),
}


def sample_style(seed: int) -> NaturalStyle:
    rng = np.random.default_rng(seed)
    draws = {k: float(rng.uniform(lo, hi)) for k, (lo, hi) in RANGES.items()}
    return NaturalStyle(vibrato_phase=float(rng.uniform(0, 2 * np.pi)), seed=int(seed), **draws)


def mean_style() -> NaturalStyle:
    """Every style parameter at its distribution mean, drift off."""
    means = {k: 0.5 * (lo + hi) for k, (lo, hi) in RANGES.items()}
    means["drift_std"] = 0.0
    return NaturalStyle(vibrato_phase=0.0, seed=0, **means)


def gen_score(seed: int, n_notes: int = 16, rest_prob: float = 0.1) -> Score:
    """Random stepwise melody; durations on the 5 ms grid in [200, 1000] ms.

    The last note is lengthened if needed so the score spans two analysis
    windows.
    """
    if n_notes < 1:
        raise ValueError("n_notes must be >= 1")
    rng = np.random.default_rng(seed)
    steps = np.array([-4, -3, -2, -1, 0, 1, 2, 3, 4])
    weights = np.array([1, 2, 4, 6, 3, 6, 4, 2, 1], dtype=float)
    pitch = int(rng.integers(55, 73))
    notes = []
    for i in range(n_notes):
        if i:
            step = int(rng.choice(steps, p=weights / weights.sum()))
            if not MIDI_LOW <= pitch + step <= MIDI_HIGH:
                step = -step
            pitch += step
        dur = 5.0 * int(rng.integers(NOTE_MS_LOW // 5, NOTE_MS_HIGH // 5 + 1))
        rest = bool(0 < i < n_notes - 1 and rng.uniform() < rest_prob)
        notes.append(Note(pitch, dur, rest))
    total = sum(n.duration_ms for n in notes)
    need = min_score_ms()
    if total < need:
        last = notes[-1]
        notes[-1] = Note(last.midi, last.duration_ms + need - total, last.rest)
    return Score(tuple(notes))


def _note_frames(score: Score, frame_shift_ms: float):
    """Per-frame target pitch, voicing, and onset frame index of each note."""
    bounds = np.round(np.cumsum([0.0] + [n.duration_ms for n in score.notes]) / frame_shift_ms).astype(int)
    target = np.empty(bounds[-1])
    voiced = np.ones(bounds[-1], dtype=bool)
    held = next(n.midi for n in score.notes if not n.rest)
    for n, a, b in zip(score.notes, bounds[:-1], bounds[1:]):
        if n.rest:
            voiced[a:b] = False
        else:
            held = n.midi
        target[a:b] = held
    return target, voiced, bounds[:-1]


def _one_pole(x: NDArray, a: float) -> NDArray:
    y, _ = lfilter([1.0 - a], [1.0, -a], x, zi=[a * x[0]])
    return y


def render_natural(score: Score, style: NaturalStyle, frame_shift_ms: float = DEFAULT_FRAME_SHIFT_MS) -> F0Contour:
    target, voiced, onsets = _note_frames(score, frame_shift_ms)
    t_ms = np.arange(target.size) * frame_shift_ms
    a = np.exp(-frame_shift_ms / SMOOTH_TAU_MS)
    f0 = _one_pole(_one_pole(target, a), a)

    sung = [(n.midi, k) for n, k in zip(score.notes, onsets) if not n.rest]
    for (prev, _), (cur, k) in zip(sung[:-1], sung[1:]):
        if cur != prev and style.overshoot > 0:
            u = np.maximum(t_ms[k:] - t_ms[k], 0.0) / OVERSHOOT_TAU_MS
            f0[k:] += style.overshoot * np.sign(cur - prev) * u * np.exp(1.0 - u)

    if style.vibrato_depth > 0:
        env = np.zeros(target.size)
        for k, k_next in zip(onsets, list(onsets[1:]) + [target.size]):
            env[k:k_next] = np.minimum(1.0, (t_ms[k:k_next] - t_ms[k]) / VIBRATO_ONSET_MS)
        f0 += style.vibrato_depth * env * np.sin(2 * np.pi * style.vibrato_rate_hz * t_ms / 1000.0 + style.vibrato_phase)

    if style.drift_std > 0:
        rng = np.random.default_rng(style.seed)
        b = np.exp(-2 * np.pi * DRIFT_CUTOFF_HZ * frame_shift_ms / 1000.0)
        drift = _one_pole(_one_pole(rng.normal(size=target.size), b), b)
        drift -= drift.mean()
        sd = drift.std()
        if sd > 0:
            f0 += style.drift_std * drift / sd

    if not voiced.all():
        idx = np.flatnonzero(voiced)
        f0 = np.interp(np.arange(f0.size), idx, f0[idx])
    return F0Contour(f0, voiced, frame_shift_ms)


def render_generated(score: Score, frame_shift_ms: float = DEFAULT_FRAME_SHIFT_MS) -> F0Contour:
    return render_natural(score, mean_style(), frame_shift_ms)


@dataclass
class Song:
    song_id: int
    score: Score
    generated: F0Contour
    naturals: list[F0Contour]


@dataclass
class PairSet:
    """Segment-aligned raw log-power pairs plus where each came from.

    ``cond[i]`` is the generated contour's MS at the selected bins and
    ``target[i]`` a natural take's MS at the same song, offset and segment.
    """

    cond: NDArray[np.float64]
    target: NDArray[np.float64]
    song: NDArray[np.int64]
    take: NDArray[np.int64]
    offset: NDArray[np.int64]
    segment: NDArray[np.int64]
    interior: NDArray[np.bool_]
    bins: tuple[int, ...]

    def __len__(self) -> int:
        return self.cond.shape[0]

    def select(self, mask: NDArray[np.bool_]) -> "PairSet":
        return PairSet(self.cond[mask], self.target[mask], self.song[mask], self.take[mask],
                       self.offset[mask], self.segment[mask], self.interior[mask], self.bins)

    def interior_only(self) -> "PairSet":
        """Pairs from segments not touching the zero padding (the training set)."""
        return self.select(self.interior)


@dataclass
class Corpus:
    songs: list[Song]
    pairs: PairSet
    stft: StftConfig = field(default_factory=StftConfig)


def build_pairs(songs: Sequence[Song], cfg: StftConfig = StftConfig(), bins: Sequence[int] = (1,)) -> PairSet:
    bins = tuple(bins)
    cols = list(bins)
    out = {k: [] for k in ("cond", "target", "song", "take", "offset", "segment", "interior")}
    for song in songs:
        if len(song.generated) < cfg.window_frames:
            raise ValueError(f"song {song.song_id}: contour shorter than one window")
        gen_mrc = remove_mean(song.generated)
        nat_mrcs = [remove_mean(c) for c in song.naturals]
        for c in song.naturals:
            if len(c) != len(song.generated):
                raise ValueError(f"song {song.song_id}: natural and generated lengths differ")
        for off in range(cfg.hop_frames):
            g_ms = extract_ms(gen_mrc, cfg, off)
            g = g_ms.log_power[:, cols]
            for k, nat in enumerate(nat_mrcs):
                t = extract_ms(nat, cfg, off).log_power[:, cols]
                n_seg = g.shape[0]
                out["cond"].append(g)
                out["target"].append(t)
                out["song"].append(np.full(n_seg, song.song_id))
                out["take"].append(np.full(n_seg, k))
                out["offset"].append(np.full(n_seg, off))
                out["segment"].append(np.arange(n_seg))
                out["interior"].append(g_ms.interior)
    cat = {k: np.concatenate(v) for k, v in out.items()}
    return PairSet(cat["cond"], cat["target"], cat["song"], cat["take"], cat["offset"],
                   cat["segment"], cat["interior"], bins)


def make_songs(n_songs: int, takes_per_song: int, seed: int, n_notes: int = 16) -> list[Song]:
    if n_songs < 1:
        raise ValueError("n_songs must be >= 1")
    if takes_per_song < 1:
        raise ValueError("takes_per_song must be >= 1")
    songs = []
    for i, ss in enumerate(np.random.SeedSequence(seed).spawn(n_songs)):
        score_seed, *take_seeds = (int(s.generate_state(1)[0]) for s in ss.spawn(1 + takes_per_song))
        score = gen_score(score_seed, n_notes)
        naturals = [render_natural(score, sample_style(s)) for s in take_seeds]
        songs.append(Song(i, score, render_generated(score), naturals))
    return songs


def build_corpus(n_songs: int, takes_per_song: int, seed: int, cfg: StftConfig = StftConfig(),
                 n_notes: int = 16, bins: Sequence[int] = (1,)) -> Corpus:
    """Songs plus offset-augmented training pairs; a pure function of ``seed``."""
    songs = make_songs(n_songs, takes_per_song, seed, n_notes)
    return Corpus(songs, build_pairs(songs, cfg, bins), cfg)


def write_corpus(songs: Sequence[Song], out_dir: PathLike) -> Path:
    """Write F0 files and the manifest; returns the manifest path."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    lines = [MANIFEST_HEADER]
    for song in songs:
        gen_name = f"song{song.song_id:03d}_generated.f0"
        write_f0(out / gen_name, song.generated)
        nat_names = []
        for k, c in enumerate(song.naturals):
            name = f"song{song.song_id:03d}_natural{k:02d}.f0"
            write_f0(out / name, c)
            nat_names.append(name)
        lines.append(f"song {song.song_id} generated {gen_name} natural {' '.join(nat_names)}")
    path = out / MANIFEST_NAME
    path.write_text("\n".join(lines) + "\n")
    return path


def read_manifest(path: PathLike) -> list[tuple[int, str, list[str]]]:
    lines = [ln for ln in Path(path).read_text().splitlines() if ln.strip()]
    if not lines or lines[0].strip() != MANIFEST_HEADER:
        raise FormatError("missing '#CORPUS v1' header")
    entries = []
    for lineno, ln in enumerate(lines[1:], start=2):
        parts = ln.split()
        if len(parts) < 6 or parts[0] != "song" or parts[2] != "generated" or parts[4] != "natural":
            raise FormatError(f"manifest line {lineno}: expected 'song <id> generated <path> natural <path>...'")
        try:
            sid = int(parts[1])
        except ValueError:
            raise FormatError(f"manifest line {lineno}: bad song id") from None
        entries.append((sid, parts[3], parts[5:]))
    return entries


def load_corpus_songs(directory: PathLike, manifest: Optional[PathLike] = None) -> list[Song]:
    """Read contours listed in a manifest (scores are not stored on disk)."""
    d = Path(directory)
    entries = read_manifest(manifest or d / MANIFEST_NAME)
    return [
        Song(sid, None, read_f0(d / gen), [read_f0(d / n) for n in nats])
        for sid, gen, nats in entries
    ]
