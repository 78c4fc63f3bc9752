"""Artificial (LFO) and neural (post-filtered) double-tracking.

Both renderers synthesise the unmodified contour and a modified copy with a
small harmonic oscillator bank, then mix the copy in delayed and attenuated.
The oscillator bank is a test vehicle that makes pitch differences audible and
measurable; it is not a vocoder.
"""

from __future__ import annotations

import logging
import wave
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .errors import FormatError
from .f0core import F0Contour, PathLike
from .gmmn.network import GmmnModel
from .postfilter import PostfilterConfig, filter_contour

log = logging.getLogger(__name__)

SYNTH_PEAK = 0.9
FADE_MS = 5.0
F0_MIN_HZ, F0_MAX_HZ = 50.0, 2000.0
PCM_SCALE = 32767.0


@dataclass(frozen=True)
class AdtConfig:
    lfo_rate_hz: float = 0.775
    lfo_depth_semitones: float = 0.1
    lfo_phase_rad: float = 0.0

    def __post_init__(self):
        if not self.lfo_rate_hz > 0:
            raise ValueError("lfo_rate_hz must be > 0")
        if not self.lfo_depth_semitones >= 0:
            raise ValueError("lfo_depth_semitones must be >= 0")


@dataclass(frozen=True)
class MixConfig:
    delay_ms: float = 20.0
    gain_db: Optional[float] = -3.0  # None or -inf mutes the secondary track
    sample_rate_hz: int = 16000

    def __post_init__(self):
        if not self.delay_ms >= 0:
            raise ValueError("delay_ms must be >= 0")
        if not self.sample_rate_hz > 0:
            raise ValueError("sample_rate_hz must be > 0")

    @property
    def gain(self) -> float:
        if self.gain_db is None or self.gain_db == -np.inf:
            return 0.0
        return float(10.0 ** (self.gain_db / 20.0))

    @property
    def delay_samples(self) -> int:
        return int(round(self.delay_ms * self.sample_rate_hz / 1000.0))


@dataclass(frozen=True)
class SynthConfig:
    n_harmonics: int = 10
    rolloff: float = 0.7
    sample_rate_hz: int = 16000


@dataclass(frozen=True)
class Waveform:
    """Mono float samples.

    Mixing is kept linear, so samples may exceed [-1, 1]; ``n_clipped``
    reports how many would clip on 16-bit export.
    """

    samples: NDArray[np.float64]
    sample_rate_hz: int

    def __post_init__(self):
        s = np.array(self.samples, dtype=np.float64).reshape(-1)
        if not np.all(np.isfinite(s)):
            raise ValueError("waveform samples must be finite")
        s.setflags(write=False)
        object.__setattr__(self, "samples", s)

    def __len__(self) -> int:
        return self.samples.size

    @property
    def n_clipped(self) -> int:
        return int(np.count_nonzero(np.abs(self.samples) > 1.0))


def lfo(n_frames: int, frame_shift_ms: float, cfg: AdtConfig) -> NDArray[np.float64]:
    t_s = np.arange(n_frames) * frame_shift_ms / 1000.0
    return cfg.lfo_depth_semitones * np.sin(2.0 * np.pi * cfg.lfo_rate_hz * t_s + cfg.lfo_phase_rad)


def adt_modulate(contour: F0Contour, cfg: AdtConfig = AdtConfig()) -> F0Contour:
    """Add a sine LFO (peak amplitude ``lfo_depth_semitones``) to the contour."""
    if cfg.lfo_depth_semitones == 0:
        return contour
    return contour.with_values(contour.values + lfo(len(contour), contour.frame_shift_ms, cfg))


def synthesize_harmonic(contour: F0Contour, n_harmonics: int = 10, amp_rolloff: float = 0.7,
                        sample_rate_hz: int = 16000) -> Waveform:
    """Additive harmonic rendering of a contour.

    Frame pitch is linearly interpolated to the sample rate and each
    harmonic's phase is the running integral of its instantaneous frequency,
    so pitch changes never produce phase jumps. Harmonics at or above Nyquist
    are dropped. Unvoiced frames are silent, with 5 ms linear fades.
    """
    if n_harmonics < 1:
        raise ValueError("n_harmonics must be >= 1")
    sr = int(sample_rate_hz)
    hz = np.atleast_1d(contour.hz)
    voiced_hz = hz[contour.voicing]
    if voiced_hz.size and (voiced_hz.min() < F0_MIN_HZ or voiced_hz.max() > F0_MAX_HZ):
        raise ValueError(f"voiced f0 outside [{F0_MIN_HZ:g}, {F0_MAX_HZ:g}] Hz")
    n = int(round(len(contour) * contour.frame_shift_ms * sr / 1000.0))
    if not contour.voicing.any() or n == 0:
        return Waveform(np.zeros(n), sr)

    t_frames = np.arange(n) * 1000.0 / (sr * contour.frame_shift_ms)
    f0 = np.interp(t_frames, np.arange(len(contour)), hz)
    phase = 2.0 * np.pi * np.cumsum(f0) / sr
    phase -= phase[0]
    out = np.zeros(n)
    for h in range(1, n_harmonics + 1):
        audible = h * f0 < sr / 2
        if not audible.any():
            break
        out += amp_rolloff ** (h - 1) * np.sin(h * phase) * audible

    frame_idx = np.minimum((t_frames + 0.5).astype(int), len(contour) - 1)
    gate = contour.voicing[frame_idx].astype(np.float64)
    fade = max(1, int(round(FADE_MS * sr / 1000.0)))
    if fade > 1 and not gate.all():
        gate = np.convolve(gate, np.ones(fade) / fade, mode="same")
    out *= gate
    peak = np.max(np.abs(out))
    if peak > 0:
        out *= SYNTH_PEAK / peak
    return Waveform(out, sr)


def shift_gain(secondary: Waveform, cfg: MixConfig) -> NDArray[np.float64]:
    d = cfg.delay_samples
    return np.concatenate([np.zeros(d), secondary.samples * cfg.gain])


def mix_tracks(primary: Waveform, secondary: Waveform, cfg: MixConfig = MixConfig()) -> Waveform:
    """``primary + delayed(secondary) * 10^(gain_db/20)``, zero-extended to the longer track."""
    if primary.sample_rate_hz != secondary.sample_rate_hz:
        raise ValueError("sample rates differ")
    if primary.sample_rate_hz != cfg.sample_rate_hz:
        cfg = MixConfig(cfg.delay_ms, cfg.gain_db, primary.sample_rate_hz)
    sec = shift_gain(secondary, cfg)
    out = np.zeros(max(len(primary), sec.size))
    out[:len(primary)] += primary.samples
    out[:sec.size] += sec
    return Waveform(out, primary.sample_rate_hz)


def render_ndt(model: GmmnModel, contour: F0Contour, pf_cfg: PostfilterConfig,
               mix_cfg: MixConfig = MixConfig(), synth: SynthConfig = SynthConfig()) -> Waveform:
    """Mix the contour's rendering with a post-filtered take."""
    take = filter_contour(model, contour, pf_cfg)
    return _render_pair(contour, take, mix_cfg, synth)


def render_adt(contour: F0Contour, adt_cfg: AdtConfig = AdtConfig(), mix_cfg: MixConfig = MixConfig(),
               synth: SynthConfig = SynthConfig()) -> Waveform:
    return _render_pair(contour, adt_modulate(contour, adt_cfg), mix_cfg, synth)


def _render_pair(contour, modified, mix_cfg, synth):
    sr = mix_cfg.sample_rate_hz
    a = synthesize_harmonic(contour, synth.n_harmonics, synth.rolloff, sr)
    b = synthesize_harmonic(modified, synth.n_harmonics, synth.rolloff, sr)
    return mix_tracks(a, b, mix_cfg)


def peak_normalize(w: Waveform, peak: float = SYNTH_PEAK) -> Waveform:
    m = np.max(np.abs(w.samples)) if len(w) else 0.0
    return w if m == 0 else Waveform(w.samples * (peak / m), w.sample_rate_hz)


def quantize_pcm16(samples: ArrayLike) -> NDArray[np.int16]:
    s = np.clip(np.asarray(samples, dtype=np.float64), -1.0, 1.0)
    return np.round(s * PCM_SCALE).astype(np.int16)


def write_wav(path: PathLike, w: Waveform) -> int:
    """Write mono 16-bit PCM; returns the number of clipped samples."""
    clipped = w.n_clipped
    if clipped:
        log.warning("%s: %d samples clipped to [-1, 1]", path, clipped)
    pcm = quantize_pcm16(w.samples)
    with wave.open(str(path), "wb") as fh:
        fh.setnchannels(1)
        fh.setsampwidth(2)
        fh.setframerate(int(w.sample_rate_hz))
        fh.writeframes(pcm.astype("<i2").tobytes())
    return clipped


def read_wav(path: PathLike) -> Waveform:
    try:
        with wave.open(str(path), "rb") as fh:
            if fh.getnchannels() != 1 or fh.getsampwidth() != 2:
                raise FormatError(f"{path}: expected mono 16-bit PCM")
            sr = fh.getframerate()
            raw = fh.readframes(fh.getnframes())
    except (wave.Error, EOFError) as e:
        raise FormatError(f"{path}: {e}") from None
    pcm = np.frombuffer(raw, dtype="<i2").astype(np.float64)
    return Waveform(pcm / PCM_SCALE, sr)
