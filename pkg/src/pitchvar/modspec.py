"""Modulation spectrum of pitch contours.

The modulation spectrum (MS) is the log power of a short-time Fourier
transform taken along the time axis of a mean-removed contour. Analysis uses a
periodic Hann window at 50% overlap, whose shifted copies sum to one, so plain
overlap-add of the inverse frames recovers the contour exactly.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .errors import FormatError
from .f0core import F0Contour, MeanRemovedContour, PathLike

POWER_FLOOR = 1e-12
LOG_FLOOR = float(np.log(POWER_FLOOR))
PHASE_ZERO_MAG = 1e-15
NORM_LOW = 0.01
NORM_HIGH = 0.99
MS_HEADER = "#MS v1"


@dataclass(frozen=True)
class StftConfig:
    window_frames: int = 96
    hop_frames: int = 48

    def __post_init__(self):
        if self.window_frames < 4 or self.window_frames % 2:
            raise ValueError("window_frames must be even and >= 4")
        if self.window_frames != 2 * self.hop_frames:
            raise ValueError("window_frames must equal 2 * hop_frames")

    @property
    def n_bins(self) -> int:
        return self.window_frames // 2 + 1

    @property
    def window(self) -> NDArray[np.float64]:
        n = np.arange(self.window_frames)
        return 0.5 - 0.5 * np.cos(2.0 * np.pi * n / self.window_frames)

    def n_segments(self, length: int) -> int:
        """Segment count for a contour of ``length`` frames; the same for every offset."""
        return (length - 2) // self.hop_frames + 3

    def padded_length(self, length: int) -> int:
        return (self.n_segments(length) + 1) * self.hop_frames


@dataclass(frozen=True)
class ModulationSpectrum:
    """Segment-by-bin log power and phase of one contour.

    Attributes:
        log_power: natural-log power, shape (T', M + 1).
        phase: radians in (-pi, pi], shape (T', M + 1).
        config: analysis settings.
        source_mean: semitone mean removed before analysis.
        source_length: frame count of the analysed contour.
        offset: head-padding offset used for segmentation.
    """

    log_power: NDArray[np.float64]
    phase: NDArray[np.float64]
    config: StftConfig
    source_mean: float
    source_length: int
    offset: int = 0
    frame_shift_ms: float = 5.0

    def __post_init__(self):
        lp = np.array(self.log_power, dtype=np.float64)
        ph = np.array(self.phase, dtype=np.float64)
        if lp.ndim != 2 or lp.shape != ph.shape:
            raise FormatError("log_power and phase must be matrices of equal shape")
        if lp.shape[1] != self.config.n_bins:
            raise FormatError(f"expected {self.config.n_bins} bins, got {lp.shape[1]}")
        if lp.shape[0] != self.config.n_segments(self.source_length):
            raise FormatError("segment count does not match source_length")
        if not (0 <= self.offset < self.config.hop_frames):
            raise FormatError("offset out of range")
        lp.setflags(write=False)
        ph.setflags(write=False)
        object.__setattr__(self, "log_power", lp)
        object.__setattr__(self, "phase", ph)

    @property
    def n_segments(self) -> int:
        return self.log_power.shape[0]

    @property
    def interior(self) -> NDArray[np.bool_]:
        return interior_segments(self.config, self.source_length, self.offset)

    def with_log_power(self, log_power: ArrayLike) -> "ModulationSpectrum":
        return ModulationSpectrum(
            log_power, self.phase, self.config, self.source_mean,
            self.source_length, self.offset, self.frame_shift_ms,
        )


def interior_segments(cfg: StftConfig, length: int, offset: int) -> NDArray[np.bool_]:
    """Segments whose whole window lies on contour frames rather than padding."""
    head = cfg.window_frames - cfg.hop_frames + offset
    start = np.arange(cfg.n_segments(length)) * cfg.hop_frames
    return (start >= head) & (start + cfg.window_frames <= head + length)


def _check_offset(cfg: StftConfig, offset: int) -> None:
    if not (0 <= offset < cfg.hop_frames):
        raise ValueError(f"offset must lie in [0, {cfg.hop_frames})")


def pad_contour(x: NDArray[np.float64], cfg: StftConfig, offset: int) -> NDArray[np.float64]:
    head = cfg.window_frames - cfg.hop_frames + offset
    padded = np.zeros(cfg.padded_length(x.size))
    padded[head:head + x.size] = x
    return padded


def frame_signal(padded: NDArray[np.float64], cfg: StftConfig) -> NDArray[np.float64]:
    n_seg = (padded.size - cfg.window_frames) // cfg.hop_frames + 1
    idx = np.arange(n_seg)[:, None] * cfg.hop_frames + np.arange(cfg.window_frames)[None, :]
    return padded[idx]


def stft(mrc: MeanRemovedContour, cfg: StftConfig = StftConfig(), offset_frames: int = 0) -> NDArray[np.complex128]:
    """Complex STFT of a mean-removed contour, bins 0..M only."""
    _check_offset(cfg, offset_frames)
    x = np.asarray(mrc.centered, dtype=np.float64)
    if x.size == 0:
        raise ValueError("empty contour")
    frames = frame_signal(pad_contour(x, cfg, offset_frames), cfg) * cfg.window
    return np.fft.rfft(frames, axis=1)


def istft(spec: NDArray[np.complex128], cfg: StftConfig, length: int, offset: int) -> NDArray[np.float64]:
    """Overlap-add inverse of :func:`stft`, trimmed back to ``length`` frames."""
    frames = np.fft.irfft(spec, n=cfg.window_frames, axis=1)
    n_seg = frames.shape[0]
    total = (n_seg + 1) * cfg.hop_frames
    out = np.zeros(total)
    env = np.zeros(total)
    win = cfg.window
    for k in range(n_seg):
        s = k * cfg.hop_frames
        out[s:s + cfg.window_frames] += frames[k]
        env[s:s + cfg.window_frames] += win
    head = cfg.window_frames - cfg.hop_frames + offset
    seg = slice(head, head + length)
    # every kept frame sits under two overlapping windows, so env is ~1 there
    return out[seg] / env[seg]


def extract_ms(mrc: MeanRemovedContour, cfg: StftConfig = StftConfig(), offset: int = 0) -> ModulationSpectrum:
    spec = stft(mrc, cfg, offset)
    power = spec.real ** 2 + spec.imag ** 2
    phase = np.angle(spec)
    phase[np.abs(spec) < PHASE_ZERO_MAG] = 0.0
    phase[phase <= -np.pi] = np.pi
    return ModulationSpectrum(
        np.log(power + POWER_FLOOR), phase, cfg, mrc.mean, len(mrc), offset, mrc.frame_shift_ms,
    )


def ms_to_complex(ms: ModulationSpectrum) -> NDArray[np.complex128]:
    # eps * expm1(lp - ln eps) == exp(lp) - eps, exactly zero at the floor
    mag = np.sqrt(np.maximum(POWER_FLOOR * np.expm1(ms.log_power - LOG_FLOOR), 0.0))
    return mag * np.exp(1j * ms.phase)


def reconstruct(ms: ModulationSpectrum, voicing: Optional[ArrayLike] = None) -> F0Contour:
    """Inverse STFT with the stored phase, mean restored."""
    centered = istft(ms_to_complex(ms), ms.config, ms.source_length, ms.offset)
    return F0Contour(centered + ms.source_mean, voicing, ms.frame_shift_ms)


def augment_offsets(mrc: MeanRemovedContour, cfg: StftConfig = StftConfig()) -> list[ModulationSpectrum]:
    """One MS per segmentation offset ``0..hop-1``."""
    return [extract_ms(mrc, cfg, k) for k in range(cfg.hop_frames)]


@dataclass(frozen=True)
class MsNormalizer:
    """Per-bin affine map sending the fitted [min, max] onto [0.01, 0.99].

    ``bins`` lists the modulation-bin indices the columns of ``lo``/``hi``
    refer to; :meth:`apply` and :meth:`invert` expect arrays whose last axis
    has ``len(bins)`` entries.
    """

    lo: NDArray[np.float64]
    hi: NDArray[np.float64]
    bins: tuple[int, ...]

    def __post_init__(self):
        lo = np.array(self.lo, dtype=np.float64).reshape(-1)
        hi = np.array(self.hi, dtype=np.float64).reshape(-1)
        if lo.shape != hi.shape or lo.size != len(self.bins):
            raise ValueError("lo, hi and bins must have equal length")
        for b, a, z in zip(self.bins, lo, hi):
            if not z > a:
                raise ValueError(f"degenerate bin {b}: max == min")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)
        object.__setattr__(self, "bins", tuple(int(b) for b in self.bins))

    @property
    def scale(self) -> NDArray[np.float64]:
        return (NORM_HIGH - NORM_LOW) / (self.hi - self.lo)

    def apply(self, values: ArrayLike) -> NDArray[np.float64]:
        return NORM_LOW + (np.asarray(values, dtype=np.float64) - self.lo) * self.scale

    def invert(self, values: ArrayLike) -> NDArray[np.float64]:
        return (np.asarray(values, dtype=np.float64) - NORM_LOW) / self.scale + self.lo


def fit_normalizer(corpus: Sequence[ModulationSpectrum] | Sequence[ArrayLike], bins: Optional[Sequence[int]] = None) -> MsNormalizer:
    """Fit per-bin min/max over every segment of every MS in ``corpus``.

    Items may be :class:`ModulationSpectrum` objects or raw log-power
    matrices (segments x bins).
    """
    if len(corpus) == 0:
        raise ValueError("empty corpus")
    mats = [m.log_power if isinstance(m, ModulationSpectrum) else np.atleast_2d(np.asarray(m, dtype=np.float64)) for m in corpus]
    data = np.concatenate(mats, axis=0)
    if bins is None:
        bins = range(data.shape[1])
    bins = tuple(bins)
    return normalizer_from_values(data[:, list(bins)], bins)


def normalizer_from_values(values: ArrayLike, bins: Sequence[int]) -> MsNormalizer:
    """Fit on log-power values already restricted to ``bins`` (one column per bin)."""
    cols = np.asarray(values, dtype=np.float64).reshape(-1, len(bins))
    if cols.shape[0] == 0:
        raise ValueError("empty corpus")
    return MsNormalizer(cols.min(axis=0), cols.max(axis=0), tuple(bins))


def parseval_residual(mrc: MeanRemovedContour, cfg: StftConfig = StftConfig(), offset: int = 0) -> float:
    """Max relative mismatch between windowed-segment energy and one-sided spectral energy."""
    frames = frame_signal(pad_contour(np.asarray(mrc.centered), cfg, offset), cfg) * cfg.window
    spec = np.fft.rfft(frames, axis=1)
    weights = np.full(cfg.n_bins, 2.0)
    weights[0] = weights[-1] = 1.0
    time_e = np.sum(frames ** 2, axis=1)
    freq_e = np.sum(weights * np.abs(spec) ** 2, axis=1) / cfg.window_frames
    denom = np.maximum(time_e, 1e-300)
    return float(np.max(np.abs(time_e - freq_e) / denom))


def write_ms(path: PathLike, ms: ModulationSpectrum) -> None:
    cfg = ms.config
    head = (
        f"{MS_HEADER} T'={ms.n_segments} M={cfg.window_frames // 2} window={cfg.window_frames} "
        f"hop={cfg.hop_frames} offset={ms.offset} mean={ms.source_mean!r} srclen={ms.source_length}"
    )
    rows = [head]
    rows += [" ".join(repr(float(v)) for v in r) for r in ms.log_power]
    rows += [" ".join(repr(float(v)) for v in r) for r in ms.phase]
    Path(path).write_text("\n".join(rows) + "\n")


def read_ms(path: PathLike) -> ModulationSpectrum:
    lines = [ln for ln in Path(path).read_text().splitlines() if ln.strip()]
    if not lines or not lines[0].startswith(MS_HEADER):
        raise FormatError("missing '#MS v1' header")
    fields = dict(tok.partition("=")[::2] for tok in lines[0][len(MS_HEADER):].split())
    try:
        n_seg = int(fields["T'"])
        m = int(fields["M"])
        cfg = StftConfig(int(fields["window"]), int(fields["hop"]))
        offset = int(fields["offset"])
        mean = float(fields["mean"])
        srclen = int(fields["srclen"])
    except (KeyError, ValueError) as e:
        raise FormatError(f"bad MS header: {e}") from None
    if m != cfg.window_frames // 2:
        raise FormatError("M inconsistent with window")
    body = lines[1:]
    if len(body) != 2 * n_seg:
        raise FormatError(f"expected {2 * n_seg} matrix rows, got {len(body)}")
    try:
        mat = np.array([[float(v) for v in ln.split()] for ln in body], dtype=np.float64)
    except ValueError:
        raise FormatError("non-numeric or ragged MS rows") from None
    if mat.ndim != 2 or mat.shape[1] != m + 1:
        raise FormatError("MS rows must have M+1 values")
    if not np.all(np.isfinite(mat)):
        raise FormatError("non-finite MS values")
    return ModulationSpectrum(mat[:n_seg], mat[n_seg:], cfg, mean, srclen, offset)
