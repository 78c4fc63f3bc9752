"""Continuous F0 contours in semitone units.

Pitch is carried on the MIDI scale (``69 + 12 * log2(f / 440)``), so one unit
equals one semitone. Contours are sampled at a fixed frame shift, 5 ms by
default.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence, Union

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .errors import FormatError

DEFAULT_FRAME_SHIFT_MS = 5.0
F0_HEADER = "#F0 v1"

PathLike = Union[str, Path]


def hz_to_semitone(hz: ArrayLike) -> NDArray[np.float64] | float:
    """Convert frequency in Hz to MIDI semitones. Raises ValueError for hz <= 0."""
    arr = np.asarray(hz, dtype=np.float64)
    if np.any(~(arr > 0)):
        raise ValueError("hz must be > 0")
    out = 69.0 + 12.0 * np.log2(arr / 440.0)
    return float(out) if out.ndim == 0 else out


def semitone_to_hz(semitone: ArrayLike) -> NDArray[np.float64] | float:
    arr = np.asarray(semitone, dtype=np.float64)
    out = 440.0 * np.exp2((arr - 69.0) / 12.0)
    return float(out) if out.ndim == 0 else out


def hz_semitone_convert(value: ArrayLike, direction: str):
    """Convert between Hz and semitones.

    Args:
        value: scalar or array.
        direction: ``"hz2st"`` or ``"st2hz"``.
    """
    if direction == "hz2st":
        return hz_to_semitone(value)
    if direction == "st2hz":
        return semitone_to_hz(value)
    raise ValueError(f"unknown direction {direction!r}")


@dataclass(frozen=True)
class F0Contour:
    """Frame-rate pitch contour.

    Attributes:
        values: per-frame pitch in semitones, shape (T,).
        voicing: per-frame voiced flag, shape (T,).
        frame_shift_ms: milliseconds per frame.
    """

    values: NDArray[np.float64]
    voicing: NDArray[np.bool_]
    frame_shift_ms: float = DEFAULT_FRAME_SHIFT_MS

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64).reshape(-1)
        voicing = (
            np.ones(values.shape, dtype=bool)
            if self.voicing is None
            else np.array(self.voicing, dtype=bool).reshape(-1)
        )
        if values.size < 1:
            raise ValueError("contour must have at least one frame")
        if voicing.shape != values.shape:
            raise ValueError("values and voicing differ in length")
        if not np.all(np.isfinite(values)):
            raise ValueError("contour values must be finite")
        if not self.frame_shift_ms > 0:
            raise ValueError("frame_shift_ms must be > 0")
        values.setflags(write=False)
        voicing.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "voicing", voicing)
        object.__setattr__(self, "frame_shift_ms", float(self.frame_shift_ms))

    def __len__(self) -> int:
        return self.values.size

    @property
    def hz(self) -> NDArray[np.float64]:
        return semitone_to_hz(self.values)

    @property
    def times_ms(self) -> NDArray[np.float64]:
        return np.arange(len(self)) * self.frame_shift_ms

    def with_values(self, values: ArrayLike) -> "F0Contour":
        """Same voicing and frame shift, new pitch values."""
        return F0Contour(np.asarray(values, dtype=np.float64), self.voicing, self.frame_shift_ms)


@dataclass(frozen=True)
class MeanRemovedContour:
    """Zero-mean contour plus the removed offset."""

    centered: NDArray[np.float64]
    mean: float
    voicing: NDArray[np.bool_] = field(default=None)
    frame_shift_ms: float = DEFAULT_FRAME_SHIFT_MS

    def __post_init__(self):
        centered = np.array(self.centered, dtype=np.float64).reshape(-1)
        if centered.size < 1:
            raise ValueError("contour must have at least one frame")
        voicing = (
            np.ones(centered.shape, dtype=bool)
            if self.voicing is None
            else np.array(self.voicing, dtype=bool).reshape(-1)
        )
        centered.setflags(write=False)
        voicing.setflags(write=False)
        object.__setattr__(self, "centered", centered)
        object.__setattr__(self, "voicing", voicing)
        object.__setattr__(self, "mean", float(self.mean))

    def __len__(self) -> int:
        return self.centered.size


def interpolate_unvoiced(
    raw: Iterable[tuple[float, bool]], frame_shift_ms: float = DEFAULT_FRAME_SHIFT_MS
) -> F0Contour:
    """Build a continuous contour from ``(f0_hz, voiced)`` frames.

    Unvoiced gaps are filled linearly in the semitone domain between the
    flanking voiced frames; leading and trailing unvoiced runs hold the
    nearest voiced value.
    """
    frames = list(raw)
    if not frames:
        raise ValueError("no frames")
    hz = np.array([float(f) for f, _ in frames], dtype=np.float64)
    voiced = np.array([bool(v) for _, v in frames], dtype=bool)
    if not voiced.any():
        raise ValueError("no voiced frames")
    idx = np.flatnonzero(voiced)
    st = hz_to_semitone(hz[idx])
    st = np.atleast_1d(st)
    # np.interp holds the end values outside [idx[0], idx[-1]]
    values = np.interp(np.arange(hz.size), idx, st)
    values[idx] = st
    return F0Contour(values, voiced, frame_shift_ms)


def remove_mean(contour: F0Contour) -> MeanRemovedContour:
    mean = float(np.mean(contour.values))
    return MeanRemovedContour(contour.values - mean, mean, contour.voicing, contour.frame_shift_ms)


def restore_mean(mrc: MeanRemovedContour) -> F0Contour:
    return F0Contour(mrc.centered + mrc.mean, mrc.voicing, mrc.frame_shift_ms)


def _format_float(x: float) -> str:
    return repr(float(x))


def write_f0(path: PathLike, contour: F0Contour) -> None:
    """Write a contour in F0 text format v1 (Hz per frame, 0 for unvoiced)."""
    lines = [f"{F0_HEADER} frame_shift_ms={_format_float(contour.frame_shift_ms)}"]
    hz = np.atleast_1d(semitone_to_hz(contour.values))
    for f, v in zip(hz, contour.voicing):
        lines.append(f"{_format_float(f) if v else '0'} {int(v)}")
    Path(path).write_text("\n".join(lines) + "\n")


def read_f0_frames(path: PathLike) -> tuple[list[tuple[float, bool]], float]:
    """Parse an F0 v1 file into raw ``(hz, voiced)`` frames and the frame shift."""
    return _parse_f0_text(Path(path).read_text())


def _parse_f0_text(text: str) -> tuple[list[tuple[float, bool]], float]:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or not lines[0].startswith(F0_HEADER):
        raise FormatError("missing '#F0 v1' header")
    shift = None
    for tok in lines[0][len(F0_HEADER):].split():
        key, _, val = tok.partition("=")
        if key == "frame_shift_ms":
            shift = _finite(val, "frame_shift_ms")
    if shift is None or shift <= 0:
        raise FormatError("header lacks a positive frame_shift_ms")
    frames = []
    for lineno, ln in enumerate(lines[1:], start=2):
        parts = ln.split()
        if len(parts) != 2 or parts[1] not in ("0", "1"):
            raise FormatError(f"line {lineno}: expected '<f0_hz> <0|1>'")
        hz = _finite(parts[0], f"line {lineno}")
        if hz < 0 or (parts[1] == "1" and hz <= 0):
            raise FormatError(f"line {lineno}: invalid f0 {hz}")
        frames.append((hz, parts[1] == "1"))
    if not frames:
        raise FormatError("no frames")
    return frames, shift


def _finite(token: str, where: str) -> float:
    try:
        x = float(token)
    except ValueError:
        raise FormatError(f"{where}: not a number: {token!r}") from None
    if not math.isfinite(x):
        raise FormatError(f"{where}: non-finite value {token!r}")
    return x


def read_f0(path: PathLike) -> F0Contour:
    """Read an F0 v1 file and continuize its unvoiced gaps."""
    frames, shift = read_f0_frames(path)
    try:
        return interpolate_unvoiced(frames, shift)
    except ValueError as e:
        raise FormatError(f"{path}: {e}") from None


def contour_from_semitones(values: Sequence[float], frame_shift_ms: float = DEFAULT_FRAME_SHIFT_MS) -> F0Contour:
    return F0Contour(np.asarray(values, dtype=np.float64), None, frame_shift_ms)
