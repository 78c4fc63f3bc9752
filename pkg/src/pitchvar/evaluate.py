"""Objective measures of post-filter behaviour."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from numpy.typing import ArrayLike

from .f0core import F0Contour, PathLike
from .gmmn.kernels import as_rows, gram


def eval_mmd(A: ArrayLike, B: ArrayLike, sigma: float = 1.0) -> float:
    """Biased (V-statistic) squared MMD with a Gaussian kernel."""
    A, B = as_rows(A), as_rows(B)
    if A.shape[0] == 0 or B.shape[0] == 0:
        raise ValueError("empty sample set")
    return float(gram(A, A, sigma).mean() + gram(B, B, sigma).mean() - 2.0 * gram(A, B, sigma).mean())


@dataclass
class VariationStats:
    per_frame_std: np.ndarray
    mean_std: float
    max_std: float
    max_dev_from_first: float


def eval_variation(takes: Sequence[F0Contour]) -> VariationStats:
    """Population std across takes at every frame."""
    if len(takes) < 2:
        raise ValueError("need at least two takes")
    n = len(takes[0])
    if any(len(t) != n for t in takes):
        raise ValueError("takes differ in length")
    V = np.stack([t.values for t in takes])
    # std is shift-invariant; centring on the first take makes identical takes give exactly 0
    D = V - V[0]
    std = D.std(axis=0)
    return VariationStats(std, float(std.mean()), float(std.max()), float(np.max(np.abs(D))))


def max_first_difference(contour: F0Contour) -> float:
    return float(np.max(np.abs(np.diff(contour.values)))) if len(contour) > 1 else 0.0


@dataclass
class EvalReport:
    values: dict[str, float | int] = field(default_factory=dict)

    def add(self, name: str, value: float | int) -> None:
        # counts stay integers in the text report
        self.values[name] = int(value) if isinstance(value, (int, np.integer)) else float(value)

    def to_text(self) -> str:
        return "".join(f"{k} {v!r}\n" for k, v in self.values.items())

    def write(self, path: PathLike) -> None:
        Path(path).write_text(self.to_text())
