"""Stochastic post-filtering of generated pitch contours.

The contour's MS is taken at offset 0, the selected low modulation bins are
normalised and replaced by generator samples (one noise vector per segment),
and the contour is rebuilt with the untouched phase. Segments whose window
overlaps the zero padding at either end are left as analysed; their MS is
shaped by the padding and lies outside the range the generator is trained on.

Noise for a given seed comes from numpy's Philox counter-based generator
keyed by that seed. Take ``i`` of a batch uses the seed
``SeedSequence(noise_seed, spawn_key=(i,))``, so any take can be regenerated
on its own.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional

import numpy as np
from numpy.typing import NDArray

from .f0core import F0Contour, remove_mean
from .gmmn.network import GmmnModel, forward_batch
from .modspec import ModulationSpectrum, MsNormalizer, StftConfig, extract_ms, reconstruct


@dataclass(frozen=True)
class PostfilterConfig:
    bins_to_filter: tuple[int, ...] = (1,)
    noise_seed: Optional[int] = None
    normalizer: Optional[MsNormalizer] = None
    stft: StftConfig = StftConfig()

    def __post_init__(self):
        bins = tuple(sorted(int(b) for b in self.bins_to_filter))
        if len(set(bins)) != len(bins):
            raise ValueError("duplicate bins")
        if any(b < 0 or b >= self.stft.n_bins for b in bins):
            raise ValueError(f"bins must lie in 0..{self.stft.n_bins - 1}")
        object.__setattr__(self, "bins_to_filter", bins)


def segment_noise(seed: int, n_segments: int, dim: int) -> NDArray[np.float64]:
    """Per-segment prior noise U[-1, 1) from a Philox stream keyed by ``seed``."""
    rng = np.random.Generator(np.random.Philox(key=int(seed)))
    return rng.uniform(-1.0, 1.0, size=(n_segments, dim))


def derive_take_seed(noise_seed: int, take: int) -> int:
    ss = np.random.SeedSequence(int(noise_seed), spawn_key=(int(take),))
    return int(ss.generate_state(1, np.uint64)[0])


def filtered_ms(model: GmmnModel, contour: F0Contour, cfg: PostfilterConfig) -> ModulationSpectrum:
    """Offset-0 MS of ``contour`` with the selected bins of interior segments resampled.

    Unselected bins, edge segments and every phase are the input analysis
    unchanged.
    """
    if cfg.noise_seed is None:
        raise ValueError("an explicit noise_seed is required")
    bins = list(cfg.bins_to_filter)
    ms = extract_ms(remove_mean(contour), cfg.stft, 0)
    if not bins:
        return ms
    if model.cond_dim != len(bins):
        raise ValueError(f"model expects {model.cond_dim} bins, config selects {len(bins)}")
    if cfg.normalizer is None:
        raise ValueError("a fitted MsNormalizer is required")
    if tuple(cfg.normalizer.bins) != tuple(bins):
        raise ValueError("normalizer bins differ from bins_to_filter")
    cond = cfg.normalizer.apply(ms.log_power[:, bins])
    noise = segment_noise(cfg.noise_seed, ms.n_segments, model.noise_dim)
    filtered = cfg.normalizer.invert(forward_batch(model, cond, noise))
    log_power = ms.log_power.copy()
    rows = np.flatnonzero(ms.interior)
    log_power[np.ix_(rows, bins)] = filtered[rows]
    return ms.with_log_power(log_power)


def filter_contour(model: GmmnModel, contour: F0Contour, cfg: PostfilterConfig) -> F0Contour:
    """One post-filtered take, same length and voicing as ``contour``."""
    return reconstruct(filtered_ms(model, contour, cfg), contour.voicing)


def sample_variations(model: GmmnModel, contour: F0Contour, cfg: PostfilterConfig, n_takes: int) -> list[F0Contour]:
    """``n_takes`` independently seeded takes of one contour."""
    if n_takes < 1:
        raise ValueError("n_takes must be >= 1")
    if cfg.noise_seed is None:
        raise ValueError("an explicit noise_seed is required")
    return [
        filter_contour(model, contour, replace(cfg, noise_seed=derive_take_seed(cfg.noise_seed, i)))
        for i in range(n_takes)
    ]
