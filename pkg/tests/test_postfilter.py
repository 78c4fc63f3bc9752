from __future__ import annotations

import numpy as np
import pytest

from pitchvar.datagen import make_songs
from pitchvar.evaluate import eval_variation, max_first_difference
from pitchvar.gmmn import identity_model, init_model
from pitchvar.modspec import MsNormalizer, StftConfig, extract_ms
from pitchvar.f0core import remove_mean
from pitchvar.postfilter import (
    PostfilterConfig, derive_take_seed, filter_contour, filtered_ms, sample_variations, segment_noise,
)

NORM = MsNormalizer([-4.0], [10.0], (1,))


@pytest.fixture(scope="module")
def song():
    return make_songs(1, 1, seed=21, n_notes=10)[0]


def cfg(seed=5, norm=NORM, **kw):
    return PostfilterConfig(noise_seed=seed, normalizer=norm, **kw)


class TestConfig:
    def test_defaults(self):
        c = PostfilterConfig()
        assert c.bins_to_filter == (1,) and c.stft == StftConfig()

    @pytest.mark.parametrize("bins", [(49,), (-1,), (1, 1)])
    def test_invalid_bins(self, bins):
        with pytest.raises(ValueError):
            PostfilterConfig(bins_to_filter=bins)


class TestNoise:
    def test_range_and_determinism(self):
        a = segment_noise(3, 500, 10)
        assert a.shape == (500, 10) and a.min() >= -1 and a.max() < 1
        np.testing.assert_array_equal(a, segment_noise(3, 500, 10))
        assert not np.array_equal(a, segment_noise(4, 500, 10))

    def test_prefix_stable(self):
        # longer contours extend, not reshuffle, the noise of shorter ones
        np.testing.assert_array_equal(segment_noise(9, 4, 10), segment_noise(9, 8, 10)[:4])

    def test_take_seeds(self):
        seeds = [derive_take_seed(7, i) for i in range(50)]
        assert len(set(seeds)) == 50 and seeds == [derive_take_seed(7, i) for i in range(50)]


class TestFilter:
    def test_identity_model(self, song):
        out = filter_contour(identity_model(hidden=4), song.generated, cfg())
        np.testing.assert_allclose(out.values, song.generated.values, atol=1e-8)
        np.testing.assert_array_equal(out.voicing, song.generated.voicing)

    def test_empty_bins_is_identity(self, song):
        out = filter_contour(init_model(hidden=4), song.generated, cfg(bins_to_filter=(), norm=None))
        np.testing.assert_allclose(out.values, song.generated.values, atol=1e-8)

    def test_untouched_parts_bit_identical(self, toy_trained, song):
        model, norm, _ = toy_trained
        c = cfg(norm=norm)
        ref = extract_ms(remove_mean(song.generated), StftConfig(), 0)
        ms = filtered_ms(model, song.generated, c)
        np.testing.assert_array_equal(ms.phase, ref.phase)
        np.testing.assert_array_equal(np.delete(ms.log_power, 1, axis=1), np.delete(ref.log_power, 1, axis=1))
        edge = ~ref.interior
        np.testing.assert_array_equal(ms.log_power[edge], ref.log_power[edge])
        assert np.all(ms.log_power[ref.interior, 1] != ref.log_power[ref.interior, 1])

    def test_seeded(self, toy_trained, song):
        model, norm, _ = toy_trained
        a = filter_contour(model, song.generated, cfg(3, norm))
        np.testing.assert_array_equal(a.values, filter_contour(model, song.generated, cfg(3, norm)).values)
        assert not np.array_equal(a.values, filter_contour(model, song.generated, cfg(4, norm)).values)
        assert len(a) == len(song.generated)

    def test_variation_and_bounds(self, toy_trained, song):
        model, norm, _ = toy_trained
        takes = [filter_contour(model, song.generated, cfg(s, norm)) for s in range(10)]
        stats = eval_variation(takes)
        assert stats.max_std > 0.01
        assert max(np.max(np.abs(t.values - song.generated.values)) for t in takes) < 2.0
        limit = max_first_difference(song.generated) + 1.0
        assert all(max_first_difference(t) <= limit for t in takes)

    def test_errors(self, song):
        with pytest.raises(ValueError, match="noise_seed"):
            filter_contour(identity_model(hidden=4), song.generated, PostfilterConfig(normalizer=NORM))
        with pytest.raises(ValueError, match="bins"):
            filter_contour(identity_model(cond_dim=2, hidden=4), song.generated, cfg())
        with pytest.raises(ValueError, match="MsNormalizer"):
            filter_contour(identity_model(hidden=4), song.generated, cfg(norm=None))
        with pytest.raises(ValueError, match="normalizer bins"):
            filter_contour(identity_model(hidden=4), song.generated, cfg(norm=MsNormalizer([0.0], [1.0], (2,))))


class TestVariations:
    def test_single_take(self, toy_trained, song):
        model, norm, _ = toy_trained
        [take] = sample_variations(model, song.generated, cfg(11, norm), 1)
        ref = filter_contour(model, song.generated, cfg(derive_take_seed(11, 0), norm))
        np.testing.assert_array_equal(take.values, ref.values)

    def test_distinct_takes(self, toy_trained, song):
        model, norm, _ = toy_trained
        takes = sample_variations(model, song.generated, cfg(11, norm), 4)
        assert len(takes) == 4
        for i in range(4):
            for j in range(i + 1, 4):
                assert np.max(np.abs(takes[i].values - takes[j].values)) > 0

    def test_identity_takes(self, song):
        for t in sample_variations(identity_model(hidden=4), song.generated, cfg(), 3):
            np.testing.assert_allclose(t.values, song.generated.values, atol=1e-8)

    def test_errors(self, song):
        with pytest.raises(ValueError):
            sample_variations(identity_model(hidden=4), song.generated, cfg(), 0)
        with pytest.raises(ValueError):
            sample_variations(identity_model(hidden=4), song.generated, PostfilterConfig(normalizer=NORM), 2)
