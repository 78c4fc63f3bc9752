from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from pitchvar.datagen import (
    RANGES, Note, Score, build_corpus, build_pairs, gen_score, load_corpus_songs, make_songs, mean_style,
    read_manifest, render_generated, render_natural, sample_style, write_corpus,
)
from pitchvar.errors import FormatError
from pitchvar.f0core import remove_mean
from pitchvar.modspec import StftConfig, extract_ms


class TestScore:
    def test_deterministic(self):
        assert gen_score(4) == gen_score(4)
        assert gen_score(4) != gen_score(5)

    def test_single_note(self):
        s = gen_score(1, n_notes=1)
        assert len(s.notes) == 1 and s.duration_ms >= 960

    def test_range_over_many_seeds(self):
        for seed in range(1000):
            s = gen_score(seed)
            assert all(40 <= n.midi <= 90 for n in s.notes)
            assert all(200 <= n.duration_ms <= 1000 for n in s.notes[:-1])
            assert all(n.duration_ms % 5 == 0 for n in s.notes)

    @given(st.integers(0, 2 ** 32 - 1), st.integers(1, 40))
    def test_long_enough(self, seed, n):
        assert gen_score(seed, n).duration_ms >= 2 * 96 * 5

    @pytest.mark.parametrize("notes", [
        (), (Note(30, 1000.0),), (Note(60, 0.0), Note(60, 1000.0)), (Note(60, 500.0),), (Note(60, 1000.0, True),),
    ])
    def test_invalid(self, notes):
        with pytest.raises(ValueError):
            Score(notes)

    def test_zero_notes(self):
        with pytest.raises(ValueError):
            gen_score(0, 0)


class TestStyle:
    @given(st.integers(0, 2 ** 32 - 1))
    def test_ranges(self, seed):
        s = sample_style(seed)
        for k, (lo, hi) in RANGES.items():
            assert lo <= getattr(s, k) <= hi

    def test_mean_style(self):
        m = mean_style()
        assert m.vibrato_rate_hz == 6.0 and m.vibrato_depth == 0.5 and m.overshoot == 0.25 and m.drift_std == 0.0


class TestRender:
    def score(self):
        return Score((Note(60, 500.0), Note(64, 500.0), Note(62, 300.0, True), Note(65, 600.0)))

    def test_plain_smoothing(self):
        s = self.score()
        style = mean_style().__class__(vibrato_depth=0.0, overshoot=0.0, drift_std=0.0)
        c = render_natural(s, style)
        # second-order one-pole smoothing of the held step function, monotone between notes
        assert c.values[0] == 60.0
        assert np.all(np.diff(c.values[:200]) >= -1e-12)
        assert c.values[199] == pytest.approx(64.0, abs=0.05)
        assert not c.voicing[200:260].any() and c.voicing[:200].all()

    def test_styles_differ(self):
        s = gen_score(3)
        a, b = render_natural(s, sample_style(1)), render_natural(s, sample_style(2))
        assert np.max(np.abs(a.values - b.values)) > 0.05

    def test_mean_pitch(self):
        for seed in range(20):
            s = gen_score(seed)
            c = render_natural(s, sample_style(seed))
            assert abs(c.values[c.voicing].mean() - s.mean_pitch()) < 1.0

    def test_generated(self):
        s = gen_score(8)
        g = render_generated(s)
        np.testing.assert_array_equal(g.values, render_generated(s).values)
        np.testing.assert_array_equal(g.values, render_natural(s, mean_style()).values)
        assert np.max(np.abs(g.values - render_natural(s, sample_style(0)).values)) > 0.05

    def test_takes_share_timing(self):
        # timing is shared by construction; vibrato phase and drift differ per take, so the
        # correlation maximum sits at lag 0 for most pairs and within a few frames for all
        lags = np.arange(-40, 41)
        peaks = []
        for song in make_songs(20, 4, seed=2):
            assert len({len(c) for c in song.naturals + [song.generated]}) == 1
            for c in song.naturals:
                np.testing.assert_array_equal(c.voicing, song.generated.voicing)
            x = [remove_mean(c).centered for c in song.naturals]
            for i in range(len(x)):
                for j in range(i + 1, len(x)):
                    cc = [np.dot(x[i][max(0, l):len(x[i]) + min(0, l)], x[j][max(0, -l):len(x[j]) - max(0, l)])
                          for l in lags]
                    peaks.append(lags[int(np.argmax(cc))])
        peaks = np.array(peaks)
        assert np.mean(peaks == 0) >= 0.75
        assert np.max(np.abs(peaks)) <= 10


class TestCorpus:
    def test_pair_count(self):
        corpus = build_corpus(2, 3, seed=0, n_notes=6)
        per_song = [StftConfig().n_segments(len(s.generated)) for s in corpus.songs]
        assert len(corpus.pairs) == sum(3 * 48 * t for t in per_song)

    def test_condition_shared_across_takes(self):
        p = build_corpus(1, 3, seed=1, n_notes=5).pairs
        for off in (0, 17):
            rows = [p.cond[(p.offset == off) & (p.take == k)] for k in range(3)]
            np.testing.assert_array_equal(rows[0], rows[1])
            np.testing.assert_array_equal(rows[0], rows[2])

    def test_pairs_aligned(self):
        corpus = build_corpus(1, 2, seed=3, n_notes=5)
        p, song = corpus.pairs, corpus.songs[0]
        sel = (p.offset == 5) & (p.take == 1)
        ms = extract_ms(remove_mean(song.naturals[1]), StftConfig(), 5)
        np.testing.assert_array_equal(p.target[sel][:, 0], ms.log_power[:, 1])
        np.testing.assert_array_equal(p.interior[sel], ms.interior)
        assert len(p.interior_only()) == int(p.interior.sum())

    def test_pure_function_of_seed(self):
        a, b = build_corpus(2, 2, seed=9, n_notes=5), build_corpus(2, 2, seed=9, n_notes=5)
        np.testing.assert_array_equal(a.pairs.target, b.pairs.target)
        assert not np.array_equal(a.pairs.target, build_corpus(2, 2, seed=10, n_notes=5).pairs.target)

    def test_natural_variation(self):
        for song in make_songs(5, 4, seed=6):
            ms = np.array([extract_ms(remove_mean(c)).log_power[:, 1] for c in song.naturals])
            assert np.all(ms.std(axis=0)[1:-2] > 0)

    def test_short_contour(self):
        song = make_songs(1, 1, seed=0)[0]
        song.generated = song.generated.with_values(song.generated.values)
        short = type(song)(0, song.score, song.generated.__class__(song.generated.values[:50], None), [])
        with pytest.raises(ValueError, match="shorter than one window"):
            build_pairs([short])

    def test_invalid_sizes(self):
        with pytest.raises(ValueError):
            make_songs(0, 1, seed=0)
        with pytest.raises(ValueError):
            make_songs(1, 0, seed=0)


class TestManifest:
    def test_round_trip(self, tmp_path):
        songs = make_songs(2, 2, seed=4, n_notes=5)
        path = write_corpus(songs, tmp_path / "c")
        assert path.read_text().splitlines()[1] == \
            "song 0 generated song000_generated.f0 natural song000_natural00.f0 song000_natural01.f0"
        entries = read_manifest(path)
        assert [e[0] for e in entries] == [0, 1]
        back = load_corpus_songs(tmp_path / "c")
        for s, b in zip(songs, back):
            np.testing.assert_allclose(b.generated.values, s.generated.values, atol=1e-9)
            assert len(b.naturals) == 2

    @pytest.mark.parametrize("text", ["", "song 0 generated a natural b\n", "#CORPUS v1\nsong x generated a natural b\n",
                                      "#CORPUS v1\nsong 0 generated a\n"])
    def test_malformed(self, tmp_path, text):
        p = tmp_path / "manifest.txt"
        p.write_text(text)
        with pytest.raises(FormatError):
            read_manifest(p)
