import sys
from pathlib import Path

import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, str(Path(__file__).parent))

settings.register_profile("default", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def rng():
    import numpy as np
    return np.random.default_rng(20240917)


@pytest.fixture(scope="session")
def toy_trained():
    """A small model trained briefly on a small synthetic corpus, with its normaliser."""
    from pitchvar.datagen import build_corpus
    from pitchvar.gmmn import train
    from pitchvar.modspec import normalizer_from_values

    corpus = build_corpus(3, 3, seed=11, n_notes=6)
    pairs = corpus.pairs.interior_only()
    norm = normalizer_from_values(pairs.target, (1,))
    res = train((norm.apply(pairs.cond), norm.apply(pairs.target)), epochs=4, batch_size=256, seed=0, hidden=32)
    return res.model, norm, corpus


def pytest_terminal_summary(terminalreporter):
    from acceptance_log import LINES

    if LINES:
        terminalreporter.section("acceptance criteria")
        for n in sorted(LINES):
            terminalreporter.write_line(LINES[n])
