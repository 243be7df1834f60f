"""Shared fixtures: small deterministic synthetic corpora and the tables built from them."""

import pytest

from src.dataset.frames import observe
from src.dataset.synthetic import synth_generate
from src.features.table import build_feature_table
from src.regress.config import ForestParams
from src.regress.model import TrainSpec, fit_gaze


@pytest.fixture(scope="session")
def small_corpus():
    """Four subjects, two sessions each, two frames per dot (560 frames)."""
    return synth_generate(4, sessions_per_subject=2, seed=3, frames_per_point=2)


@pytest.fixture(scope="session")
def tiny_corpus():
    """Two subjects, one session, one frame per dot (70 frames)."""
    return synth_generate(2, seed=5, frames_per_point=1)


@pytest.fixture(scope="session")
def small_table(small_corpus):
    """mHoG table of the small corpus."""
    return build_feature_table(small_corpus, "mhog")


@pytest.fixture(scope="session")
def eye_pair(small_corpus):
    """Localised eye pair of the first synthetic frame."""
    return observe(small_corpus, small_corpus.records[0]).pair


@pytest.fixture
def fast_spec():
    """Random forest small enough for unit tests."""
    return TrainSpec(forest=ForestParams(n_trees=10))


@pytest.fixture(scope="session")
def small_model(small_table):
    """Ten-tree mHoG forest fitted on the whole small table."""
    return fit_gaze(small_table, spec=TrainSpec(forest=ForestParams(n_trees=10)))
