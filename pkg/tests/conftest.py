import pytest

from crossvox.corpus import SyntheticCorpusConfig, make_synthetic_corpus
from crossvox.features import FeatureConfig
from crossvox.frontend import default_symbol_table, load_lexicon


@pytest.fixture(scope="session")
def table():
    return default_symbol_table()


@pytest.fixture(scope="session")
def lexicon():
    return load_lexicon()


@pytest.fixture(scope="session")
def feature_config():
    return FeatureConfig()


@pytest.fixture(scope="session")
def tiny_corpus(tmp_path_factory):
    """2 speakers x 2 utterances; enough for plumbing tests, fast to build."""
    out = tmp_path_factory.mktemp("tiny_corpus")
    config = SyntheticCorpusConfig(utterances_per_speaker=2)
    manifest_path = make_synthetic_corpus(out, seed=11, config=config)
    return manifest_path
