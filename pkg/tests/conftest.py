import pytest


@pytest.fixture(scope="session")
def cache_dir(tmp_path_factory):
    """Session-wide dataset cache; the synthetic corpus is generated once."""
    d = tmp_path_factory.mktemp("dataset-cache")
    from infoplane.synthetic import ensure_synthetic_corpus

    ensure_synthetic_corpus(d)
    return d
