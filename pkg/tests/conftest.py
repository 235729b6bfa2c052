import pytest

from insiderkit import synthgen


@pytest.fixture(scope="session")
def small_corpus(tmp_path_factory):
    """A 12-user, 3-insider, 12-day corpus shared by read-only tests."""
    data_dir = tmp_path_factory.mktemp("corpus")
    _, truth = synthgen.gen_dataset(12, 3, 12, seed=17, out_dir=data_dir)
    return data_dir, truth
