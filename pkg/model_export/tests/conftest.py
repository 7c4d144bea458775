import pytest

from radfuse.synth import make_dataset


@pytest.fixture(scope="session")
def toy_manifest(tmp_path_factory):
    root = tmp_path_factory.mktemp("export_toy")
    return make_dataset(root / "data", n_per_class=2, seed=31)
