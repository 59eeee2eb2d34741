import json

import pytest

from agedist import Geometric, ImportanceDist, Model


@pytest.fixture(scope="session")
def fig1():
    """V = {1, 20}, Pr(V=1) = 0.7, geometric speaking with p = 0.2."""
    return Model(ImportanceDist((1.0, 20.0), (0.7, 0.3)), Geometric(0.2))


@pytest.fixture(scope="session")
def fig2():
    """V = {1, 20}, Pr(V=1) = 0.8, geometric speaking with p = 0.3."""
    return Model(ImportanceDist((1.0, 20.0), (0.8, 0.2)), Geometric(0.3))


@pytest.fixture()
def fig1_file(fig1, tmp_path):
    path = tmp_path / "fig1.json"
    path.write_text(json.dumps(fig1.to_config()))
    return str(path)
