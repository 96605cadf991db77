import os

import pytest

FIXTURES = os.path.join(os.path.dirname(__file__), "fixtures")


@pytest.fixture
def fixture_path():
    def resolve(name: str) -> str:
        path = os.path.join(FIXTURES, name)
        assert os.path.exists(path), f"missing golden fixture {name}"
        return path
    return resolve
