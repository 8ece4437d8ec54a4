import pytest

from hugr_ir import stdlib


@pytest.fixture(scope="session")
def registry():
    return stdlib()
