import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "det",
    derandomize=True,
    max_examples=60,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("det")


@pytest.fixture(scope="session")
def dimc22():
    from imcpack import load_architecture

    return load_architecture("dimc22")


@pytest.fixture(scope="session")
def aimc28():
    from imcpack import load_architecture

    return load_architecture("aimc28")
