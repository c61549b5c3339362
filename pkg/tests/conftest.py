import pytest

from navqa.gateway import ENDPOINT_ENV, TIMEOUT_ENV


@pytest.fixture(autouse=True)
def _isolate_gateway_env(monkeypatch):
    """Ambient endpoint settings must not leak into endpoint resolution."""
    monkeypatch.delenv(ENDPOINT_ENV, raising=False)
    monkeypatch.delenv(TIMEOUT_ENV, raising=False)
