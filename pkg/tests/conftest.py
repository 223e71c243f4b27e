import pytest

from cuegap.parallel import set_worker_count
from cuegap.util import CACHE_DIR_VARIABLE


@pytest.fixture(autouse=True)
def single_process(monkeypatch, tmp_path):
    """Keeps every computation in-process and the table cache inside tmp_path."""
    monkeypatch.setenv(CACHE_DIR_VARIABLE, str(tmp_path / "cache"))
    set_worker_count(1)
    yield
    set_worker_count(None)
