import numpy as np

from cuegap.cache import TableCache
from cuegap.util import get_cuegap_cache_dir


def test_store_and_load(tmp_path):
    cache = TableCache(str(tmp_path))
    request = {"kind": "Pnn", "N": None}
    assert cache.load(request) is None
    cache.store(request, values=np.arange(3.0), n_axes=np.array(1))
    loaded = cache.load(request)
    np.testing.assert_array_equal(loaded["values"], [0.0, 1.0, 2.0])
    assert int(loaded["n_axes"]) == 1
    assert cache.load({"kind": "Pc", "N": None}) is None


def test_list_and_purge(tmp_path):
    cache = TableCache(str(tmp_path))
    assert cache.list_entries() == []
    cache.store({"kind": "Pnn"}, values=np.zeros(2))
    cache.store({"kind": "Pr"}, values=np.zeros(2))
    assert len(cache.list_entries()) == 2
    cache.purge()
    assert cache.list_entries() == []


def test_unreadable_entry_is_ignored(tmp_path):
    cache = TableCache(str(tmp_path))
    path = cache.store({"kind": "Pnn"}, values=np.zeros(2))
    with open(path, "wb") as fp:
        fp.write(b"not a table")
    assert cache.load({"kind": "Pnn"}) is None


def test_default_directory(tmp_path):
    assert TableCache().directory == get_cuegap_cache_dir() == str(tmp_path / "cache")
