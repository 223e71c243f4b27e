"""
On-disk store for expensive tables (sine-limit grids), shared between cuegap processes.
"""

import hashlib
import json
import os.path
import shutil
from logging import getLogger
from typing import Any, Dict, List, Optional

import filelock
import numpy as np
from filelock import FileLock

from cuegap.common import UserError
from cuegap.util import get_cuegap_cache_dir

logger = getLogger(__name__)

LOCK_TIMEOUT = 60.0
TABLES_DIR_NAME = "tables"


class TableCache:
    def __init__(self, directory: Optional[str] = None):
        self.directory = directory or get_cuegap_cache_dir()

    @property
    def tables_dir(self) -> str:
        return os.path.join(self.directory, TABLES_DIR_NAME)

    def _lock(self) -> FileLock:
        os.makedirs(self.directory, exist_ok=True)
        return FileLock(os.path.join(self.directory, "cuegap.lock"))

    def _compute_key(self, request: Dict[str, Any]) -> str:
        import cuegap

        source = json.dumps(
            dict(request, major_version=cuegap.__version__.split(".", maxsplit=1)[0]),
            sort_keys=True,
            default=str,
        )
        return hashlib.md5(source.encode("utf-8")).hexdigest()

    def _path(self, request: Dict[str, Any]) -> str:
        return os.path.join(self.tables_dir, self._compute_key(request) + ".npz")

    def _acquire(self, lock: FileLock) -> None:
        try:
            lock.acquire(timeout=LOCK_TIMEOUT)
        except filelock.Timeout:
            raise UserError(
                f"Could not get exclusive access to the table cache at {self.directory}. "
                "Is there another cuegap instance running?"
            )

    def load(self, request: Dict[str, Any]) -> Optional[Dict[str, np.ndarray]]:
        path = self._path(request)
        if not os.path.exists(path):
            return None

        lock = self._lock()
        self._acquire(lock)
        try:
            with np.load(path) as data:
                result = {name: data[name] for name in data.files}
        except (OSError, ValueError) as e:
            logger.warning("Ignoring unreadable cache entry %s (%s)", path, e)
            return None
        finally:
            lock.release()

        logger.debug("Loaded cached table %s", path)
        return result

    def store(self, request: Dict[str, Any], **arrays: np.ndarray) -> str:
        path = self._path(request)
        lock = self._lock()
        self._acquire(lock)
        try:
            os.makedirs(self.tables_dir, exist_ok=True)
            tmp_path = path + ".tmp.npz"
            np.savez(tmp_path, **arrays)
            os.replace(tmp_path, path)
        finally:
            lock.release()

        logger.debug("Stored table %s", path)
        return path

    def list_entries(self) -> List[str]:
        if not os.path.isdir(self.tables_dir):
            return []
        return sorted(name for name in os.listdir(self.tables_dir) if name.endswith(".npz"))

    def purge(self) -> None:
        if not os.path.exists(self.directory):
            return
        lock = self._lock()
        self._acquire(lock)
        try:
            shutil.rmtree(self.tables_dir, ignore_errors=True)
        finally:
            lock.release()
