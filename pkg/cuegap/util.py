import contextlib
import gzip
import hashlib
import os.path
import sys
from logging import getLogger
from typing import IO, Iterator, Optional

from cuegap.common import DataError

logger = getLogger(__name__)

CACHE_DIR_VARIABLE = "CUEGAP_CACHE_DIR"


def get_windows_folder(ID: int) -> str:
    # http://stackoverflow.com/a/3859336/261181
    if sys.platform == "win32":
        import ctypes.wintypes

        SHGFP_TYPE_CURRENT = 0
        buf = ctypes.create_unicode_buffer(ctypes.wintypes.MAX_PATH)
        ctypes.windll.shell32.SHGetFolderPathW(0, ID, 0, SHGFP_TYPE_CURRENT, buf)
        assert buf.value
        return buf.value
    else:
        raise AssertionError("Meant to be used only on Windows")


def get_user_cache_dir() -> str:
    if sys.platform == "win32":
        return get_windows_folder(28)
    elif sys.platform == "darwin":
        return os.path.expanduser("~/Library/Caches")
    else:
        return os.getenv("XDG_CACHE_HOME", os.path.expanduser("~/.cache"))


def get_cuegap_cache_dir() -> str:
    override = os.getenv(CACHE_DIR_VARIABLE)
    if override:
        return override

    result = os.path.join(get_user_cache_dir(), "cuegap")
    if sys.platform == "win32":
        # Windows doesn't have separate user cache dir
        result = os.path.join(result, "cache")
    return result


def file_sha256(path: str) -> str:
    digest = hashlib.sha256()
    try:
        with open(path, "rb") as fp:
            for block in iter(lambda: fp.read(1 << 20), b""):
                digest.update(block)
    except OSError as e:
        raise DataError(f"Can't read file: {e.strerror}", path=path)
    return digest.hexdigest()


def open_text(path: str) -> IO[str]:
    """Opens plain or gzip-compressed text, judged by the magic bytes."""
    try:
        with open(path, "rb") as fp:
            magic = fp.read(2)
        if magic == b"\x1f\x8b":
            return gzip.open(path, "rt", encoding="ascii")
        return open(path, "r", encoding="ascii")
    except OSError as e:
        raise DataError(f"Can't open file: {e.strerror}", path=path)


@contextlib.contextmanager
def output_stream(path: Optional[str]) -> Iterator[IO[str]]:
    """Given path or stdout when path is None."""
    if path is None:
        yield sys.stdout
        return

    try:
        parent = os.path.dirname(os.path.abspath(path))
        os.makedirs(parent, exist_ok=True)
        fp = open(path, "w", encoding="utf-8", newline="\n")
    except OSError as e:
        raise DataError(f"Can't write output: {e.strerror}", path=path)

    with fp:
        yield fp
    logger.debug("Wrote %s", path)
