"""Content-addressed store for task artifacts.

An entry is a directory named by the SHA-256 of the task inputs and the
format version.  It holds the artifact files verbatim plus ``entry.json``;
restoring copies the bytes back, so a hit reproduces identical outputs.
Entries are built in a temporary directory and renamed into place.
"""

from __future__ import annotations

import hashlib
import json
import os
import shutil
import tempfile
from pathlib import Path

from . import __version__

__all__ = ["CACHE_FORMAT", "ResultCache", "default_cache_dir", "task_hash"]

CACHE_FORMAT = 1
ENTRY_FILE = "entry.json"


def default_cache_dir() -> Path:
    env = os.environ.get("COMBWG_CACHE_DIR")
    if env:
        return Path(env)
    base = os.environ.get("XDG_CACHE_HOME") or Path.home() / ".cache"
    return Path(base) / "combwg"


def task_hash(key: dict) -> str:
    payload = {"format": CACHE_FORMAT, "version": __version__, "key": key}
    return hashlib.sha256(json.dumps(payload, sort_keys=True, default=str).encode("utf-8")).hexdigest()


class ResultCache:
    def __init__(self, root: Path | str | None = None):
        self.root = Path(root) if root is not None else default_cache_dir()

    def _entry(self, digest: str) -> Path:
        return self.root / digest

    def get(self, digest: str) -> dict | None:
        """Entry metadata, or None when missing, damaged or from another format version."""
        meta_path = self._entry(digest) / ENTRY_FILE
        try:
            meta = json.loads(meta_path.read_text(encoding="utf-8"))
        except (OSError, ValueError):
            return None
        if meta.get("format") != CACHE_FORMAT or meta.get("version") != __version__:
            return None
        for name in meta["files"]:
            if not (self._entry(digest) / name).is_file():
                return None
        return meta

    def restore(self, digest: str, out_dir: Path) -> list[Path]:
        meta = self.get(digest)
        if meta is None:
            raise KeyError(digest)
        out_dir = Path(out_dir)
        paths = []
        for name in meta["files"]:
            dst = out_dir / name
            dst.parent.mkdir(parents=True, exist_ok=True)
            shutil.copyfile(self._entry(digest) / name, dst)
            paths.append(dst)
        return paths

    def put(self, digest: str, task: str, files: list[Path], base: Path, summary: dict | None = None) -> None:
        """Store ``files`` (paths under ``base``) atomically under ``digest``."""
        self.root.mkdir(parents=True, exist_ok=True)
        tmp = Path(tempfile.mkdtemp(prefix=".tmp-", dir=self.root))
        try:
            names = []
            for f in files:
                rel = Path(f).relative_to(base).as_posix()
                (tmp / rel).parent.mkdir(parents=True, exist_ok=True)
                shutil.copyfile(f, tmp / rel)
                names.append(rel)
            meta = {"format": CACHE_FORMAT, "version": __version__, "task": task, "files": names, "summary": summary or {}}
            (tmp / ENTRY_FILE).write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8")
            dst = self._entry(digest)
            if dst.exists():
                shutil.rmtree(dst)
            os.replace(tmp, dst)
        except BaseException:
            shutil.rmtree(tmp, ignore_errors=True)
            raise

    def entries(self) -> list[tuple[str, dict | None]]:
        if not self.root.is_dir():
            return []
        out = []
        for p in sorted(self.root.iterdir()):
            if p.is_dir() and not p.name.startswith(".tmp-"):
                try:
                    meta = json.loads((p / ENTRY_FILE).read_text(encoding="utf-8"))
                except (OSError, ValueError):
                    meta = None
                out.append((p.name, meta))
        return out

    def clear(self) -> int:
        n = 0
        if not self.root.is_dir():
            return 0
        for p in self.root.iterdir():
            if p.is_dir():
                shutil.rmtree(p)
                n += 1
        return n
