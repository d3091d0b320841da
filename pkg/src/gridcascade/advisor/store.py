"""Content-addressed artifact store for cases, pools, models, and traces.

Artifacts are immutable files named by a SHA-256 content prefix under a
configurable data directory (``GRIDCASCADE_DATA`` or ``~/.gridcascade``).
Writes go to a temp file and are renamed into place, so readers never see
a partially written artifact (swap-on-publish).
"""

from __future__ import annotations

import hashlib
import os
import tempfile
from pathlib import Path

__all__ = ["ArtifactStore", "ENV_DATA_DIR", "KINDS"]

ENV_DATA_DIR = "GRIDCASCADE_DATA"
KINDS = ("cases", "pools", "models", "traces")
_ID_LEN = 16  # hex chars of the content hash used as the artifact id


class ArtifactStore:
    def __init__(self, root: str | os.PathLike | None = None):
        if root is None:
            root = os.environ.get(ENV_DATA_DIR) or Path.home() / ".gridcascade"
        self.root = Path(root)
        for kind in KINDS:
            (self.root / kind).mkdir(parents=True, exist_ok=True)

    def _dir(self, kind: str) -> Path:
        if kind not in KINDS:
            raise ValueError(f"unknown artifact kind {kind!r}")
        return self.root / kind

    def put(self, kind: str, text: str, suffix: str = ".json") -> str:
        """Store a text artifact; returns its content id (idempotent)."""
        data = text.encode()
        art_id = hashlib.sha256(data).hexdigest()[:_ID_LEN]
        target = self._dir(kind) / f"{art_id}{suffix}"
        if not target.exists():
            fd, tmp = tempfile.mkstemp(dir=self._dir(kind), suffix=suffix)
            try:
                with os.fdopen(fd, "wb") as fh:
                    fh.write(data)
                os.replace(tmp, target)
            except BaseException:
                if os.path.exists(tmp):
                    os.unlink(tmp)
                raise
        return art_id

    def put_file(self, kind: str, path: str | os.PathLike) -> str:
        """Adopt an existing file (e.g. a written pool) into the store."""
        data = Path(path).read_bytes()
        art_id = hashlib.sha256(data).hexdigest()[:_ID_LEN]
        suffix = "".join(Path(path).suffixes) or ".json"
        target = self._dir(kind) / f"{art_id}{suffix}"
        if not target.exists():
            fd, tmp = tempfile.mkstemp(dir=self._dir(kind), suffix=suffix)
            with os.fdopen(fd, "wb") as fh:
                fh.write(data)
            os.replace(tmp, target)
        return art_id

    def path(self, kind: str, art_id: str) -> Path:
        matches = sorted(self._dir(kind).glob(f"{art_id}*"))
        if not matches:
            raise KeyError(f"no {kind[:-1]} artifact {art_id!r}")
        return matches[0]

    def read(self, kind: str, art_id: str) -> str:
        return self.path(kind, art_id).read_text()

    def list(self, kind: str) -> list[str]:
        return sorted(p.name.split(".")[0] for p in self._dir(kind).iterdir())

    def __contains__(self, key: tuple[str, str]) -> bool:
        kind, art_id = key
        try:
            self.path(kind, art_id)
        except KeyError:
            return False
        return True
