"""Filesystem artifact store with atomic writes."""

import logging
import os
import tempfile
from pathlib import Path

from vip_sim.errors import OutputError
from vip_sim.storage.base import ArtifactStore

log = logging.getLogger(__name__)


class FileStore(ArtifactStore):
    """Artifacts as files under a root directory.

    Writes go to a temp file in the destination directory followed by
    ``os.replace``, so a reader never sees a half-written spectrum and an
    interrupted run leaves the previous artifact intact.
    """

    def __init__(self, root: str | os.PathLike[str]) -> None:
        self.root = Path(root)

    def _path(self, name: str) -> Path:
        path = (self.root / name).resolve()
        if self.root.resolve() not in path.parents:
            raise OutputError(f"Artifact name {name!r} escapes the output directory {self.root}")
        return path

    def ensure_writable(self) -> None:
        """Create the root directory, failing early if it cannot be written."""
        try:
            self.root.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise OutputError(f"Cannot create output directory {self.root}: {exc}") from exc
        if not os.access(self.root, os.W_OK):
            raise OutputError(f"Output directory {self.root} is not writable")

    def write_bytes(self, name: str, data: bytes) -> str:
        path = self._path(name)
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            fd, tmp_path = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=str(path.parent))
            try:
                with os.fdopen(fd, "wb") as f:
                    f.write(data)
                os.replace(tmp_path, path)
            except BaseException:
                try:
                    os.unlink(tmp_path)
                except OSError:
                    pass
                raise
        except OSError as exc:
            raise OutputError(f"Failed to write {path}: {exc}") from exc
        log.debug("Wrote %d bytes to %s", len(data), path)
        return str(path)

    def read_bytes(self, name: str) -> bytes:
        return self._path(name).read_bytes()

    def exists(self, name: str) -> bool:
        return self._path(name).is_file()

    def list(self, prefix: str = "") -> list[str]:
        if not self.root.is_dir():
            return []
        names = (p.relative_to(self.root).as_posix() for p in self.root.rglob("*") if p.is_file())
        return sorted(n for n in names if n.startswith(prefix) and not Path(n).name.startswith("."))
