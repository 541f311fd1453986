"""Base artifact-store interface."""

from abc import ABC, abstractmethod


class ArtifactStore(ABC):
    """Abstract base class for places run artifacts are read from and written to.

    Names are relative paths (``"spectrum_on.csv"``, ``"frames/0001.bin"``);
    how they map to storage is up to the backend.
    """

    @abstractmethod
    def write_bytes(self, name: str, data: bytes) -> str:
        """Store ``data`` under ``name``, replacing any previous artifact.

        Returns:
            A backend-specific locator for log messages (a filesystem path
            for :class:`FileStore`).
        """
        pass

    @abstractmethod
    def read_bytes(self, name: str) -> bytes:
        """Return the artifact stored under ``name``; raises ``FileNotFoundError`` if absent."""
        pass

    @abstractmethod
    def exists(self, name: str) -> bool:
        pass

    @abstractmethod
    def list(self, prefix: str = "") -> list[str]:
        """Names of stored artifacts starting with ``prefix``, sorted."""
        pass

    def write_text(self, name: str, text: str) -> str:
        return self.write_bytes(name, text.encode("utf-8"))

    def read_text(self, name: str) -> str:
        return self.read_bytes(name).decode("utf-8")
