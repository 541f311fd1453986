"""In-memory artifact store for tests and dry runs."""

from vip_sim.storage.base import ArtifactStore


class MemoryStore(ArtifactStore):
    """Artifacts kept in a dict keyed by name."""

    def __init__(self) -> None:
        self._artifacts: dict[str, bytes] = {}

    def write_bytes(self, name: str, data: bytes) -> str:
        self._artifacts[name] = bytes(data)
        return f"memory://{name}"

    def read_bytes(self, name: str) -> bytes:
        try:
            return self._artifacts[name]
        except KeyError:
            raise FileNotFoundError(name) from None

    def exists(self, name: str) -> bool:
        return name in self._artifacts

    def list(self, prefix: str = "") -> list[str]:
        return sorted(n for n in self._artifacts if n.startswith(prefix))

    def clear(self) -> None:
        """Drop all artifacts (for testing)."""
        self._artifacts.clear()
