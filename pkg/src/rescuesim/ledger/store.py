"""Content-addressed off-chain store.

Stands in for the vehicles' distributed file store: each object is keyed by
its h0 digest, and the vehicle that holds it is recorded as a shard label.
Optionally persisted as a directory of hex-named files.
"""
from __future__ import annotations

from pathlib import Path

from ..crypto import h0


class NotFound(KeyError):
    pass


class ContentStore:
    def __init__(self, path: str | Path | None = None):
        self._mem: dict[bytes, bytes] = {}
        self.shards: dict[bytes, set] = {}
        self.path = Path(path) if path is not None else None
        if self.path is not None:
            self.path.mkdir(parents=True, exist_ok=True)

    def put(self, data: bytes, shard=None) -> bytes:
        ptr = h0(data)
        if ptr not in self._mem:
            self._mem[ptr] = bytes(data)
            if self.path is not None:
                f = self.path / ptr.hex()
                if not f.exists():
                    f.write_bytes(data)
        if shard is not None:
            self.shards.setdefault(ptr, set()).add(shard)
        return ptr

    def get(self, ptr: bytes) -> bytes:
        if ptr in self._mem:
            return self._mem[ptr]
        if self.path is not None:
            f = self.path / ptr.hex()
            if f.exists():
                data = f.read_bytes()
                self._mem[ptr] = data
                return data
        raise NotFound(ptr.hex())

    def __contains__(self, ptr: bytes) -> bool:
        try:
            self.get(ptr)
            return True
        except NotFound:
            return False

    def __len__(self) -> int:
        if self.path is not None:
            return sum(1 for _ in self.path.iterdir())
        return len(self._mem)

    def certificate(self, ptr: bytes) -> bytes:
        """Receipt that ptr is held by the store."""
        if ptr not in self:
            raise NotFound(ptr.hex())
        return h0(b"store-cert" + ptr)
