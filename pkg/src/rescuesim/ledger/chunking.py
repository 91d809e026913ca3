"""Splitting serialized blocks into Merkle-authenticated chunks."""
from __future__ import annotations

from dataclasses import dataclass

from ..crypto import MerkleProof, MerkleTree, merkle_verify
from .types import Block, decode_block


@dataclass(frozen=True)
class Chunk:
    index: int
    total: int
    data: bytes
    proof: MerkleProof

    def wire_size(self) -> int:
        return 8 + len(self.data) + self.proof.encoded_size()


class ChunkRejected(ValueError):
    def __init__(self, bad_ids):
        super().__init__(f"chunks failed proof check: {sorted(bad_ids)}")
        self.bad_ids = sorted(bad_ids)


def chunk_bytes(data: bytes, chunk_size: int) -> tuple[list, bytes]:
    if chunk_size <= 0:
        raise ValueError("chunk_size must be positive")
    pieces = [data[i:i + chunk_size] for i in range(0, len(data), chunk_size)] or [b""]
    tree = MerkleTree(pieces)
    chunks = [Chunk(i, len(pieces), p, tree.proof(i)) for i, p in enumerate(pieces)]
    return chunks, tree.root


def chunk_block(block: Block, chunk_size: int) -> tuple[list, bytes]:
    return chunk_bytes(block.encode(), chunk_size)


def check_chunk(chunk: Chunk, root: bytes) -> bool:
    return chunk.proof.index == chunk.index and merkle_verify(chunk.data, chunk.proof, root)


def reassemble(chunks, root: bytes) -> Block:
    """Rebuild a block; every chunk is checked against root before decoding."""
    chunks = list(chunks)
    bad = [c.index for c in chunks if not check_chunk(c, root)]
    if bad:
        raise ChunkRejected(bad)
    by_index = {c.index: c for c in chunks}
    total = chunks[0].total if chunks else 0
    missing = [i for i in range(total) if i not in by_index]
    if missing or not chunks:
        raise ValueError(f"missing chunks {missing}")
    return decode_block(b"".join(by_index[i].data for i in range(total)))
