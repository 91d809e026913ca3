"""Binary Merkle trees with domain-separated leaf and node hashing.

Odd levels are padded by duplicating the last node. A leaf hashes as
sha256(0x00 || leaf) and an inner node as sha256(0x01 || left || right), so
an inner node can never be passed off as a leaf.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import Sequence

# Leaf used for the tree over an empty transaction list.
EMPTY_LEAF = b"rescuesim/empty-tree"


def leaf_hash(leaf: bytes) -> bytes:
    return hashlib.sha256(b"\x00" + leaf).digest()


def node_hash(left: bytes, right: bytes) -> bytes:
    return hashlib.sha256(b"\x01" + left + right).digest()


@dataclass(frozen=True)
class MerkleProof:
    index: int
    siblings: tuple  # sibling digests from the leaf level upwards

    def encoded_size(self) -> int:
        return 4 + 32 * len(self.siblings)


class MerkleTree:
    """All levels of a tree, so that every inclusion proof is cheap."""

    def __init__(self, leaves: Sequence[bytes]):
        if len(leaves) == 0:
            raise ValueError("a Merkle tree needs at least one leaf")
        level = [leaf_hash(x) for x in leaves]
        self.levels = [level]
        while len(level) > 1:
            if len(level) % 2:
                level = level + [level[-1]]
                self.levels[-1] = level
            level = [node_hash(level[i], level[i + 1]) for i in range(0, len(level), 2)]
            self.levels.append(level)
        self.n_leaves = len(leaves)

    @property
    def root(self) -> bytes:
        return self.levels[-1][0]

    def proof(self, index: int) -> MerkleProof:
        if not 0 <= index < self.n_leaves:
            raise IndexError(index)
        sibs = []
        i = index
        for level in self.levels[:-1]:
            sibs.append(level[i ^ 1])
            i //= 2
        return MerkleProof(index, tuple(sibs))


def merkle_root(leaves: Sequence[bytes]) -> bytes:
    return MerkleTree(leaves).root


def merkle_verify(leaf: bytes, proof: MerkleProof, root: bytes) -> bool:
    node = leaf_hash(leaf)
    i = proof.index
    if i < 0:
        return False
    for sib in proof.siblings:
        node = node_hash(sib, node) if i & 1 else node_hash(node, sib)
        i //= 2
    return i == 0 and node == root
