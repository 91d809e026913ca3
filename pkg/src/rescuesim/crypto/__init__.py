"""Hashing, Merkle trees and aggregatable signatures."""
from .hashing import DIGEST_SIZE, h0, h1, short
from .merkle import EMPTY_LEAF, MerkleProof, MerkleTree, leaf_hash, merkle_root, merkle_verify, node_hash
from .signatures import (AggregateSignature, KeyPair, aggregate, aggregation_weights, get_backend, keygen,
                         sign, verify, verify_aggregate)

__all__ = [
    "DIGEST_SIZE", "h0", "h1", "short",
    "EMPTY_LEAF", "MerkleProof", "MerkleTree", "leaf_hash", "merkle_root", "merkle_verify", "node_hash",
    "AggregateSignature", "KeyPair", "aggregate", "aggregation_weights", "get_backend", "keygen",
    "sign", "verify", "verify_aggregate",
]
