"""Blocks, transactions, the off-chain store and block chunking."""
from .chunking import Chunk, ChunkRejected, check_chunk, chunk_block, chunk_bytes, reassemble
from .codec import VERSION, CodecError, decode, encode, vote_bytes
from .store import ContentStore, NotFound
from .types import (GENESIS_HASH, NIL, Block, BlockHeader, InvalidTransaction, LastProof, OffchainTx, ReportTx,
                    assemble_block, decode_block, decode_tx, tx_root)
from .validation import RULES, VALID, Verdict, check_last_proof, check_tx, quorum, validate_block

__all__ = [
    "Chunk", "ChunkRejected", "check_chunk", "chunk_block", "chunk_bytes", "reassemble",
    "VERSION", "CodecError", "decode", "encode", "vote_bytes",
    "ContentStore", "NotFound",
    "GENESIS_HASH", "NIL", "Block", "BlockHeader", "InvalidTransaction", "LastProof", "OffchainTx", "ReportTx",
    "assemble_block", "decode_block", "decode_tx", "tx_root",
    "RULES", "VALID", "Verdict", "check_last_proof", "check_tx", "quorum", "validate_block",
]
