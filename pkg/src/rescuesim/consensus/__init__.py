"""Reputation-weighted Tendermint-style consensus."""
from .committee import Committee, ConfigError, elect_validators, leader_for, static_committee
from .messages import (PRECOMMIT, PREVOTE, PROPOSAL, BlockPart, CommitCert, PoL, Proposal, SyncRequest, Vote,
                       build_last_proof, make_proposal, make_vote)
from .node import (COMMIT_STEP, PRECOMMIT_STEP, PREVOTE_STEP, PROPOSE_STEP, Archive, Commit, ConsensusNode,
                   ConsensusParams, Evidence, NodeContext, Send, Timer)
from .tally import InvariantViolation, TallyResult, VoteSet, tally

__all__ = [
    "Committee", "ConfigError", "elect_validators", "leader_for", "static_committee",
    "PRECOMMIT", "PREVOTE", "PROPOSAL", "BlockPart", "CommitCert", "PoL", "Proposal", "SyncRequest", "Vote",
    "build_last_proof", "make_proposal", "make_vote",
    "COMMIT_STEP", "PRECOMMIT_STEP", "PREVOTE_STEP", "PROPOSE_STEP", "Archive", "Commit", "ConsensusNode",
    "ConsensusParams", "Evidence", "NodeContext", "Send", "Timer",
    "InvariantViolation", "TallyResult", "VoteSet", "tally",
]
