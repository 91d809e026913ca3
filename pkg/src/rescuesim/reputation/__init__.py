"""Behaviour records, misbehaviour detection, reports and decayed reputation."""
from .detect import (HeightArchive, Misbehavior, analyze_height, detect_block_faults, detect_equivocation,
                     detect_lock_violation)
from .ledger import (BEHAVIOURS, BehaviorRecord, ReputationLedger, make_record, reputation_bound, sigmoid,
                     update_reputation)
from .reports import InvalidReport, ReportOutcome, make_report, process_report, verify_evidence

__all__ = [
    "HeightArchive", "Misbehavior", "analyze_height", "detect_block_faults", "detect_equivocation",
    "detect_lock_violation",
    "BEHAVIOURS", "BehaviorRecord", "ReputationLedger", "make_record", "reputation_bound", "sigmoid",
    "update_reputation",
    "InvalidReport", "ReportOutcome", "make_report", "process_report", "verify_evidence",
]
