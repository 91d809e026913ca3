"""Deterministic simulation harness: transport, adversaries, scenarios, metrics."""
from .adversary import AdversaryScript, ByzantineNode, Coalition, build_script
from .config import DEFAULTS, Scenario, apply_overrides, load_config, load_scenario
from .engine import RunMetrics, SafetyViolation, Simulation, rng_stream, run_scenario
from .transport import Partition, Transport

__all__ = [
    "AdversaryScript", "ByzantineNode", "Coalition", "build_script",
    "DEFAULTS", "Scenario", "apply_overrides", "load_config", "load_scenario",
    "RunMetrics", "SafetyViolation", "Simulation", "rng_stream", "run_scenario",
    "Partition", "Transport",
]
