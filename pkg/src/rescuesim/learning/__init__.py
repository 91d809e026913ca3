"""Learning agents for the repeated pricing game: CNN Q-network, DQN, tabular and greedy baselines."""
from .agents import (ActionGrid, AgentConfig, DQNAgent, GreedyAgent, ReplayMemory, StateWindow, TabularQAgent,
                     encode_state, select_action, train_step)
from .dynamic import SCHEMES, DynamicTrace, make_agents, run_dynamic_game
from .qnet import FORMAT_VERSION, QNetwork, qnet_forward

__all__ = [
    "ActionGrid", "AgentConfig", "DQNAgent", "GreedyAgent", "ReplayMemory", "StateWindow", "TabularQAgent",
    "encode_state", "select_action", "train_step",
    "SCHEMES", "DynamicTrace", "make_agents", "run_dynamic_game",
    "FORMAT_VERSION", "QNetwork", "qnet_forward",
]
