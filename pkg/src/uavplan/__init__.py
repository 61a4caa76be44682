"""Coverage-aware UAV path planning with tabular Q-learning and SARSA."""

__version__ = "0.1.0"
