"""DQN-driven UAV base-station movement in a simulated UAV-assisted network."""

__version__ = "0.1.0"
