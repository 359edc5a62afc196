"""Digital-twin synchronization simulator with a constrained Q-learning
agent that picks sampling rate and prediction horizon."""

__version__ = "0.1.0"
