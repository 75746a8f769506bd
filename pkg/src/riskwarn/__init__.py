"""Collision warnings for assistive navigation from object tracks.

The package scores each tracked object with a probabilistic collision risk,
compares it against distance and time-to-contact baselines, and evaluates
all of them against an oracle on synthetic pedestrian scenarios.
"""

from .core import Frame, ObjectState, Scenario, WarningStream, load_scenario, save_scenario
from .pipeline import RunConfig
from .risk import RiskParams

__version__ = "0.1.0"

__all__ = [
    "Frame",
    "ObjectState",
    "RiskParams",
    "RunConfig",
    "Scenario",
    "WarningStream",
    "load_scenario",
    "save_scenario",
]
