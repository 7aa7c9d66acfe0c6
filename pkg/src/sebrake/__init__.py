"""Feedback-linearizing pressure control for a self-energizing electro-hydraulic brake."""

from .controller import ControllerConfig
from .plant import NOMINAL, BrakeState, Envelope, PlantParams, Regime
from .sim import Scenario, Trace, run_closed_loop, step_metrics

__all__ = [
    "NOMINAL", "BrakeState", "ControllerConfig", "Envelope", "PlantParams",
    "Regime", "Scenario", "Trace", "run_closed_loop", "step_metrics",
]
