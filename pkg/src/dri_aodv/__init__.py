"""AODV simulator with a black-hole adversary and a DRI cross-check defense."""

from .metrics import MetricsReport, aggregate
from .scenario import ParseError, Scenario, ValidationError, parse_scenario
from .simkernel import Simulator, run

__all__ = [
    "MetricsReport",
    "ParseError",
    "Scenario",
    "Simulator",
    "ValidationError",
    "aggregate",
    "parse_scenario",
    "run",
]
