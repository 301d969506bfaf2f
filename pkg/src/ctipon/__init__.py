"""Cooperative-DBA fronthaul simulator: a 5G DU MAC scheduler announces
upcoming uplink bursts to a virtual PON DBA over a Cooperative Transport
Interface so upstream grants are in place before the packets reach the ONU.
"""

from .scenario import ScenarioConfig, ScenarioError, load_scenario
from .runner import ComparisonReport, Simulation, compare, run_scenario
from .telemetry import RunReport

__all__ = [
    "ScenarioConfig",
    "ScenarioError",
    "load_scenario",
    "ComparisonReport",
    "Simulation",
    "compare",
    "run_scenario",
    "RunReport",
]
