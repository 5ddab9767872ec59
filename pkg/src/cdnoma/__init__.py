"""Link-level Monte Carlo simulation of code-domain NOMA (SCMA, MUSA) over
user-grouped hybrid massive-MIMO channels."""

from .harness import ExperimentSpec, ResultRecord, emit, load_records, run, run_air, run_ber
from .scenario import ScenarioConfig, ScenarioError, default_scenario, load_scenario

__version__ = "0.1.0"

__all__ = [
    "ExperimentSpec",
    "ResultRecord",
    "ScenarioConfig",
    "ScenarioError",
    "default_scenario",
    "emit",
    "load_records",
    "load_scenario",
    "run",
    "run_air",
    "run_ber",
]
