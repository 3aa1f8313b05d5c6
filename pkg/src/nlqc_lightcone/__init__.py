"""Light-cone non-local quantum computation: cost analysis and two-party simulation."""

from .circuit import CircuitError, CircuitStructure, GateId, ancestors, family, lightcone_volume, load_circuit, parents
from .costmodel import AccuracyTarget, cost_report, entanglement_cost, error_budget, ports_required
from .engine import ProtocolSpec, make_input, run_whole_register, run_protocol, run_spec
from .teleport import pbt_bound_report, pbt_error_channel

__version__ = "0.1.0"

__all__ = [
    "AccuracyTarget", "CircuitError", "CircuitStructure", "GateId", "ProtocolSpec", "ancestors",
    "cost_report", "entanglement_cost", "error_budget", "family", "lightcone_volume", "load_circuit",
    "make_input", "parents", "pbt_bound_report", "pbt_error_channel", "ports_required",
    "run_whole_register", "run_protocol", "run_spec",
]
