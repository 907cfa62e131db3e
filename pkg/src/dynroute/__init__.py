"""Cross-layer dynamic route selection for multihop relay networks.

Opportunistic (per-slot weighted-SNR) and time-division route selection,
tuned by local gradient ascent under per-node delay-violation constraints,
with an exhaustive static baseline and a slot-level simulator.
"""
__version__ = "0.1.0"

from ._backend import NAME as backend
from .benchmark import best_static, enumerate_assignments, evaluate_static
from .channel import RateEngine, mean_rate_opportunistic, mean_rate_single, win_probability
from .control import ControlReport, Hyperparams
from .errors import (ConfigurationError, DynRouteError, EnumerationCapError, GeometryError,
                     InstabilityError, ScenarioParseError, StarvationError, StructuralError)
from .ocdr import run_control_loop_ocdr
from .qos import QosSpec
from .scenario import load_scenario, load_sweep
from .tcdr import run_control_loop_td
from .topology import ChannelParams, NodeId, Topology, build_linear

__all__ = [
    "backend", "best_static", "enumerate_assignments", "evaluate_static", "RateEngine",
    "mean_rate_opportunistic", "mean_rate_single", "win_probability", "ControlReport",
    "Hyperparams", "ConfigurationError", "DynRouteError", "EnumerationCapError",
    "GeometryError", "InstabilityError", "ScenarioParseError", "StarvationError",
    "StructuralError", "run_control_loop_ocdr", "QosSpec", "load_scenario", "load_sweep",
    "run_control_loop_td", "ChannelParams", "NodeId", "Topology", "build_linear",
]
