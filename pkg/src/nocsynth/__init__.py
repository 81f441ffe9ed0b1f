"""Application-specific network-on-chip synthesis by primitive-based graph decomposition."""

from .decomposer import Constraints, Decomposition, Infeasible, decompose, format_listing
from .energy import CALIBRATED, EnergyModel
from .graph import Acg, Edge, parse_acg, serialize_acg
from .isomorphism import Match, enumerate_matches
from .library import CommPrimitive, Library, builtin_library, load_library
from .simulator import SimConfig, SimResult, Traffic, mesh_baseline, simulate
from .synthesizer import Architecture, RoutingTables, build_routing_tables, detect_deadlock, glue
from .workloads import aes_acg, planted_acg, random_acg, traffic_from_acg

__version__ = "0.1.0"

__all__ = [
    "Acg", "Architecture", "CALIBRATED", "CommPrimitive", "Constraints", "Decomposition", "Edge",
    "EnergyModel", "Infeasible", "Library", "Match", "RoutingTables", "SimConfig", "SimResult",
    "Traffic", "aes_acg", "build_routing_tables", "builtin_library", "decompose", "detect_deadlock",
    "enumerate_matches", "format_listing", "glue", "load_library", "mesh_baseline", "parse_acg",
    "planted_acg", "random_acg", "serialize_acg", "simulate", "traffic_from_acg",
]
