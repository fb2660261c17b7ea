"""Static planning of event sequences that drive an Android-style app to a target method."""

from .callgraph import PartialCallGraph, Path, build_partial_cg, enrich_paths, extract_paths
from .dataflow import DataflowEngine, constant_propagation, points_to, resolve_conditional
from .gui import GuiBinding, resolve_gui_events
from .icc import IccMap, IccPath, IccTrigger, map_icc
from .ir import AppModel, MethodRef, parse_app, print_app
from .pipeline import Analyzer, TargetReport
from .plan import Plan, Step, deserialize, serialize, synthesize
from .sim import execute_plan, exhaustive_explore

__all__ = [
    "Analyzer", "AppModel", "DataflowEngine", "GuiBinding", "IccMap", "IccPath", "IccTrigger",
    "MethodRef", "PartialCallGraph", "Path", "Plan", "Step", "TargetReport", "build_partial_cg",
    "constant_propagation", "deserialize", "enrich_paths", "execute_plan", "exhaustive_explore",
    "extract_paths", "map_icc", "parse_app", "points_to", "print_app", "resolve_conditional",
    "resolve_gui_events", "serialize", "synthesize",
]
