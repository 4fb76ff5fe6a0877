"""Hierarchical LTL mission planning over 3D scene graphs with language-model guidance."""
from .automaton import Dfa, accepts, compile, shortest_accepting_path
from .domain import PlanningDomain, ProductState, build_domain
from .heuristics import HeuristicTable, LlmGuidance, build_tables, mock_guidance, remaining_mission
from .ltl import check_cosafe, eval_trace, parse_prefix, print_prefix, to_nnf
from .planner import Infeasible, PlanResult, SearchConfig, plan, solve
from .scene import SceneGraph, SceneSpec, generate_scene, load_scene

__all__ = [
    "Dfa", "accepts", "compile", "shortest_accepting_path",
    "PlanningDomain", "ProductState", "build_domain",
    "HeuristicTable", "LlmGuidance", "build_tables", "mock_guidance", "remaining_mission",
    "check_cosafe", "eval_trace", "parse_prefix", "print_prefix", "to_nnf",
    "Infeasible", "PlanResult", "SearchConfig", "plan", "solve",
    "SceneGraph", "SceneSpec", "generate_scene", "load_scene",
]
__version__ = "0.1.0"
