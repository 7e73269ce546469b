"""Planning stable block-stacking constructions with one or more grippers."""

from .closure import CircularityError, derive_relations, fixpoint_oracle, supported_closure
from .model import (BlockSpec, Bridge, ExactCell, GoalSpec, Overhang, PhysicsParams, Pick, Place,
                    PlacedOn, PlacedOnAt, Plan, ProblemInstance, Scene, Surface, WorldState,
                    parse_instance, parse_plan, serialize_instance, serialize_plan)
from .planner import SearchResult, Unsat, enumerate_plans, plan
from .render import RenderSpec, render_state
from .stability import check_held_stability, check_static_equilibrium, extract_contacts, tower_oracle
from .validator import Violation, validate_plan

__version__ = "0.1.0"

__all__ = [
    "BlockSpec",
    "Bridge",
    "CircularityError",
    "ExactCell",
    "GoalSpec",
    "Overhang",
    "PhysicsParams",
    "Pick",
    "Place",
    "PlacedOn",
    "PlacedOnAt",
    "Plan",
    "ProblemInstance",
    "RenderSpec",
    "Scene",
    "SearchResult",
    "Surface",
    "Unsat",
    "Violation",
    "WorldState",
    "check_held_stability",
    "check_static_equilibrium",
    "derive_relations",
    "enumerate_plans",
    "extract_contacts",
    "fixpoint_oracle",
    "parse_instance",
    "parse_plan",
    "plan",
    "render_state",
    "serialize_instance",
    "serialize_plan",
    "supported_closure",
    "tower_oracle",
    "validate_plan",
]
