"""Incremental maintenance of conjunctive queries over static and dynamic relations."""

from __future__ import annotations

from .classify import ClassificationReport, check_well_behaved, classify
from .engine import Engine, materialize
from .parser import UpdateEvent, load_query, parse_query, parse_update_stream
from .query import Atom, ConjunctiveQuery, make_query
from .rewrite import ViewTree, check_safe, rewrite
from .transition import TransitionSystem, build_transition_system
from .vo import VariableOrder, create_vo
from .width import fractional_edge_cover, preprocessing_width

__all__ = [
    "Atom", "ClassificationReport", "ConjunctiveQuery", "Engine", "TransitionSystem",
    "UpdateEvent", "VariableOrder", "ViewTree", "build_transition_system", "check_safe",
    "check_well_behaved", "classify", "create_vo", "fractional_edge_cover", "load_query",
    "make_query", "materialize", "parse_query", "parse_update_stream", "preprocessing_width",
    "rewrite",
]
