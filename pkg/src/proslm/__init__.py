"""Logic-grounded context gathering and fact validation for LLM answers."""

from .parser import parse_program, parse_query, parse_term, print_program, print_term
from .solver import SolveConfig, SolveResult, render_goal_tree, solve
from .terms import Atom, Clause, Compound, KnowledgeBase, ListTerm, Num, Substitution, Var, unify

__all__ = [
    "Atom",
    "Clause",
    "Compound",
    "KnowledgeBase",
    "ListTerm",
    "Num",
    "SolveConfig",
    "SolveResult",
    "Substitution",
    "Var",
    "parse_program",
    "parse_query",
    "parse_term",
    "print_program",
    "print_term",
    "render_goal_tree",
    "solve",
    "unify",
]

__version__ = "0.1.0"
