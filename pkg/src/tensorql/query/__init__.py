"""SPARQL-subset parsing, planning and evaluation."""

from .ast import BGP, Group, OptionalPattern, Query, Term, TriplePattern, UnionPattern, Var
from .engine import (
    Evaluator,
    SolutionSequence,
    decode_solutions,
    eval_ask,
    eval_construct,
    eval_distinct,
    eval_join,
    eval_optional,
    eval_pattern,
    eval_union,
    execute,
    select,
)
from .parser import QuerySyntaxError, UnsupportedFeatureError, parse
from .plan import JoinCase, JoinPlan, PlanStep, UnknownGraphError, plan

__all__ = [
    "BGP", "Evaluator", "Group", "JoinCase", "JoinPlan", "OptionalPattern", "PlanStep", "Query",
    "QuerySyntaxError", "SolutionSequence", "Term", "TriplePattern", "UnionPattern",
    "UnknownGraphError", "UnsupportedFeatureError", "Var", "decode_solutions", "eval_ask",
    "eval_construct", "eval_distinct", "eval_join", "eval_optional", "eval_pattern", "eval_union",
    "execute", "parse", "plan", "select",
]
