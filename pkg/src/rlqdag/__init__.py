"""Recursive query plan enumeration with RLQDAGs.

A query is parsed into a μ-RA term, interned into a DAG whose equivalence
classes group equivalent subplans, and expanded under rewrite rules for
fixpoints and plain relational operators.  A term-at-a-time enumerator, a
set-semantics evaluator and a simple cost model serve as baselines and
oracles.
"""
from .baseline import EnumerationResult, enumerate_plans, plans_per_second
from .cost import BestPlan, CostModel, Estimates, best_plan, estimate, term_cost
from .dag import Dag, Ref, Verdict
from .errors import (
    BudgetExhausted, FreshnessError, InconsistentNode, ParseError, RestrictionError, RLQDagError, SchemaError,
    UnboundReference,
)
from .evaluator import Database, Relation, evaluate, load_edges
from .frontend import bundled_queries, parse_query, qr, query_catalog
from .syntax import parse_term, print_term
from .terms import (
    AntiJoin, AntiProject, ColEq, Eq, Filter, Fix, Join, Neq, Rel, Rename, Union, Var, term_destab, term_rigid,
    type_of,
)
from .transforms import ExpansionConfig, ExpansionResult, completeness_scan, expand, parse_rules

__version__ = "0.1.0"

__all__ = [
    "AntiJoin", "AntiProject", "BestPlan", "BudgetExhausted", "ColEq", "CostModel", "Dag", "Database",
    "EnumerationResult", "Eq", "Estimates", "ExpansionConfig", "ExpansionResult", "Filter", "Fix",
    "FreshnessError", "InconsistentNode", "Join", "Neq", "ParseError", "RLQDagError", "Ref", "Rel", "Relation",
    "Rename", "RestrictionError", "SchemaError", "UnboundReference", "Union", "Var", "Verdict", "best_plan",
    "bundled_queries", "completeness_scan", "enumerate_plans", "estimate", "evaluate", "expand", "load_edges",
    "parse_query", "parse_rules", "parse_term", "plans_per_second", "print_term", "qr", "query_catalog",
    "term_cost", "term_destab", "term_rigid", "type_of",
]
