"""Attestation-Datalog specification language: AST, parser, safety, strata."""

from .analysis import check_safety, dependency_levels, stratify
from .parser import parse_atom, parse_literal, parse_spec
from .terms import (
    Atom,
    AttestedLit,
    ComparisonLit,
    HeadLit,
    IntConst,
    Literal,
    NegatedLit,
    PlainLit,
    Rule,
    RuleSet,
    Strata,
    StrConst,
    Sum,
    SymConst,
    Term,
    ValidatedRuleSet,
    Variable,
    is_constant,
    literal_atom,
    literal_variables,
)

__all__ = [
    "Atom",
    "AttestedLit",
    "ComparisonLit",
    "HeadLit",
    "IntConst",
    "Literal",
    "NegatedLit",
    "PlainLit",
    "Rule",
    "RuleSet",
    "Strata",
    "StrConst",
    "Sum",
    "SymConst",
    "Term",
    "ValidatedRuleSet",
    "Variable",
    "check_safety",
    "dependency_levels",
    "is_constant",
    "literal_atom",
    "literal_variables",
    "parse_atom",
    "parse_literal",
    "parse_spec",
    "stratify",
]
