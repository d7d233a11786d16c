"""AST for attestation-Datalog programs.

A program is a list of rules plus ground facts.  Rule heads and body
literals may be attested ("'SB' attests booking(Id,T,C)"), which binds the
claim to a principal.  All nodes are immutable and hashable so they can be
used as dictionary keys by the engine and shared freely across threads.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Iterator, Union

from ..errors import ArityError

INT64_MIN = -(2**63)
INT64_MAX = 2**63 - 1

_VARIABLE_RE = re.compile(r"[A-Z][A-Za-z0-9_]*\Z")
_SYMBOL_RE = re.compile(r"[a-z][A-Za-z0-9_]*\Z")

COMPARISON_OPS = ("<", "<=", "=", "!=", ">", ">=")


@dataclass(frozen=True)
class Variable:
    name: str

    def __post_init__(self):
        if not _VARIABLE_RE.match(self.name):
            raise ValueError(f"bad variable name: {self.name!r}")

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True)
class SymConst:
    name: str

    def __post_init__(self):
        if not _SYMBOL_RE.match(self.name):
            raise ValueError(f"bad symbol name: {self.name!r}")

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True)
class IntConst:
    value: int

    def __post_init__(self):
        if not (INT64_MIN <= self.value <= INT64_MAX):
            raise ValueError(f"integer constant out of 64-bit range: {self.value}")

    def __str__(self) -> str:
        return str(self.value)


@dataclass(frozen=True)
class StrConst:
    value: str

    def __str__(self) -> str:
        return "'" + self.value.replace("'", "\\'") + "'"


@dataclass(frozen=True)
class Sum:
    """Var + intconst; only valid as a comparison operand."""

    var: Variable
    offset: IntConst

    def __str__(self) -> str:
        return f"{self.var} + {self.offset}"


Term = Union[Variable, SymConst, IntConst, StrConst, Sum]
Constant = Union[SymConst, IntConst, StrConst]


def is_constant(t: Term) -> bool:
    return isinstance(t, (SymConst, IntConst, StrConst))


@dataclass(frozen=True)
class Atom:
    predicate: str
    args: tuple[Term, ...]

    @property
    def arity(self) -> int:
        return len(self.args)

    def is_ground(self) -> bool:
        return all(is_constant(a) for a in self.args)

    def variables(self) -> Iterator[Variable]:
        for a in self.args:
            if isinstance(a, Variable):
                yield a

    def __str__(self) -> str:
        if not self.args:
            return self.predicate
        return f"{self.predicate}({', '.join(str(a) for a in self.args)})"


@dataclass(frozen=True)
class PlainLit:
    atom: Atom

    def __str__(self) -> str:
        return str(self.atom)


@dataclass(frozen=True)
class AttestedLit:
    """principal attests atom; the principal is a quoted string or a variable."""

    principal: Term
    atom: Atom

    def __post_init__(self):
        if not isinstance(self.principal, (StrConst, Variable)):
            raise ValueError("attestation principal must be a string constant or variable")

    def __str__(self) -> str:
        return f"{self.principal} attests {self.atom}"


@dataclass(frozen=True)
class NegatedLit:
    inner: Union[PlainLit, AttestedLit]

    def __post_init__(self):
        if not isinstance(self.inner, (PlainLit, AttestedLit)):
            raise ValueError("negation may only wrap a plain or attested atom")

    def __str__(self) -> str:
        return f"not {self.inner}"


@dataclass(frozen=True)
class ComparisonLit:
    lhs: Term
    op: str
    rhs: Term

    def __post_init__(self):
        if self.op not in COMPARISON_OPS:
            raise ValueError(f"bad comparison operator: {self.op!r}")

    def __str__(self) -> str:
        return f"{self.lhs} {self.op} {self.rhs}"


Literal = Union[PlainLit, AttestedLit, NegatedLit, ComparisonLit]
HeadLit = Union[PlainLit, AttestedLit]


def literal_atom(lit: Literal) -> Atom | None:
    """The atom of a plain/attested/negated literal; None for comparisons."""
    if isinstance(lit, (PlainLit, AttestedLit)):
        return lit.atom
    if isinstance(lit, NegatedLit):
        return lit.inner.atom
    return None


def literal_variables(lit: Literal) -> set[Variable]:
    if isinstance(lit, ComparisonLit):
        out = set()
        for side in (lit.lhs, lit.rhs):
            if isinstance(side, Variable):
                out.add(side)
            elif isinstance(side, Sum):
                out.add(side.var)
        return out
    inner = lit.inner if isinstance(lit, NegatedLit) else lit
    out = set(inner.atom.variables())
    if isinstance(inner, AttestedLit) and isinstance(inner.principal, Variable):
        out.add(inner.principal)
    return out


@dataclass(frozen=True)
class Rule:
    head: HeadLit
    body: tuple[Literal, ...]
    id: int

    def __post_init__(self):
        if not self.body:
            raise ValueError("rule body must be non-empty")

    def positive_body(self) -> list[Union[PlainLit, AttestedLit]]:
        return [l for l in self.body if isinstance(l, (PlainLit, AttestedLit))]

    def negated_body(self) -> list[NegatedLit]:
        return [l for l in self.body if isinstance(l, NegatedLit)]

    def comparisons(self) -> list[ComparisonLit]:
        return [l for l in self.body if isinstance(l, ComparisonLit)]

    def __str__(self) -> str:
        return f"{self.head} :- {', '.join(str(l) for l in self.body)}."


@dataclass(frozen=True)
class RuleSet:
    rules: tuple[Rule, ...]
    facts: tuple[HeadLit, ...] = ()

    def __post_init__(self):
        ids = [r.id for r in self.rules]
        if len(ids) != len(set(ids)):
            raise ValueError("rule id collision")
        _check_arities(self)

    def predicates(self) -> list[str]:
        """All predicate names in first-occurrence order."""
        seen: dict[str, None] = {}
        for rule in self.rules:
            for lit in (rule.head, *rule.body):
                atom = literal_atom(lit)
                if atom is not None:
                    seen.setdefault(atom.predicate, None)
        for f in self.facts:
            seen.setdefault(f.atom.predicate, None)
        return list(seen)

    def rules_for(self, predicate: str) -> list[Rule]:
        return [r for r in self.rules if r.head.atom.predicate == predicate]

    def base_predicates(self) -> list[str]:
        heads = {r.head.atom.predicate for r in self.rules}
        return [p for p in self.predicates() if p not in heads]

    def pretty(self) -> str:
        """Render back to .adl text; reparsing yields a structurally equal set."""
        parts = [f"{f}." for f in self.facts]
        parts += [str(r) for r in self.rules]
        return "\n".join(parts) + ("\n" if parts else "")


def _check_arities(rs: RuleSet) -> None:
    arities: dict[str, int] = {}

    def visit(atom: Atom) -> None:
        known = arities.setdefault(atom.predicate, atom.arity)
        if known != atom.arity:
            raise ArityError(
                f"predicate {atom.predicate}/{atom.arity} conflicts with earlier use /{known}"
            )

    for rule in rs.rules:
        for lit in (rule.head, *rule.body):
            atom = literal_atom(lit)
            if atom is not None:
                visit(atom)
    for f in rs.facts:
        visit(f.atom)


@dataclass(frozen=True)
class ValidatedRuleSet:
    """RuleSet that passed the safety check, with per-rule negation-local variables."""

    ruleset: RuleSet
    negation_local: dict[int, frozenset[str]] = field(hash=False, default_factory=dict)

    @property
    def rules(self) -> tuple[Rule, ...]:
        return self.ruleset.rules

    @property
    def facts(self) -> tuple[HeadLit, ...]:
        return self.ruleset.facts


@dataclass(frozen=True)
class Strata:
    """Ordered partition of predicates plus a per-rule stratum assignment."""

    order: tuple[tuple[str, ...], ...]
    rule_stratum: dict[int, int] = field(hash=False, default_factory=dict)
    predicate_stratum: dict[str, int] = field(hash=False, default_factory=dict)
    ruleset: ValidatedRuleSet | None = field(hash=False, default=None)

    def __len__(self) -> int:
        return len(self.order)
