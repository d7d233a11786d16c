"""Bottom-up evaluation of attestation-Datalog over a revisioned fact store.

Facts are `principal attests atom` units (principal None for plain facts).
Revisions follow booking sessions: a fact carries the session that produced
it, and closed sessions can be compacted away without touching protected
verdict predicates.  Evaluation is stratified and semi-naive: within each
stratum only joins touching newly derived facts are re-run.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Iterable, Iterator

from .errors import (
    ArithmeticOverflowError,
    NonGroundFactError,
    RevisionRegressionError,
    UnknownPredicateError,
)
from .speclang import (
    Atom,
    AttestedLit,
    ComparisonLit,
    IntConst,
    NegatedLit,
    PlainLit,
    Rule,
    Strata,
    StrConst,
    Sum,
    SymConst,
    Term,
    Variable,
    is_constant,
)
from .speclang.terms import INT64_MAX, INT64_MIN, Constant

Subst = dict[str, Constant]

# Verdict predicates survive compaction so audits can reference them after
# their session closed.
DEFAULT_PROTECTED_PREFIXES = ("forbidden",)


@dataclass(frozen=True)
class AttestedFact:
    """A ground claim bound to its attesting principal and provenance."""

    principal: str | None
    atom: Atom
    revision: int
    source: int | None = None  # log index of the introducing event
    derived: bool = False

    def __post_init__(self):
        if not self.atom.is_ground():
            raise NonGroundFactError(f"fact is not ground: {self.atom}")
        if not self.derived and self.source is None:
            raise ValueError(f"base fact must carry a log index: {self.atom}")

    def key(self) -> tuple[str | None, str, tuple[Term, ...]]:
        return (self.principal, self.atom.predicate, self.atom.args)

    def render(self) -> str:
        src = "-" if self.source is None else str(self.source)
        prefix = f"'{self.principal}' attests " if self.principal is not None else ""
        return f"{prefix}{self.atom}. % rev={self.revision} src={src}"


@dataclass
class EvalStats:
    """Counters produced by one evaluate() call."""

    rule_firings: int = 0
    fixpoint_iterations: int = 0


@dataclass
class FactStore:
    """Deduplicated fact set indexed by predicate, with session revisions."""

    current_revision: int = 0
    protected_predicates: set[str] = field(default_factory=set)
    protected_prefixes: tuple[str, ...] = DEFAULT_PROTECTED_PREFIXES
    _facts: dict[str, dict[tuple[str | None, tuple[Term, ...]], AttestedFact]] = field(
        default_factory=dict
    )
    _known_predicates: set[str] = field(default_factory=set)
    # First derivation of each derived fact: key -> (rule id, ground
    # substitution, ground positive body facts).  Used to rebuild evidence
    # trees deterministically.
    provenance: dict[
        tuple[str | None, str, tuple[Term, ...]],
        tuple[int, tuple[tuple[str, Term], ...], tuple[tuple[str | None, Atom], ...]],
    ] = field(default_factory=dict)

    def __len__(self) -> int:
        return sum(len(bucket) for bucket in self._facts.values())

    def assert_fact(self, f: AttestedFact) -> "FactStore":
        """Insert a fact; idempotent, advances current_revision as needed."""
        if f.revision > self.current_revision + 1:
            raise RevisionRegressionError(
                f"fact revision {f.revision} ahead of store revision {self.current_revision}"
            )
        bucket = self._facts.setdefault(f.atom.predicate, {})
        key = (f.principal, f.atom.args)
        existing = bucket.get(key)
        if existing is None:
            bucket[key] = f
        else:
            # Re-attestation refreshes the revision; base provenance wins over
            # a derived copy of the same claim.
            revision = max(existing.revision, f.revision)
            base = existing if not existing.derived else f
            if revision != base.revision:
                base = replace(base, revision=revision)
            bucket[key] = base
        self._known_predicates.add(f.atom.predicate)
        self.current_revision = max(self.current_revision, f.revision)
        return self

    def register_predicates(self, names: Iterable[str]) -> None:
        self._known_predicates.update(names)

    def begin_revision(self, revision: int) -> None:
        """Record that a session has been observed (revisions never regress)."""
        self.current_revision = max(self.current_revision, revision)

    def protect(self, predicate: str) -> None:
        self.protected_predicates.add(predicate)

    def is_protected(self, predicate: str) -> bool:
        return predicate in self.protected_predicates or predicate.startswith(
            self.protected_prefixes
        )

    def contains(self, principal: str | None, atom: Atom) -> bool:
        bucket = self._facts.get(atom.predicate)
        return bucket is not None and (principal, atom.args) in bucket

    def facts(self) -> Iterator[AttestedFact]:
        for predicate in self._facts:
            yield from self._facts[predicate].values()

    def facts_for(self, predicate: str) -> list[AttestedFact]:
        return list(self._facts.get(predicate, {}).values())

    def query(self, goal: Atom, principal: str | None = "*") -> list[Subst]:
        """All substitutions grounding `goal` against stored facts.

        `principal="*"` matches any attester including plain facts; pass a
        name (or None) to pin it.  A present ground goal yields one empty
        substitution.
        """
        if goal.predicate not in self._known_predicates:
            raise UnknownPredicateError(f"unknown predicate: {goal.predicate}")
        results: list[Subst] = []
        seen: set[tuple[tuple[str, Constant], ...]] = set()
        for fact in self.facts_for(goal.predicate):
            if principal != "*" and fact.principal != principal:
                continue
            subst = match_atom(goal, fact.atom, {})
            if subst is None:
                continue
            key = tuple(sorted(subst.items()))
            if key not in seen:
                seen.add(key)
                results.append(subst)
        results.sort(key=lambda s: tuple(sorted((k, repr(v)) for k, v in s.items())))
        return results

    def compact_revisions(self, keep_from: int) -> "FactStore":
        """Drop facts with revision < keep_from, except protected predicates."""
        keep_from = min(keep_from, self.current_revision)
        for predicate in list(self._facts):
            if self.is_protected(predicate):
                continue
            bucket = self._facts[predicate]
            stale = [k for k, f in bucket.items() if f.revision < keep_from]
            for k in stale:
                fact = bucket.pop(k)
                self.provenance.pop(fact.key(), None)
            if not bucket:
                del self._facts[predicate]
        return self

    def clone(self) -> "FactStore":
        out = FactStore(
            current_revision=self.current_revision,
            protected_predicates=set(self.protected_predicates),
            protected_prefixes=self.protected_prefixes,
        )
        out._facts = {p: dict(bucket) for p, bucket in self._facts.items()}
        out._known_predicates = set(self._known_predicates)
        out.provenance = dict(self.provenance)
        return out

    def dump(self) -> str:
        """One fact per line in the audit dump format."""
        lines = [f.render() for f in self.facts()]
        return "\n".join(sorted(lines)) + ("\n" if lines else "")


# --- matching and comparison ------------------------------------------------


def resolve_term(t: Term, subst: Subst) -> Term:
    if isinstance(t, Variable):
        return subst.get(t.name, t)
    return t


def match_term(pattern: Term, value: Constant, subst: Subst) -> Subst | None:
    if isinstance(pattern, Variable):
        bound = subst.get(pattern.name)
        if bound is None:
            out = dict(subst)
            out[pattern.name] = value
            return out
        return subst if bound == value else None
    return subst if pattern == value else None


def match_atom(pattern: Atom, fact: Atom, subst: Subst) -> Subst | None:
    if pattern.predicate != fact.predicate or pattern.arity != fact.arity:
        return None
    current = subst
    for p, v in zip(pattern.args, fact.args):
        if not is_constant(v):
            return None
        current = match_term(p, v, current)
        if current is None:
            return None
    return current


def _comparison_value(t: Term, subst: Subst) -> Constant | None:
    if isinstance(t, Sum):
        base = subst.get(t.var.name)
        if not isinstance(base, IntConst):
            return None
        total = base.value + t.offset.value
        if not (INT64_MIN <= total <= INT64_MAX):
            raise ArithmeticOverflowError(
                f"{base.value} + {t.offset.value} leaves the signed 64-bit range"
            )
        return IntConst(total)
    resolved = resolve_term(t, subst)
    return resolved if is_constant(resolved) else None


def eval_comparison(cmp: ComparisonLit, subst: Subst) -> bool:
    lhs = _comparison_value(cmp.lhs, subst)
    rhs = _comparison_value(cmp.rhs, subst)
    if lhs is None or rhs is None:
        return False
    if cmp.op == "=":
        return lhs == rhs
    if cmp.op == "!=":
        return lhs != rhs
    if isinstance(lhs, IntConst) and isinstance(rhs, IntConst):
        a, b = lhs.value, rhs.value
    elif isinstance(lhs, StrConst) and isinstance(rhs, StrConst):
        a, b = lhs.value, rhs.value
    elif isinstance(lhs, SymConst) and isinstance(rhs, SymConst):
        a, b = lhs.name, rhs.name
    else:
        return False
    return {"<": a < b, "<=": a <= b, ">": a > b, ">=": a >= b}[cmp.op]


def _literal_principal(lit: PlainLit | AttestedLit) -> Term | None:
    return lit.principal if isinstance(lit, AttestedLit) else None


def match_positive(
    lit: PlainLit | AttestedLit,
    subst: Subst,
    facts: Iterable[AttestedFact],
) -> Iterator[Subst]:
    """Substitutions extending `subst` that match `lit` against `facts`."""
    principal_term = _literal_principal(lit)
    for fact in facts:
        if principal_term is None:
            if fact.principal is not None:
                continue
            current: Subst | None = subst
        else:
            if fact.principal is None:
                continue
            current = match_term(principal_term, StrConst(fact.principal), subst)
            if current is None:
                continue
        current = match_atom(lit.atom, fact.atom, current)
        if current is not None:
            yield current


def negation_holds(neg: NegatedLit, subst: Subst, store: FactStore) -> bool:
    """True when no stored fact matches the negated literal under `subst`.

    Unbound variables inside the literal act existentially: the negation
    fails as soon as any instantiation of them matches.
    """
    inner = neg.inner
    facts = store.facts_for(inner.atom.predicate)
    for _ in match_positive(inner, subst, facts):
        return False
    return True


# --- evaluation ------------------------------------------------------------


def _ground_head(rule: Rule, subst: Subst) -> tuple[str | None, Atom]:
    head = rule.head
    args = tuple(resolve_term(a, subst) for a in head.atom.args)
    atom = Atom(predicate=head.atom.predicate, args=args)
    principal: str | None = None
    if isinstance(head, AttestedLit):
        p = resolve_term(head.principal, subst)
        if isinstance(p, StrConst):
            principal = p.value
        elif isinstance(p, SymConst):
            principal = p.name
        else:  # pragma: no cover - ruled out by safety
            raise NonGroundFactError(f"unbound head principal in rule {rule.id}")
    return principal, atom


def _rule_matches(
    rule: Rule,
    store: FactStore,
    delta_keys: set[tuple[str | None, str, tuple[Term, ...]]] | None,
) -> Iterator[tuple[Subst, tuple[tuple[str | None, Atom], ...]]]:
    """Ground substitutions satisfying the body, with the positive support.

    When `delta_keys` is given, only derivations using at least one delta
    fact in some positive position are produced (semi-naive join).
    """
    positives = rule.positive_body()
    comparisons = rule.comparisons()
    negations = rule.negated_body()

    def descend(
        i: int, subst: Subst, used_delta: bool, support: tuple[tuple[str | None, Atom], ...]
    ) -> Iterator[tuple[Subst, tuple[tuple[str | None, Atom], ...]]]:
        if i == len(positives):
            if delta_keys is not None and not used_delta:
                return
            for cmp in comparisons:
                if not eval_comparison(cmp, subst):
                    return
            for neg in negations:
                if not negation_holds(neg, subst, store):
                    return
            yield subst, support
            return
        lit = positives[i]
        for fact in store.facts_for(lit.atom.predicate):
            for nxt in match_positive(lit, subst, [fact]):
                in_delta = delta_keys is not None and fact.key() in delta_keys
                yield from descend(
                    i + 1, nxt, used_delta or in_delta, support + ((fact.principal, fact.atom),)
                )

    yield from descend(0, {}, False, ())


def evaluate(strata: Strata, store: FactStore, stats: EvalStats | None = None) -> FactStore:
    """Close the store under all rules, stratum by stratum.

    Derived facts are tagged derived=True, carry the head's attesting
    principal when the head is attested, and get the store's current
    revision.  The result equals the naive stratified fixpoint regardless of
    fact insertion order.
    """
    if stats is None:
        stats = EvalStats()
    vrs = strata.ruleset
    if vrs is not None:
        store.register_predicates(vrs.ruleset.predicates())
    revision = store.current_revision
    rules_by_stratum: dict[int, list[Rule]] = {}
    if vrs is not None:
        for rule in vrs.rules:
            rules_by_stratum.setdefault(strata.rule_stratum[rule.id], []).append(rule)

    def add(
        rule: Rule, subst: Subst, support: tuple[tuple[str | None, Atom], ...]
    ) -> AttestedFact | None:
        stats.rule_firings += 1
        principal, atom = _ground_head(rule, subst)
        if store.contains(principal, atom):
            return None
        fact = AttestedFact(
            principal=principal, atom=atom, revision=revision, derived=True
        )
        store.assert_fact(fact)
        store.provenance.setdefault(
            fact.key(), (rule.id, tuple(sorted(subst.items())), support)
        )
        return fact

    for s in range(len(strata.order)):
        rules = rules_by_stratum.get(s, [])
        if not rules:
            continue
        delta: set[tuple[str | None, str, tuple[Term, ...]]] = set()
        stats.fixpoint_iterations += 1
        for rule in rules:
            for subst, support in _rule_matches(rule, store, None):
                fact = add(rule, subst, support)
                if fact is not None:
                    delta.add(fact.key())
        while delta:
            stats.fixpoint_iterations += 1
            next_delta: set[tuple[str | None, str, tuple[Term, ...]]] = set()
            for rule in rules:
                for subst, support in _rule_matches(rule, store, delta):
                    fact = add(rule, subst, support)
                    if fact is not None:
                        next_delta.add(fact.key())
            delta = next_delta
    return store


def assert_spec_facts(store: FactStore, vrs) -> FactStore:
    """Load ground facts declared in a spec file as axioms (derived=True)."""
    for lit in vrs.facts:
        principal = None
        if isinstance(lit, AttestedLit):
            p = lit.principal
            principal = p.value if isinstance(p, StrConst) else str(p)
        store.assert_fact(
            AttestedFact(
                principal=principal,
                atom=lit.atom,
                revision=store.current_revision,
                derived=True,
            )
        )
    return store
