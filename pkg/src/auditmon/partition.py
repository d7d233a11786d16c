"""Compile a global rule set into per-monitor subsets.

Placement: every rule goes to the monitor of the principal attesting its
trigger literal — the positive attested body literal whose predicate sits at
the highest derivation level, ties broken by the rightmost body position
(the convention of putting the last-arriving event literal last).  Rules
with no attested body literal are replicated to every monitor.

Each monitor also receives the dependency closure of its rules so negations
can be evaluated locally, and a route table says which derived (or foreign
base) predicates must be shipped to it as signed shared-fact events.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import UncoveredPredicateError, UnknownPredicateError
from .monitor import path_constant
from .speclang import (
    AttestedLit,
    NegatedLit,
    PlainLit,
    Rule,
    RuleSet,
    StrConst,
    ValidatedRuleSet,
    check_safety,
    dependency_levels,
    literal_atom,
)


@dataclass(frozen=True)
class Topology:
    """Who participates and which event channels each principal sends/receives.

    `observes` values are (kind, path) pairs; for `postRequest` literals the
    path is matched against the literal's path constant (leading backslash
    form), for other base predicates the kind is the predicate name itself.
    """

    principals: tuple[str, ...]
    observes: dict[str, frozenset[tuple[str, str]]]

    def observer_tokens(self, principal: str) -> set[str]:
        tokens: set[str] = set()
        for kind, path in self.observes.get(principal, ()):
            if kind == "postRequest":
                tokens.add(path_constant(path))
            else:
                tokens.add(kind)
        return tokens

    @classmethod
    def from_dict(cls, data: dict) -> "Topology":
        observes = {
            name: frozenset((kind, path) for kind, path in pairs)
            for name, pairs in data.get("observes", {}).items()
        }
        return cls(principals=tuple(data["principals"]), observes=observes)

    def to_dict(self) -> dict:
        return {
            "principals": list(self.principals),
            "observes": {
                name: sorted([list(pair) for pair in pairs])
                for name, pairs in self.observes.items()
            },
        }


@dataclass(frozen=True)
class ShareRoute:
    predicate: str
    producer: str
    consumers: tuple[str, ...]


@dataclass
class PartitionResult:
    assignments: dict[str, ValidatedRuleSet]
    shared: dict[str, ShareRoute] = field(default_factory=dict)
    trigger_monitor: dict[int, str | None] = field(default_factory=dict)

    @property
    def shared_predicates(self) -> set[str]:
        return set(self.shared)

    def routes_from(self, producer: str) -> dict[str, tuple[str, ...]]:
        return {
            route.predicate: route.consumers
            for route in self.shared.values()
            if route.producer == producer
        }

    def to_manifest(self) -> dict:
        return {
            name: {"producer": route.producer, "consumers": list(route.consumers)}
            for name, route in sorted(self.shared.items())
        }


def _literal_token(lit: AttestedLit) -> str:
    """Coverage token of a base attested literal (path constant or predicate)."""
    atom = lit.atom
    if atom.predicate == "postRequest" and atom.args and isinstance(atom.args[0], StrConst):
        return atom.args[0].value
    return atom.predicate


def _attested_principal(lit: AttestedLit) -> str | None:
    if isinstance(lit.principal, StrConst):
        return lit.principal.value
    return None


def _trigger(rule: Rule, levels: dict[str, int]) -> str | None:
    """Principal owning the rule's trigger literal, None if untriggerable."""
    best: tuple[int, int] | None = None
    owner: str | None = None
    for position, lit in enumerate(rule.body):
        if not isinstance(lit, AttestedLit):
            continue
        principal = _attested_principal(lit)
        if principal is None:
            continue
        rank = (levels[lit.atom.predicate], position)
        if best is None or rank >= best:
            best = rank
            owner = principal
    return owner


def dependency_closure(rs: RuleSet | ValidatedRuleSet, predicate: str) -> RuleSet:
    """Minimal rule subset from which `predicate`'s extension is computable.

    Follows positive and negated dependencies: negation needs the negated
    predicate's full extension too.
    """
    ruleset = rs.ruleset if isinstance(rs, ValidatedRuleSet) else rs
    if predicate not in ruleset.predicates():
        raise UnknownPredicateError(f"predicate {predicate} not in rule set")
    needed: set[str] = set()
    frontier = [predicate]
    kept_ids: set[int] = set()
    while frontier:
        pred = frontier.pop()
        if pred in needed:
            continue
        needed.add(pred)
        for rule in ruleset.rules_for(pred):
            kept_ids.add(rule.id)
            for lit in rule.body:
                atom = literal_atom(lit)
                if atom is not None:
                    frontier.append(atom.predicate)
    kept = tuple(r for r in ruleset.rules if r.id in kept_ids)
    return RuleSet(rules=kept)


def partition(rs: ValidatedRuleSet, topo: Topology) -> PartitionResult:
    """Assign rules to monitors and compute the shared-fact routes."""
    ruleset = rs.ruleset
    levels = dependency_levels(ruleset)
    base = set(ruleset.base_predicates())

    _check_coverage(ruleset, topo, base)

    triggers: dict[int, str | None] = {}
    assigned: dict[str, list[Rule]] = {p: [] for p in topo.principals}
    for rule in ruleset.rules:
        owner = _trigger(rule, levels)
        triggers[rule.id] = owner
        if owner is None:
            for principal in topo.principals:
                assigned[principal].append(rule)
        else:
            if owner not in assigned:
                raise UncoveredPredicateError(
                    f"trigger principal {owner!r} of rule {rule.id} not in topology"
                )
            assigned[owner].append(rule)

    # Producer of each derived predicate: monitors whose assigned rules define it.
    producers: dict[str, list[str]] = {}
    for principal in topo.principals:
        for rule in assigned[principal]:
            producers.setdefault(rule.head.atom.predicate, [])
            if principal not in producers[rule.head.atom.predicate]:
                producers[rule.head.atom.predicate].append(principal)

    shared: dict[str, ShareRoute] = {}

    def add_route(predicate: str, producer: str, consumer: str) -> None:
        route = shared.get(predicate)
        if route is None:
            shared[predicate] = ShareRoute(
                predicate=predicate, producer=producer, consumers=(consumer,)
            )
        elif consumer not in route.consumers:
            shared[predicate] = ShareRoute(
                predicate=predicate,
                producer=route.producer,
                consumers=tuple(sorted({*route.consumers, consumer})),
            )

    def needs_of(principal: str) -> None:
        """Route facts so `principal` can evaluate its assigned rules completely."""
        pending = list(assigned[principal])
        seen_rules = {r.id for r in pending}
        while pending:
            rule = pending.pop(0)
            for lit in rule.body:
                negated = isinstance(lit, NegatedLit)
                inner = lit.inner if negated else lit
                if not isinstance(inner, (PlainLit, AttestedLit)):
                    continue
                pred = inner.atom.predicate
                if pred in base:
                    if isinstance(inner, AttestedLit):
                        attester = _attested_principal(inner)
                        if attester is not None and attester != principal:
                            add_route(pred, attester, principal)
                    continue
                pred_producers = producers.get(pred, [])
                if principal in pred_producers:
                    continue  # locally derivable; its rules are already assigned here
                if negated:
                    # Negation must be evaluated locally: pull the defining
                    # rules in and recurse into their needs.
                    for defining in ruleset.rules_for(pred):
                        if defining.id not in seen_rules:
                            seen_rules.add(defining.id)
                            pending.append(defining)
                else:
                    producer = pred_producers[0] if pred_producers else None
                    if producer is not None:
                        add_route(pred, producer, principal)

    for principal in topo.principals:
        needs_of(principal)

    # Copy the full dependency closure of each monitor's body predicates.
    assignments: dict[str, ValidatedRuleSet] = {}
    for principal in topo.principals:
        rule_ids = {r.id for r in assigned[principal]}
        for rule in assigned[principal]:
            for lit in rule.body:
                atom = literal_atom(lit)
                if atom is None:
                    continue
                pred = atom.predicate
                if pred in base:
                    continue
                closure = dependency_closure(ruleset, pred)
                rule_ids |= {r.id for r in closure.rules}
        kept = tuple(r for r in ruleset.rules if r.id in rule_ids)
        local = RuleSet(rules=kept, facts=ruleset.facts)
        assignments[principal] = check_safety(local)

    return PartitionResult(assignments=assignments, shared=shared, trigger_monitor=triggers)


def _check_coverage(ruleset: RuleSet, topo: Topology, base: set[str]) -> None:
    """Every base attested literal must be observed by its attesting principal."""
    tokens = {p: topo.observer_tokens(p) for p in topo.principals}
    for rule in ruleset.rules:
        for lit in rule.body:
            inner = lit.inner if isinstance(lit, NegatedLit) else lit
            if not isinstance(inner, AttestedLit):
                continue
            if inner.atom.predicate not in base:
                continue
            principal = _attested_principal(inner)
            if principal is None:
                continue
            token = _literal_token(inner)
            if principal not in tokens or token not in tokens[principal]:
                raise UncoveredPredicateError(
                    f"base predicate {inner.atom.predicate} ({token}) attested by "
                    f"{principal!r} is not observed by it in the topology"
                )
