"""Safety validation and stratification of parsed rule sets.

Safety: every head variable and every comparison variable must be bound by a
positive body literal.  Variables that occur only inside a single negated
literal are existentially quantified under negation-as-failure and are
recorded per rule as "negation-local".

Stratification: negated dependencies must cross strictly downward in stratum
order.  Stratum numbers are computed by longest-path over the condensed
dependency graph; predicates are listed within strata in first-occurrence
order so numbering is deterministic.
"""

from __future__ import annotations

from ..errors import NotStratifiableError, UnsafeRuleError
from .terms import (
    AttestedLit,
    NegatedLit,
    PlainLit,
    Rule,
    RuleSet,
    Strata,
    Sum,
    ValidatedRuleSet,
    Variable,
    literal_variables,
)


def _positive_variables(rule: Rule) -> set[str]:
    bound: set[str] = set()
    for lit in rule.positive_body():
        bound |= {v.name for v in literal_variables(lit)}
    return bound


def check_safety(rs: RuleSet) -> ValidatedRuleSet:
    """Validate every rule; returns the set annotated with negation-local variables."""
    negation_local: dict[int, frozenset[str]] = {}
    for rule in rs.rules:
        bound = _positive_variables(rule)
        for v in literal_variables(rule.head):
            if v.name not in bound:
                raise UnsafeRuleError(
                    v.name, rule.id, "head variable not bound by any positive body literal"
                )
        for cmp in rule.comparisons():
            for side in (cmp.lhs, cmp.rhs):
                if isinstance(side, Variable) and side.name not in bound:
                    raise UnsafeRuleError(
                        side.name, rule.id, "comparison variable not bound by a positive literal"
                    )
                if isinstance(side, Sum) and side.var.name not in bound:
                    raise UnsafeRuleError(
                        side.var.name, rule.id, "comparison variable not bound by a positive literal"
                    )
        local: set[str] = set()
        for neg in rule.negated_body():
            for v in literal_variables(neg):
                if v.name not in bound:
                    local.add(v.name)
        # A variable local to one negation must not appear in another literal;
        # sharing between two negations has no single-quantifier reading.
        for name in local:
            holders = [
                neg for neg in rule.negated_body() if name in {v.name for v in literal_variables(neg)}
            ]
            if len(holders) > 1:
                raise UnsafeRuleError(
                    name, rule.id, "variable shared between negated literals but never bound"
                )
        negation_local[rule.id] = frozenset(local)
    return ValidatedRuleSet(ruleset=rs, negation_local=negation_local)


def _dependency_edges(rs: RuleSet) -> dict[str, set[tuple[str, bool]]]:
    """head predicate -> {(body predicate, negated?)}."""
    edges: dict[str, set[tuple[str, bool]]] = {}
    for rule in rs.rules:
        head = rule.head.atom.predicate
        deps = edges.setdefault(head, set())
        for lit in rule.body:
            if isinstance(lit, (PlainLit, AttestedLit)):
                deps.add((lit.atom.predicate, False))
            elif isinstance(lit, NegatedLit):
                deps.add((lit.inner.atom.predicate, True))
    return edges


def stratify(vrs: ValidatedRuleSet) -> Strata:
    """Assign strata; raises NotStratifiableError on a negative cycle."""
    rs = vrs.ruleset
    predicates = rs.predicates()
    order_index = {p: i for i, p in enumerate(predicates)}
    edges = _dependency_edges(rs)

    stratum = {p: 0 for p in predicates}
    # Longest-path iteration; with n predicates, more than n * n updates
    # means a negative edge sits inside a cycle.
    changed = True
    passes = 0
    while changed:
        changed = False
        passes += 1
        if passes > len(predicates) + 1:
            raise NotStratifiableError(_find_negative_cycle(edges, predicates))
        for head in predicates:
            for dep, negated in edges.get(head, ()):
                need = stratum[dep] + (1 if negated else 0)
                if stratum[head] < need:
                    stratum[head] = need
                    changed = True

    levels = sorted(set(stratum.values()))
    remap = {lvl: i for i, lvl in enumerate(levels)}
    grouped: list[list[str]] = [[] for _ in levels]
    for p in sorted(predicates, key=lambda p: order_index[p]):
        grouped[remap[stratum[p]]].append(p)
    predicate_stratum = {p: remap[stratum[p]] for p in predicates}
    rule_stratum = {r.id: predicate_stratum[r.head.atom.predicate] for r in rs.rules}
    return Strata(
        order=tuple(tuple(g) for g in grouped),
        rule_stratum=rule_stratum,
        predicate_stratum=predicate_stratum,
        ruleset=vrs,
    )


def _find_negative_cycle(
    edges: dict[str, set[tuple[str, bool]]], predicates: list[str]
) -> list[str]:
    """Locate one cycle containing a negative edge, for the diagnostic."""
    # Reverse view: from head we can reach its dependencies.
    for start in predicates:
        for dep, negated in sorted(edges.get(start, ())):
            if not negated:
                continue
            # Path from dep back to start => cycle through the negative edge.
            path = _find_path(edges, dep, start)
            if path is not None:
                return [start, *path]
    return predicates  # fallback; should not happen


def _find_path(
    edges: dict[str, set[tuple[str, bool]]], src: str, dst: str
) -> list[str] | None:
    seen = {src}
    stack = [(src, [src])]
    while stack:
        node, path = stack.pop()
        if node == dst:
            return path
        for dep, _ in sorted(edges.get(node, ())):
            if dep not in seen:
                seen.add(dep)
                stack.append((dep, path + [dep]))
    return None


def dependency_levels(rs: RuleSet) -> dict[str, int]:
    """Derivation depth per predicate: base = 0, head = 1 + max body level.

    Predicates in a dependency cycle share the level of their strongly
    connected component.  Used by the partitioner to pick trigger literals.
    """
    predicates = rs.predicates()
    edges = _dependency_edges(rs)
    sccs = _condense(predicates, edges)
    comp_of: dict[str, int] = {}
    for i, comp in enumerate(sccs):
        for p in comp:
            comp_of[p] = i
    comp_level = [0] * len(sccs)
    # Tarjan emits dependency components first, so an ascending walk sees
    # every body predicate's level before the head that uses it.
    for i in range(len(sccs)):
        comp = sccs[i]
        defined = any(p in edges for p in comp)
        if not defined:
            comp_level[i] = 0
            continue
        level = 1
        for p in comp:
            for dep, _ in edges.get(p, ()):
                j = comp_of[dep]
                if j != i:
                    level = max(level, comp_level[j] + 1)
        comp_level[i] = level
    return {p: comp_level[comp_of[p]] for p in predicates}


def _condense(
    predicates: list[str], edges: dict[str, set[tuple[str, bool]]]
) -> list[list[str]]:
    """Tarjan SCC over the dependency graph (head -> body edges)."""
    index: dict[str, int] = {}
    low: dict[str, int] = {}
    on_stack: set[str] = set()
    stack: list[str] = []
    out: list[list[str]] = []
    counter = [0]

    def strongconnect(v: str) -> None:
        index[v] = low[v] = counter[0]
        counter[0] += 1
        stack.append(v)
        on_stack.add(v)
        for w, _ in sorted(edges.get(v, ())):
            if w not in index:
                strongconnect(w)
                low[v] = min(low[v], low[w])
            elif w in on_stack:
                low[v] = min(low[v], index[w])
        if low[v] == index[v]:
            comp = []
            while True:
                w = stack.pop()
                on_stack.discard(w)
                comp.append(w)
                if w == v:
                    break
            out.append(comp)

    for p in predicates:
        if p not in index:
            strongconnect(p)
    return out
