"""Independent oracles for engine testing.

`naive_fixpoint` recomputes the stratified model by brute force: every rule
is re-ground against the full fact list each round until nothing changes.
No deltas, no indexes, and its own comparison evaluator, so it shares no
evaluation machinery with the semi-naive engine it is checking.

`random_program` generates small stratified, safe programs plus ground base
facts for oracle-equivalence and partition-transparency tests.
"""

from __future__ import annotations

import random
from itertools import product

from auditmon.speclang import (
    Atom,
    AttestedLit,
    ComparisonLit,
    IntConst,
    NegatedLit,
    PlainLit,
    Rule,
    RuleSet,
    StrConst,
    Sum,
    SymConst,
    Variable,
    check_safety,
)

Fact = tuple[str | None, Atom]  # (attesting principal, ground atom)


def _match(lit, fact: Fact, env: dict):
    """Extend env so the positive literal matches the fact, or None."""
    principal, atom = fact
    if isinstance(lit, AttestedLit):
        if principal is None:
            return None
        env = dict(env)
        p = lit.principal
        if isinstance(p, StrConst):
            if p.value != principal:
                return None
        else:  # variable principal
            bound = env.get(p.name)
            if bound is None:
                env[p.name] = StrConst(principal)
            elif bound != StrConst(principal):
                return None
        inner = lit.atom
    else:
        if principal is not None:
            return None
        env = dict(env)
        inner = lit.atom
    if inner.predicate != atom.predicate or inner.arity != atom.arity:
        return None
    for pattern, value in zip(inner.args, atom.args):
        if isinstance(pattern, Variable):
            bound = env.get(pattern.name)
            if bound is None:
                env[pattern.name] = value
            elif bound != value:
                return None
        elif pattern != value:
            return None
    return env


def _cmp_value(term, env):
    if isinstance(term, Variable):
        return env.get(term.name)
    if isinstance(term, Sum):
        base = env.get(term.var.name)
        if not isinstance(base, IntConst):
            return None
        return IntConst(base.value + term.offset.value)
    return term


def _cmp_holds(cmp: ComparisonLit, env: dict) -> bool:
    lhs, rhs = _cmp_value(cmp.lhs, env), _cmp_value(cmp.rhs, env)
    if lhs is None or rhs is None:
        return False
    if cmp.op == "=":
        return lhs == rhs
    if cmp.op == "!=":
        return lhs != rhs
    for kind in (IntConst, StrConst, SymConst):
        if isinstance(lhs, kind) and isinstance(rhs, kind):
            a = lhs.value if hasattr(lhs, "value") else lhs.name
            b = rhs.value if hasattr(rhs, "value") else rhs.name
            return {"<": a < b, "<=": a <= b, ">": a > b, ">=": a >= b}[cmp.op]
    return False


def _neg_holds(neg: NegatedLit, env: dict, facts: list[Fact]) -> bool:
    for fact in facts:
        if _match(neg.inner, fact, env) is not None:
            return False
    return True


def _ground_head(rule: Rule, env: dict) -> Fact:
    head = rule.head
    args = tuple(env[a.name] if isinstance(a, Variable) else a for a in head.atom.args)
    atom = Atom(head.atom.predicate, args)
    if isinstance(head, AttestedLit):
        p = head.principal
        value = env[p.name] if isinstance(p, Variable) else p
        return (value.value, atom)
    return (None, atom)


def _rule_instances(rule: Rule, facts: list[Fact]):
    positives = rule.positive_body()
    envs = [dict()]
    for lit in positives:
        envs = [
            extended
            for env in envs
            for fact in facts
            if (extended := _match(lit, fact, env)) is not None
        ]
    for env in envs:
        if all(_cmp_holds(c, env) for c in rule.comparisons()) and all(
            _neg_holds(n, env, facts) for n in rule.negated_body()
        ):
            yield env


def _own_strata(rs: RuleSet) -> list[list[Rule]]:
    """Order rules into strata by a plain iterative level assignment."""
    level: dict[str, int] = {p: 0 for p in rs.predicates()}
    for _ in range(len(level) + 1):
        for rule in rs.rules:
            head = rule.head.atom.predicate
            for lit in rule.body:
                if isinstance(lit, NegatedLit):
                    need = level[lit.inner.atom.predicate] + 1
                elif isinstance(lit, (PlainLit, AttestedLit)):
                    need = level[lit.atom.predicate]
                else:
                    continue
                level[head] = max(level[head], need)
    buckets: dict[int, list[Rule]] = {}
    for rule in rs.rules:
        buckets.setdefault(level[rule.head.atom.predicate], []).append(rule)
    return [buckets[k] for k in sorted(buckets)]


def naive_fixpoint(rs: RuleSet, base_facts: set[Fact]) -> set[Fact]:
    """Full stratified model of the program over the given ground facts."""
    facts = set(base_facts)
    for stratum_rules in _own_strata(rs):
        changed = True
        while changed:
            changed = False
            snapshot = sorted(facts, key=repr)
            for rule in stratum_rules:
                for env in _rule_instances(rule, snapshot):
                    fact = _ground_head(rule, env)
                    if fact not in facts:
                        facts.add(fact)
                        changed = True
    return facts


# --- random stratified programs ------------------------------------------------


PRINCIPALS = ("P1", "P2", "P3")


def random_program(
    rng: random.Random,
    max_rules: int = 5,
    max_facts: int = 20,
    violation_head: bool = False,
) -> tuple[RuleSet, set[Fact]]:
    """A safe, stratified program plus random ground base facts.

    Base predicates are attested (b0, b1 by fixed principals); derived
    predicates are plain.  When `violation_head` is set the topmost derived
    predicate is named like a violation property.
    """
    base = [("b0", rng.choice(PRINCIPALS), rng.randint(1, 2)),
            ("b1", rng.choice(PRINCIPALS), rng.randint(1, 2))]
    n_derived = rng.randint(1, 3)
    derived = [f"d{i}" for i in range(n_derived)]
    if violation_head:
        derived[-1] = "forbidden_r"
    arity = {name: ar for name, _, ar in base}
    for name in derived:
        arity[name] = rng.randint(1, 2)
    attester = {name: p for name, p, _ in base}

    def literal_for(pred: str, vars_pool: list[Variable]):
        args = tuple(rng.choice(vars_pool) for _ in range(arity[pred]))
        atom = Atom(pred, args)
        if pred in attester:
            return AttestedLit(StrConst(attester[pred]), atom)
        return PlainLit(atom)

    rules: list[Rule] = []
    n_rules = rng.randint(1, max_rules)
    for rule_index in range(n_rules):
        level = rng.randrange(n_derived)
        head_pred = derived[level]
        vars_pool = [Variable(v) for v in ("X", "Y", "Z")[: rng.randint(1, 3)]]
        n_pos = rng.randint(1, 2)
        lower = [p for p, _, _ in base] + derived[:level]
        same = lower + [derived[level]] if rng.random() < 0.3 else lower
        body: list = [literal_for(rng.choice(same), vars_pool) for _ in range(n_pos)]
        bound = set()
        for lit in body:
            bound |= {a.name for a in lit.atom.args if isinstance(a, Variable)}
        bound_vars = [Variable(v) for v in sorted(bound)]
        if not bound_vars:
            continue
        # optional comparison over a bound variable
        if rng.random() < 0.4:
            v = rng.choice(bound_vars)
            if rng.random() < 0.5:
                body.append(ComparisonLit(v, rng.choice(("<", "<=", ">", ">=")), IntConst(rng.randint(0, 3))))
            else:
                body.append(
                    ComparisonLit(Sum(v, IntConst(rng.randint(0, 2))), rng.choice(("<", ">")), IntConst(rng.randint(0, 5)))
                )
        # optional stratified negation over strictly lower predicates
        if level > 0 and rng.random() < 0.5:
            neg_pred = rng.choice([p for p, _, _ in base] + derived[:level])
            pool = bound_vars + ([Variable("W")] if rng.random() < 0.4 else [])
            args = tuple(rng.choice(pool) for _ in range(arity[neg_pred]))
            inner_atom = Atom(neg_pred, args)
            if neg_pred in attester:
                body.append(NegatedLit(AttestedLit(StrConst(attester[neg_pred]), inner_atom)))
            else:
                body.append(NegatedLit(PlainLit(inner_atom)))
        head_args = tuple(rng.choice(bound_vars) for _ in range(arity[head_pred]))
        rules.append(Rule(head=PlainLit(Atom(head_pred, head_args)), body=tuple(body), id=len(rules)))

    if not rules:
        rules.append(
            Rule(
                head=PlainLit(Atom(derived[0], tuple(Variable("X") for _ in range(arity[derived[0]])))),
                body=(literal_for("b0", [Variable("X")]),),
                id=0,
            )
        )

    ruleset = check_safety(RuleSet(rules=tuple(rules))).ruleset

    facts: set[Fact] = set()
    for _ in range(rng.randint(0, max_facts)):
        pred, principal, ar = rng.choice(base)
        args = tuple(
            rng.choice((IntConst(rng.randint(0, 3)), SymConst(rng.choice("ab"))))
            for _ in range(ar)
        )
        facts.add((principal, Atom(pred, args)))
    return ruleset, facts
