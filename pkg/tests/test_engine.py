from __future__ import annotations

import random

import pytest

from auditmon.engine import AttestedFact, EvalStats, FactStore, evaluate
from auditmon.errors import (
    ArithmeticOverflowError,
    NonGroundFactError,
    RevisionRegressionError,
    UnknownPredicateError,
)
from auditmon.speclang import (
    Atom,
    IntConst,
    StrConst,
    SymConst,
    Variable,
    check_safety,
    parse_atom,
    parse_spec,
    stratify,
)

from oracle import naive_fixpoint, random_program

LISTING = r"""
'DO' attests ready_to_fly(Id,T,C) :- 'DO' attests postRequest('\ready_to_fly',Id,T,C).
'SB' attests booking(Id,T,C) :- 'SB' attests postRequest('\booking_request',Id,T,C).
exists_booking_before(Id,End,C) :- 'SB' attests booking(Id,T,C), 'DO' attests ready_to_fly(Id,End,C2), T < End.
forbidden(Id) :- not exists_booking_before(Id,T,C1), 'DO' attests ready_to_fly(Id,T,C2).
"""


def listing_strata():
    return stratify(check_safety(parse_spec(LISTING)))


def fact(principal, text, revision=0, source=None, derived=None):
    if derived is None:
        derived = source is None
    return AttestedFact(
        principal=principal,
        atom=parse_atom(text),
        revision=revision,
        source=source,
        derived=derived,
    )


def test_assert_fact_idempotent():
    store = FactStore()
    store.assert_fact(fact("SB", "booking(1,5,'c')"))
    store.assert_fact(fact("SB", "booking(1,5,'c')"))
    assert len(store) == 1


def test_assert_fact_rejects_variables():
    with pytest.raises(NonGroundFactError):
        AttestedFact(principal="SB", atom=Atom("p", (Variable("X"),)), revision=0, derived=True)


def test_assert_fact_revision_bound():
    store = FactStore()  # revision 0
    with pytest.raises(RevisionRegressionError):
        store.assert_fact(fact("SB", "booking(1,5,'c')", revision=3))
    store.assert_fact(fact("SB", "booking(1,5,'c')", revision=1))
    assert store.current_revision == 1


def test_base_fact_requires_source():
    with pytest.raises(ValueError):
        AttestedFact(principal="SB", atom=parse_atom("p(1)"), revision=0, derived=False)


def test_evaluate_derives_booking_from_post_request():
    store = FactStore()
    store.assert_fact(fact("SB", "postRequest('\\booking_request',1,5,'c')", source=0, derived=False))
    evaluate(listing_strata(), store)
    assert store.query(parse_atom("booking(Id,T,C)"), principal="SB") == [
        {"Id": IntConst(1), "T": IntConst(5), "C": StrConst("c")}
    ]
    derived = store.facts_for("booking")[0]
    assert derived.derived and derived.principal == "SB"


def test_evaluate_forbidden_without_booking():
    store = FactStore()
    store.assert_fact(fact("DO", "ready_to_fly(7,10,'x')"))
    evaluate(listing_strata(), store)
    assert store.query(parse_atom("forbidden(Id)")) == [{"Id": IntConst(7)}]


def test_evaluate_no_forbidden_with_prior_booking():
    store = FactStore()
    store.assert_fact(fact("SB", "booking(7,5,'c')"))
    store.assert_fact(fact("DO", "ready_to_fly(7,10,'x')"))
    evaluate(listing_strata(), store)
    assert store.query(parse_atom("forbidden(Id)")) == []
    assert store.contains(None, parse_atom("exists_booking_before(7,10,'c')"))


def test_comparison_overflow_raises():
    strata = stratify(check_safety(parse_spec("huge(X) :- p(X), X + 1 > 0. p(9223372036854775807).")))
    store = FactStore()
    from auditmon.engine import assert_spec_facts

    assert_spec_facts(store, strata.ruleset)
    with pytest.raises(ArithmeticOverflowError):
        evaluate(strata, store)


def test_query_unknown_predicate():
    store = FactStore()
    with pytest.raises(UnknownPredicateError):
        store.query(parse_atom("nothing(X)"))


def test_query_ground_goal_present_yields_empty_substitution():
    store = FactStore()
    store.assert_fact(fact("SB", "booking(1,5,'c')"))
    assert store.query(parse_atom("booking(1,5,'c')")) == [{}]


def test_compact_drops_old_revisions():
    store = FactStore()
    store.assert_fact(fact("SB", "booking(1,1,'a')", revision=1))
    store.assert_fact(fact("SB", "booking(2,2,'b')", revision=2))
    store.compact_revisions(2)
    assert not store.contains("SB", parse_atom("booking(1,1,'a')"))
    assert store.contains("SB", parse_atom("booking(2,2,'b')"))


def test_compact_keeps_protected_predicates():
    store = FactStore()
    store.assert_fact(fact(None, "forbidden(7)", revision=1))
    store.assert_fact(fact("SB", "booking(1,1,'a')", revision=1))
    store.current_revision = 2
    store.compact_revisions(2)
    assert store.contains(None, parse_atom("forbidden(7)"))
    assert not store.contains("SB", parse_atom("booking(1,1,'a')"))


def test_compact_zero_is_identity():
    store = FactStore()
    store.assert_fact(fact("SB", "booking(1,1,'a')", revision=1))
    before = len(store)
    store.compact_revisions(0)
    assert len(store) == before


def test_compact_clamps_beyond_current_revision():
    store = FactStore()
    store.assert_fact(fact("SB", "booking(1,1,'a')", revision=1))
    store.compact_revisions(99)
    assert store.contains("SB", parse_atom("booking(1,1,'a')"))


def test_dump_format():
    store = FactStore()
    store.begin_revision(1)
    store.assert_fact(fact("SB", "booking(1,5,'c')", revision=2, source=4, derived=False))
    store.assert_fact(fact(None, "forbidden(1)", revision=2))
    dump = store.dump()
    assert "'SB' attests booking(1, 5, 'c'). % rev=2 src=4" in dump
    assert "forbidden(1). % rev=2 src=-" in dump


def _to_store(base_facts):
    store = FactStore()
    for principal, atom in sorted(base_facts, key=repr):
        store.assert_fact(
            AttestedFact(principal=principal, atom=atom, revision=0, source=0, derived=False)
        )
    return store


def _model(store):
    return {(f.principal, f.atom) for f in store.facts()}


def test_oracle_equivalence_randomized():
    rng = random.Random(12021)
    for _ in range(60):
        rules, base = random_program(rng)
        strata = stratify(check_safety(rules))
        store = _to_store(base)
        evaluate(strata, store)
        assert _model(store) == naive_fixpoint(rules, base)


def test_order_independence_and_monotonicity():
    rng = random.Random(555)
    for _ in range(20):
        rules, base = random_program(rng)
        strata = stratify(check_safety(rules))
        ordered = sorted(base, key=repr)
        store_a = _to_store(ordered)
        evaluate(strata, store_a)
        store_b = _to_store(list(reversed(ordered)))
        evaluate(strata, store_b)
        assert _model(store_a) == _model(store_b)


def test_monotonic_within_stratum():
    strata = stratify(check_safety(parse_spec("d(X) :- 'P1' attests b(X). e(X) :- d(X).")))
    store = FactStore()
    store.assert_fact(fact("P1", "b(1)"))
    evaluate(strata, store)
    first = _model(store)
    store.assert_fact(fact("P1", "b(2)"))
    evaluate(strata, store)
    assert first <= _model(store)


def test_eval_stats_counters():
    store = FactStore()
    store.assert_fact(fact("SB", "postRequest('\\booking_request',1,5,'c')"))
    stats = EvalStats()
    evaluate(listing_strata(), store, stats=stats)
    assert stats.rule_firings >= 1
    assert stats.fixpoint_iterations >= 1
