from __future__ import annotations

import pytest
from hypothesis import given, settings, strategies as st

from auditmon.errors import (
    ArityError,
    NotStratifiableError,
    SpecSyntaxError,
    UnsafeRuleError,
)
from auditmon.speclang import (
    Atom,
    AttestedLit,
    IntConst,
    NegatedLit,
    PlainLit,
    Rule,
    RuleSet,
    StrConst,
    SymConst,
    Variable,
    check_safety,
    dependency_levels,
    parse_spec,
    stratify,
)

LISTING = r"""
'DO' attests ready_to_fly(Id,T,C) :-
    'DO' attests postRequest('\ready_to_fly',Id,T,C).

'SB' attests booking(Id,T,C)  :-
    'SB' attests postRequest('\booking_request',Id,T,C).

exists_booking_before(Id,End,C) :-
    'SB' attests booking(Id,T,C),
    'DO' attests ready_to_fly(Id,End,C2),
    T < End.

forbidden(Id):-
    not exists_booking_before(Id,T,C1),
    'DO' attests ready_to_fly(Id,T,C2).
"""


def test_parse_booking_rule_shape():
    text = r"'SB' attests booking(Id,T,C) :- 'SB' attests postRequest('\booking_request',Id,T,C)."
    rs = parse_spec(text)
    assert len(rs.rules) == 1 and len(rs.facts) == 0
    head = rs.rules[0].head
    assert isinstance(head, AttestedLit)
    assert head.principal == StrConst("SB")
    assert head.atom.predicate == "booking" and head.atom.arity == 3
    body = rs.rules[0].body[0]
    assert body.atom.args[0] == StrConst("\\booking_request")


def test_parse_empty_program():
    rs = parse_spec("")
    assert rs.rules == () and rs.facts == ()


def test_parse_dangling_comma_is_syntax_error():
    with pytest.raises(SpecSyntaxError) as err:
        parse_spec("p(X) :- q(X,).")
    assert err.value.line == 1


def test_parse_reports_line_and_column():
    with pytest.raises(SpecSyntaxError) as err:
        parse_spec("p(a).\nq(b) :- r(b), .\n")
    assert err.value.line == 2


def test_arity_mismatch_rejected():
    with pytest.raises(ArityError):
        parse_spec("p(a). p(a,b).")


def test_comments_and_strings_with_backslash():
    rs = parse_spec("% a comment\np('\\x', 'it\\'s').  % trailing\n")
    assert len(rs.facts) == 1
    assert rs.facts[0].atom.args[0] == StrConst("\\x")
    assert rs.facts[0].atom.args[1] == StrConst("it's")


def test_facts_parse_and_nonground_fact_rejected():
    rs = parse_spec("'SB' attests booking(1,2,'c').")
    assert len(rs.facts) == 1
    with pytest.raises(SpecSyntaxError):
        parse_spec("p(X).")


def test_negative_integers_and_sum_operands():
    rs = parse_spec("p(X) :- q(X), X > -3. r(Y) :- q(Y), Y + 2 < 10.")
    cmp1 = rs.rules[0].comparisons()[0]
    assert cmp1.rhs == IntConst(-3)
    cmp2 = rs.rules[1].comparisons()[0]
    assert cmp2.lhs.var == Variable("Y") and cmp2.lhs.offset == IntConst(2)


def test_listing_program_safety_marks_negation_local():
    vrs = check_safety(parse_spec(LISTING))
    forbidden = next(r for r in vrs.rules if r.head.atom.predicate == "forbidden")
    assert vrs.negation_local[forbidden.id] == frozenset({"C1"})


def test_unsafe_head_variable_only_under_negation():
    with pytest.raises(UnsafeRuleError) as err:
        check_safety(parse_spec("p(X) :- not q(X)."))
    assert err.value.variable == "X"


def test_unsafe_unbound_comparison_variable():
    with pytest.raises(UnsafeRuleError) as err:
        check_safety(parse_spec("p(X) :- q(X), Y < 3."))
    assert err.value.variable == "Y"


def test_stratify_listing_puts_negated_predicate_strictly_below():
    strata = stratify(check_safety(parse_spec(LISTING)))
    below = strata.predicate_stratum["exists_booking_before"]
    above = strata.predicate_stratum["forbidden"]
    assert below < above


def test_stratify_negation_free_program_single_stratum():
    strata = stratify(check_safety(parse_spec("p(X) :- q(X). q(a).")))
    assert len(strata.order) == 1


def test_not_stratifiable_negative_cycle():
    with pytest.raises(NotStratifiableError) as err:
        stratify(check_safety(parse_spec("p(X) :- q(X), not r(X). r(X) :- q(X), not p(X). q(a).")))
    assert set(err.value.cycle) >= {"p", "r"}


def test_stratification_invariant_holds_on_accepted_programs():
    vrs = check_safety(parse_spec(LISTING))
    strata = stratify(vrs)
    for rule in vrs.rules:
        head_stratum = strata.predicate_stratum[rule.head.atom.predicate]
        for lit in rule.positive_body():
            assert strata.predicate_stratum[lit.atom.predicate] <= head_stratum
        for neg in rule.negated_body():
            assert strata.predicate_stratum[neg.inner.atom.predicate] < head_stratum


def test_dependency_levels():
    levels = dependency_levels(parse_spec(LISTING))
    assert levels["postRequest"] == 0
    assert levels["booking"] == 1 and levels["ready_to_fly"] == 1
    assert levels["exists_booking_before"] == 2
    assert levels["forbidden"] == 3


def test_pretty_roundtrip_listing():
    rs = parse_spec(LISTING)
    assert parse_spec(rs.pretty()) == rs


# --- randomized round-trip ----------------------------------------------------

_var = st.sampled_from("XYZW").map(Variable)
_sym = st.sampled_from(["a", "b", "cde"]).map(SymConst)
_num = st.integers(min_value=-50, max_value=50).map(IntConst)
_txt = st.sampled_from(["hi", "\\path", "it's", ""]).map(StrConst)
_term = st.one_of(_var, _sym, _num, _txt)


@st.composite
def _atoms(draw):
    pred = draw(st.sampled_from(["p", "q", "rel"]))
    arity = {"p": 1, "q": 2, "rel": 3}[pred]
    return Atom(pred, tuple(draw(_term) for _ in range(arity)))


@st.composite
def _rules(draw, rule_id: int):
    body_atoms = draw(st.lists(_atoms(), min_size=1, max_size=3))
    body = []
    bound: set[str] = set()
    for atom in body_atoms:
        lit = PlainLit(atom)
        if draw(st.booleans()):
            lit = AttestedLit(StrConst(draw(st.sampled_from(["SB", "DO"]))), atom)
        body.append(lit)
        bound |= {a.name for a in atom.args if isinstance(a, Variable)}
    if bound and draw(st.booleans()):
        inner = PlainLit(Atom("p", (Variable(sorted(bound)[0]),)))
        body.append(NegatedLit(inner))
    head_args = tuple(
        Variable(draw(st.sampled_from(sorted(bound)))) if bound and draw(st.booleans()) else draw(_num)
        for _ in range(2)
    )
    return Rule(head=PlainLit(Atom("q", head_args)), body=tuple(body), id=rule_id)


@settings(max_examples=60, deadline=None)
@given(st.data())
def test_pretty_roundtrip_random_rulesets(data):
    n = data.draw(st.integers(min_value=1, max_value=4))
    rules = tuple(data.draw(_rules(i)) for i in range(n))
    rs = RuleSet(rules=rules)
    assert parse_spec(rs.pretty()) == rs
