from __future__ import annotations

import dataclasses

import pytest

from auditmon.cryptoid import SignedEvent, canonical_bytes, sign_event, verify_event
from auditmon.errors import MonitorConfigError, NoJustificationError
from auditmon.monitor import (
    Accept,
    CommonLog,
    FactLeaf,
    Flag,
    Monitor,
    MonitorConfig,
    NoJustification,
    Reject,
    RuleNode,
    SignatureInvalid,
    WouldViolate,
    justification_closure,
    verify_proof_tree,
)
from auditmon.sim import (
    LamportClock,
    Scenario,
    UAV_PRINCIPALS,
    build_registry,
    make_post_event,
    split_justification_rules,
)
from auditmon.speclang import IntConst, check_safety, parse_atom, parse_spec, stratify


@pytest.fixture()
def rig(uav_rules, uav_goals):
    scenario = Scenario(name="rig", seed=99, principals=UAV_PRINCIPALS, script=())
    registry, keys = build_registry(scenario)
    log = CommonLog()

    def monitor(mode: str) -> Monitor:
        eval_rules, _ = split_justification_rules(uav_rules, uav_goals)
        config = MonitorConfig(
            principal=None,
            mode=mode,
            rules=eval_rules,
            strata=stratify(eval_rules),
            justification_goals=dict(uav_goals),
            justification_rules=justification_closure(uav_rules, set(uav_goals.values())),
        )
        return Monitor(config, log, registry, keys["monitor:global"], LamportClock())

    return {"registry": registry, "keys": keys, "log": log, "monitor": monitor}


def _signed(rig, sender, receiver, path, session, content, ts):
    event = make_post_event(sender, receiver, path, session, content, ts)
    return sign_event(rig["keys"][sender], event)


def _run_booking_flow(rig, monitor, session=7):
    for se in [
        _signed(rig, "User", "SB", "/booking_request", session, "organ", 1),
        _signed(rig, "User", "MRM", "/select_booking", session, "uav-12", 3),
    ]:
        assert isinstance(monitor.observe(se), Accept)


def test_vtt_rejects_unjustified_violating_rtf(rig):
    monitor = rig["monitor"]("vtt")
    rtf = _signed(rig, "MRM", "DO", "/ready_to_fly", 7, "uav-99", 5)
    outcome = monitor.observe(rtf)
    assert isinstance(outcome, Reject)
    assert isinstance(outcome.reason, WouldViolate)
    verdicts = outcome.reason.verdicts
    assert [str(v.atom) for v in verdicts] == ["forbidden(7)"]
    # the rejected event is still logged, followed by markers
    assert rig["log"].size >= 2


def test_ttv_flags_same_event_and_logs_it(rig):
    monitor = rig["monitor"]("ttv")
    rtf = _signed(rig, "MRM", "DO", "/ready_to_fly", 7, "uav-99", 5)
    outcome = monitor.observe(rtf)
    assert isinstance(outcome, Flag)
    assert [str(v.atom) for v in outcome.verdicts] == ["forbidden(7)"]
    assert rig["log"].entry(0).event.path == "/ready_to_fly"


def test_nominal_rtf_accepted_in_both_modes(rig, uav_rules):
    for mode in ("ttv", "vtt"):
        monitor = rig["monitor"](mode)
        _run_booking_flow(rig, monitor)
        rtf = _signed(rig, "MRM", "DO", "/ready_to_fly", 7, "uav-12", 9)
        assert isinstance(monitor.observe(rtf), Accept)


def test_badly_signed_event_never_accepted(rig):
    ttv = rig["monitor"]("ttv")
    rtf = _signed(rig, "MRM", "DO", "/ready_to_fly", 7, "x", 5)
    broken = SignedEvent(
        event=rtf.event, signer=rtf.signer, signature=bytes(len(rtf.signature))
    )
    outcome = ttv.observe(broken)
    assert isinstance(outcome, Flag)
    assert outcome.verdicts[0].property == "signature_invalid"

    vtt = rig["monitor"]("vtt")
    outcome = vtt.observe(broken)
    assert isinstance(outcome, Reject) and isinstance(outcome.reason, SignatureInvalid)


def test_signer_must_match_sender(rig):
    monitor = rig["monitor"]("vtt")
    event = make_post_event("MRM", "DO", "/ready_to_fly", 7, "x", 5)
    # validly signed by SB, but SB is not the sender
    cross_signed = SignedEvent(
        event=event,
        signer="SB",
        signature=rig["keys"]["SB"].sign(canonical_bytes(event)),
    )
    outcome = monitor.observe(cross_signed)
    assert isinstance(outcome, Reject) and isinstance(outcome.reason, SignatureInvalid)


def test_vtt_no_justification_when_selection_missing(rig):
    monitor = rig["monitor"]("vtt")
    booking = _signed(rig, "User", "SB", "/booking_request", 7, "organ", 1)
    assert isinstance(monitor.observe(booking), Accept)
    rtf = _signed(rig, "MRM", "DO", "/ready_to_fly", 7, "uav-12", 9)
    outcome = monitor.observe(rtf)
    assert isinstance(outcome, Reject)
    assert isinstance(outcome.reason, NoJustification)


def test_justify_builds_three_level_tree_with_two_leaves(rig):
    monitor = rig["monitor"]("ttv")
    _run_booking_flow(rig, monitor)
    tree = monitor.justify(make_post_event("MRM", "DO", "/ready_to_fly", 7, "uav-12", 9))
    root = tree.root
    assert isinstance(root, RuleNode)
    assert isinstance(root.children[0], RuleNode)  # booking derived from the request
    assert isinstance(root.children[0].children[0], FactLeaf)
    assert isinstance(root.children[1], FactLeaf)  # the selection event
    assert len(list(tree.leaves())) == 2

    result = verify_proof_tree(monitor.config.justification_rules, rig["registry"], tree.state, tree)
    assert bool(result), result.reason


def test_justify_empty_log_raises(rig):
    monitor = rig["monitor"]("ttv")
    with pytest.raises(NoJustificationError):
        monitor.justify(make_post_event("MRM", "DO", "/ready_to_fly", 9, "x", 2))


def test_justify_prefers_lower_log_index(rig):
    monitor = rig["monitor"]("ttv")
    # two alternative bookings and selections for the same session
    for se in [
        _signed(rig, "User", "SB", "/booking_request", 7, "first", 1),
        _signed(rig, "User", "SB", "/booking_request", 7, "second", 2),
        _signed(rig, "User", "MRM", "/select_booking", 7, "uav-12", 4),
    ]:
        monitor.observe(se)
    tree = monitor.justify(make_post_event("MRM", "DO", "/ready_to_fly", 7, "uav-12", 9))
    booking_leaf = tree.root.children[0].children[0]
    assert booking_leaf.log_index == 0  # the first logged alternative wins


def test_justify_deterministic(rig):
    monitor = rig["monitor"]("ttv")
    _run_booking_flow(rig, monitor)
    event = make_post_event("MRM", "DO", "/ready_to_fly", 7, "uav-12", 9)
    assert monitor.justify(event) == monitor.justify(event)


def test_verify_proof_tree_rejects_swapped_leaf_index(rig, uav_rules):
    monitor = rig["monitor"]("ttv")
    _run_booking_flow(rig, monitor)
    tree = monitor.justify(make_post_event("MRM", "DO", "/ready_to_fly", 7, "uav-12", 9))
    leaf = tree.root.children[1]
    swapped = dataclasses.replace(
        leaf, log_index=0, path=rig["log"].primary.inclusion_proof(0)
    )
    bad_root = dataclasses.replace(tree.root, children=(tree.root.children[0], swapped))
    bad_tree = dataclasses.replace(tree, root=bad_root)
    result = verify_proof_tree(monitor.config.justification_rules, rig["registry"], tree.state, bad_tree)
    assert not result


def test_verify_proof_tree_rejects_bad_substitution(rig):
    monitor = rig["monitor"]("ttv")
    _run_booking_flow(rig, monitor)
    tree = monitor.justify(make_post_event("MRM", "DO", "/ready_to_fly", 7, "uav-12", 9))
    # corrupt the root substitution: claim the goal holds for session 8
    bad_subst = tuple(
        (name, IntConst(8)) if name == "Id" else (name, value)
        for name, value in tree.root.subst
    )
    bad_tree = dataclasses.replace(
        tree, root=dataclasses.replace(tree.root, subst=bad_subst)
    )
    result = verify_proof_tree(monitor.config.justification_rules, rig["registry"], tree.state, bad_tree)
    assert not result and result.reason in ("rule_head_mismatch", "leaf_conclusion_mismatch")


def test_emit_verdict_protects_fact_and_is_idempotent(rig):
    monitor = rig["monitor"]("ttv")
    rtf = _signed(rig, "MRM", "DO", "/ready_to_fly", 7, "uav-99", 5)
    outcome = monitor.observe(rtf)
    verdict = outcome.verdicts[0]
    size_before = rig["log"].size
    monitor.emit_verdict(verdict)  # duplicate emission
    assert rig["log"].size == size_before + 1
    # compaction at a later session boundary keeps the verdict fact
    monitor.store.begin_revision(9)
    monitor.compact(9)
    assert monitor.store.query(parse_atom("forbidden(Id)")) == [{"Id": IntConst(7)}]


def test_verdict_event_verifies_under_monitor_key(rig):
    monitor = rig["monitor"]("ttv")
    rtf = _signed(rig, "MRM", "DO", "/ready_to_fly", 7, "uav-99", 5)
    monitor.observe(rtf)
    verdict_entries = [
        rig["log"].entry(i)
        for i in range(rig["log"].size)
        if rig["log"].entry(i).event.kind == "verdict"
    ]
    assert verdict_entries
    assert all(verify_event(rig["registry"], se) for se in verdict_entries)
    assert all(se.signer == "monitor:global" for se in verdict_entries)


def test_config_rejects_negated_justification_rules(uav_goals):
    rules = check_safety(
        parse_spec("rtf_justified(Id) :- 'SB' attests b(Id), not q(Id). q(1). 'SB' attests b(1).")
    )
    with pytest.raises(MonitorConfigError):
        MonitorConfig(
            principal=None,
            mode="ttv",
            rules=rules,
            strata=stratify(rules),
            justification_goals={"/x": "rtf_justified"},
        )


def test_monitor_requires_matching_key(rig, uav_rules, uav_goals):
    eval_rules, _ = split_justification_rules(uav_rules, uav_goals)
    config = MonitorConfig(
        principal="DO",
        mode="ttv",
        rules=eval_rules,
        strata=stratify(eval_rules),
    )
    with pytest.raises(MonitorConfigError):
        Monitor(config, rig["log"], rig["registry"], rig["keys"]["SB"], LamportClock())
