"""Offline replay audit of a persisted run directory.

The auditor needs only the artifacts a third party would hold: the log
replica files, the signed tree-head checkpoints, the key registry and the
rule specification.  It rebuilds every Merkle tree, re-verifies every
signature and inclusion proof, replays the committed events through a fresh
engine, re-derives all verdicts (including the hypothetical evaluations
behind rejected events) and compares them with the verdict events recorded
in the log.  Any discrepancy becomes a finding; an empty finding list means
the recorded run is fully reproducible from its own evidence.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .cryptoid import KeyRegistry, SignedEvent, verify_event
from .engine import AttestedFact, FactStore, evaluate
from .errors import LogDecodeError, UnknownPrincipalError
from .merklelog import AuditLog, TreeState, cross_audit, tree_head_bytes, verify_inclusion
from .monitor import (
    KIND_REJECTED,
    KIND_SHARED,
    KIND_VERDICT,
    SIGNATURE_PROPERTY,
    ProofSearch,
    extract_fact,
    justification_closure,
)
from .speclang import Atom, IntConst, StrConst, SymConst, ValidatedRuleSet, stratify
from .sim import split_justification_rules

@dataclass
class Finding:
    kind: str
    detail: str
    replica: int | None = None
    index: int | None = None

    def to_dict(self) -> dict:
        out = {"kind": self.kind, "detail": self.detail}
        if self.replica is not None:
            out["replica"] = self.replica
        if self.index is not None:
            out["index"] = self.index
        return out


@dataclass
class AuditReport:
    findings: list[Finding] = field(default_factory=list)
    stats: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return not self.findings

    def add(self, kind: str, detail: str, replica: int | None = None, index: int | None = None):
        self.findings.append(Finding(kind=kind, detail=detail, replica=replica, index=index))

    def to_dict(self) -> dict:
        return {
            "ok": self.ok,
            "findings": [f.to_dict() for f in self.findings],
            "stats": self.stats,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


class _ReplayFactIndex:
    """Committed-facts view over a replayed log prefix (for proof search)."""

    def __init__(self):
        self._by_pred: dict[str, list[tuple[int, AttestedFact]]] = {}

    def add(self, index: int, fact: AttestedFact) -> None:
        self._by_pred.setdefault(fact.atom.predicate, []).append((index, fact))

    def committed_facts_for(self, predicate: str) -> list[tuple[int, AttestedFact]]:
        return self._by_pred.get(predicate, [])


def _load_checkpoint(path: Path) -> tuple[TreeState, str, bytes]:
    data = json.loads(path.read_text(encoding="utf-8"))
    state = TreeState(size=int(data["size"]), root_hash=bytes.fromhex(data["root"]))
    return state, data["signer"], bytes.fromhex(data["signature"])


def audit_run(
    log_dir: str | Path,
    rules: ValidatedRuleSet,
    registry: KeyRegistry,
) -> AuditReport:
    """Replay a run directory; returns a report whose findings gate exit 0/1."""
    log_dir = Path(log_dir)
    report = AuditReport()

    replica_files = sorted(log_dir.glob("log_replica_*.adtl"))
    if not replica_files:
        report.add("missing_logs", f"no log_replica_*.adtl files under {log_dir}")
        return report

    monitors_meta: dict = {}
    meta_path = log_dir / "monitors.json"
    if meta_path.exists():
        monitors_meta = json.loads(meta_path.read_text(encoding="utf-8"))
    justification_goals: dict[str, str] = monitors_meta.get("justification_goals", {})
    violation_prefixes = tuple(monitors_meta.get("violation_prefixes", ["forbidden"]))

    # 1. Rebuild each replica and check it against its signed checkpoint.
    replicas: list[AuditLog | None] = []
    recorded_states: list[TreeState | None] = []
    for i, path in enumerate(replica_files):
        log: AuditLog | None = None
        try:
            log = AuditLog.from_bytes(path.read_bytes())
        except (LogDecodeError, OSError) as exc:
            report.add("decode_failure", f"{path.name}: {exc}", replica=i)
        replicas.append(log)

        state = None
        cp_path = log_dir / f"checkpoint_{i}.json"
        if not cp_path.exists():
            report.add("missing_checkpoint", cp_path.name, replica=i)
        else:
            try:
                state, signer, signature = _load_checkpoint(cp_path)
                head_event_ok = _verify_tree_head(registry, state, signer, signature)
                if not head_event_ok:
                    report.add("checkpoint_signature", f"bad signature on {cp_path.name}", replica=i)
            except (ValueError, KeyError, json.JSONDecodeError) as exc:
                report.add("checkpoint_malformed", f"{cp_path.name}: {exc}", replica=i)
                state = None
        recorded_states.append(state)

        if log is None or state is None:
            continue
        if log.size != state.size:
            report.add(
                "size_mismatch",
                f"replica {i}: file holds {log.size} records, checkpoint claims {state.size}",
                replica=i,
            )
            continue
        for index in range(log.size):
            path_proof = log.inclusion_proof(index)
            if not verify_inclusion(state, log.leaf_hash(index), path_proof):
                report.add(
                    "inclusion_failure",
                    f"replica {i} leaf {index} fails inclusion against recorded root",
                    replica=i,
                    index=index,
                )

    # 2. Cross-audit the recorded heads.
    known_states = [s for s in recorded_states if s is not None]
    if len(known_states) >= 2:
        for divergence in cross_audit(known_states):
            report.add(
                "divergence_" + divergence.kind,
                f"replicas {divergence.replicas}: {divergence.detail}",
            )

    # 3. Replay the reference replica.
    reference = next((log for log in replicas if log is not None), None)
    if reference is None:
        return report
    _replay(report, reference, rules, registry, justification_goals, violation_prefixes)
    report.stats.update(
        {
            "replicas": len(replica_files),
            "entries": reference.size,
        }
    )
    return report


def _verify_tree_head(
    registry: KeyRegistry, state: TreeState, signer: str, signature: bytes
) -> bool:
    from cryptography.exceptions import InvalidSignature
    from cryptography.hazmat.primitives.asymmetric import ed25519

    try:
        key = ed25519.Ed25519PublicKey.from_public_bytes(registry.public_key(signer))
    except UnknownPrincipalError:
        return False
    try:
        key.verify(signature, tree_head_bytes(state.size, state.root_hash))
        return True
    except InvalidSignature:
        return False


def _replay(
    report: AuditReport,
    log: AuditLog,
    rules: ValidatedRuleSet,
    registry: KeyRegistry,
    justification_goals: dict[str, str],
    violation_prefixes: tuple[str, ...],
) -> None:
    eval_rules, _ = split_justification_rules(rules, justification_goals)
    strata = stratify(eval_rules)
    justification_rules = (
        justification_closure(rules, set(justification_goals.values()))
        if justification_goals
        else None
    )

    entries: list[SignedEvent | None] = []
    for index in range(log.size):
        try:
            entries.append(log.entry(index))
        except LogDecodeError as exc:
            entries.append(None)
            report.add("entry_undecodable", str(exc), index=index)

    # Pass 1: rejection markers and recorded verdicts.
    rejected: dict[int, str] = {}
    recorded_verdicts: set[tuple] = set()
    for index, se in enumerate(entries):
        if se is None:
            continue
        if se.event.kind == KIND_REJECTED:
            args = se.event.payload.args
            if len(args) == 3 and isinstance(args[2], IntConst) and isinstance(args[1], SymConst):
                rejected[args[2].value] = args[1].name
            else:
                report.add("marker_malformed", f"bad rejection marker at {index}", index=index)
        elif se.event.kind == KIND_VERDICT:
            atom = se.event.payload
            recorded_verdicts.add((atom.predicate, atom.args, se.event.session_id))

    # Pass 2: ordered replay of component events.
    store = FactStore()
    store.register_predicates(eval_rules.ruleset.predicates())
    fact_index = _ReplayFactIndex()
    expected_verdicts: set[tuple] = set()
    shared_claims: list[tuple[int, AttestedFact]] = []

    def is_violation(predicate: str) -> bool:
        return predicate.startswith(violation_prefixes)

    def violation_keys(s: FactStore) -> set:
        return {f.key() for f in s.facts() if is_violation(f.atom.predicate)}

    def new_violations(s: FactStore, before: set) -> list[AttestedFact]:
        return [
            f
            for f in s.facts()
            if is_violation(f.atom.predicate) and f.key() not in before
        ]

    for index, se in enumerate(entries):
        if se is None:
            continue
        ev = se.event
        try:
            sig_ok = verify_event(registry, se) and se.signer == ev.sender
        except UnknownPrincipalError:
            sig_ok = False
        if ev.kind in (KIND_SHARED, KIND_VERDICT, KIND_REJECTED):
            # Monitor bookkeeping must always verify; a failure means the
            # log carries records no registered monitor produced.
            if not sig_ok:
                report.add(
                    "monitor_signature_invalid",
                    f"{ev.kind} entry {index} fails signature verification",
                    index=index,
                )
            elif ev.kind == KIND_SHARED:
                fact = extract_fact(se, index)
                if fact is not None:
                    shared_claims.append((index, fact))
            continue
        if not sig_ok:
            expected_verdicts.add(
                (SIGNATURE_PROPERTY, (IntConst(ev.session_id), StrConst(se.signer)), ev.session_id)
            )
            if index in rejected and rejected[index] != "sig_invalid":
                report.add(
                    "rejection_mismatch",
                    f"entry {index} has invalid signature but marker says {rejected[index]}",
                    index=index,
                )
            continue
        fact = extract_fact(se, index)
        if fact is None:
            continue
        reason = rejected.get(index)
        if reason is None:
            # Committed event: advance the running store.
            before = violation_keys(store)
            store.begin_revision(fact.revision)
            store.assert_fact(fact)
            evaluate(strata, store)
            for violation in new_violations(store, before):
                expected_verdicts.add(
                    (violation.atom.predicate, violation.atom.args, ev.session_id)
                )
            fact_index.add(index, fact)
            continue
        if reason == "sig_invalid":
            report.add(
                "rejection_mismatch",
                f"entry {index} marked sig_invalid but its signature verifies",
                index=index,
            )
        elif reason == "would_violate":
            hypothetical = store.clone()
            before = violation_keys(hypothetical)
            hypothetical.begin_revision(fact.revision)
            hypothetical.assert_fact(fact)
            evaluate(strata, hypothetical)
            violations = new_violations(hypothetical, before)
            if not violations:
                report.add(
                    "rejection_unsupported",
                    f"entry {index} marked would_violate but replay derives no violation",
                    index=index,
                )
            for violation in violations:
                expected_verdicts.add(
                    (violation.atom.predicate, violation.atom.args, ev.session_id)
                )
        elif reason == "no_justification":
            if justification_rules is None or ev.path not in justification_goals:
                report.add(
                    "rejection_unverifiable",
                    f"entry {index} marked no_justification but no goal is configured",
                    index=index,
                )
                continue
            goal = Atom(justification_goals[ev.path], (IntConst(ev.session_id),))
            search = ProofSearch(justification_rules, fact_index)
            found = next(search.prove(None, goal, {}, frozenset()), None)
            if found is not None:
                report.add(
                    "rejection_unsupported",
                    f"entry {index} marked no_justification but a proof of {goal} exists",
                    index=index,
                )
        else:
            report.add("marker_malformed", f"unknown rejection reason {reason!r}", index=index)

    # 3. Shipped derived facts must be re-derivable from the committed base.
    for index, fact in shared_claims:
        if not store.contains(fact.principal, fact.atom):
            report.add(
                "shared_fact_unsupported",
                f"shared fact at entry {index} is not derivable from committed events: {fact.atom}",
                index=index,
            )

    # 4. Re-derived verdicts must equal the recorded verdict events.
    for key in sorted(expected_verdicts - recorded_verdicts, key=repr):
        report.add("verdict_missing", f"replay derives unrecorded verdict {key[0]}{key[1]}")
    for key in sorted(recorded_verdicts - expected_verdicts, key=repr):
        report.add("verdict_unreproduced", f"recorded verdict {key[0]}{key[1]} not re-derivable")
    report.stats.update(
        {
            "verdicts_recorded": len(recorded_verdicts),
            "verdicts_rederived": len(expected_verdicts),
            "rejected_entries": len(rejected),
        }
    )
