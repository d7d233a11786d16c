"""Per-component monitors over a replicated common log.

A monitor intercepts the signed events addressed to its component, appends
them to the common log, turns them into attested facts, evaluates its rule
subset and reports property violations as verdicts.  Two modes:

* trust-then-verify ("ttv") — log first, evaluate after, never block; new
  violations are flagged.
* verify-then-trust ("vtt") — evaluate a hypothetical store including the
  new event and search for a justification before delivery; events that
  would violate a property, lack justification, or carry a bad signature
  are rejected (still logged, marked rejected, so audits see the attempt).

Verdicts carry proof trees whose leaves are logged signed facts with Merkle
inclusion paths, so a third party can re-check them with nothing but the
rule set, the key registry and the log head.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import Iterator, Union

from .cryptoid import (
    Event,
    KeyRegistry,
    SignedEvent,
    SigningKey,
    sign_event,
    signed_event_bytes,
    verify_event,
)
from .engine import (
    AttestedFact,
    FactStore,
    Subst,
    eval_comparison,
    evaluate,
    resolve_term,
)
from .errors import (
    MissingInclusionProofError,
    MonitorConfigError,
    NoJustificationError,
    UnknownPrincipalError,
)
from .merklelog import AuditLog, Divergence, MerkleAuditPath, TreeState, cross_audit, verify_inclusion
from .speclang import (
    Atom,
    AttestedLit,
    ComparisonLit,
    IntConst,
    PlainLit,
    RuleSet,
    Strata,
    StrConst,
    Sum,
    SymConst,
    Term,
    ValidatedRuleSet,
    Variable,
    check_safety,
    literal_variables,
)

TRUST_THEN_VERIFY = "ttv"
VERIFY_THEN_TRUST = "vtt"

KIND_POST = "postRequest"
KIND_SHARED = "sharedFact"
KIND_VERDICT = "verdict"
KIND_REJECTED = "rejected"

MONITOR_PREFIX = "monitor:"
AUDITOR = "auditor"

SIGNATURE_PROPERTY = "signature_invalid"

WALL_BASE_MS = 1_700_000_000_000


def wall_time(lamport_ts: int) -> int:
    """Deterministic simulated wall clock, 250 ms per Lamport tick."""
    return WALL_BASE_MS + lamport_ts * 250


def path_constant(path: str) -> str:
    r"""Spec-side constant for an HTTP-ish path: /ready_to_fly -> \ready_to_fly."""
    return "\\" + path.lstrip("/")


# --- run metrics -------------------------------------------------------------


@dataclass
class Metrics:
    """Monotonic instrumentation counters for one run."""

    events_processed: int = 0
    events_rejected: int = 0
    rule_firings: int = 0
    fixpoint_iterations: int = 0
    hash_computations: int = 0
    signature_verifications: int = 0
    bytes_appended: int = 0
    blocking_ticks: list[int] = field(default_factory=list)

    @property
    def mean_blocking_ticks(self) -> float:
        if not self.blocking_ticks:
            return 0.0
        return sum(self.blocking_ticks) / len(self.blocking_ticks)

    def to_dict(self) -> dict:
        return {
            "events_processed": self.events_processed,
            "events_rejected": self.events_rejected,
            "rule_firings": self.rule_firings,
            "fixpoint_iterations": self.fixpoint_iterations,
            "hash_computations": self.hash_computations,
            "signature_verifications": self.signature_verifications,
            "bytes_appended": self.bytes_appended,
            "blocking_ticks_total": sum(self.blocking_ticks),
            "blocking_events": len(self.blocking_ticks),
            "mean_blocking_ticks": self.mean_blocking_ticks,
        }


# --- common log ---------------------------------------------------------------


class CommonLog:
    """Replicated append-only log shared by all monitors.

    Appends go to every replica in lockstep; reads and proofs come from the
    primary (replica 0).  Component facts are committed explicitly by the
    observing monitor so rejected or badly signed entries never serve as
    justification evidence.
    """

    def __init__(self, replica_count: int = 2):
        if replica_count < 1:
            raise ValueError("need at least one replica")
        self.replicas = [AuditLog() for _ in range(replica_count)]
        self._committed: dict[str, list[tuple[int, AttestedFact]]] = {}
        self._rejected: set[int] = set()

    @property
    def primary(self) -> AuditLog:
        return self.replicas[0]

    @property
    def size(self) -> int:
        return self.primary.size

    def set_available(self, available: bool) -> None:
        for replica in self.replicas:
            replica.available = available

    def append(self, se: SignedEvent) -> int:
        index = None
        for replica in self.replicas:
            idx, _ = replica.append(se)
            index = idx if index is None else index
        return index

    def entry(self, index: int) -> SignedEvent:
        return self.primary.entry(index)

    def root(self) -> TreeState:
        return self.primary.root()

    def inclusion_proof(self, index: int) -> MerkleAuditPath:
        return self.primary.inclusion_proof(index)

    def commit_fact(self, index: int, fact: AttestedFact) -> None:
        self._committed.setdefault(fact.atom.predicate, []).append((index, fact))

    def mark_rejected(self, index: int) -> None:
        self._rejected.add(index)

    def committed_facts_for(self, predicate: str) -> list[tuple[int, AttestedFact]]:
        return self._committed.get(predicate, [])

    def replica_states(self) -> list[TreeState]:
        return [replica.root() for replica in self.replicas]

    def cross_audit(self) -> list[Divergence]:
        return cross_audit(self.replica_states())

    def hash_count(self) -> int:
        return sum(replica.hash_count for replica in self.replicas)

    def bytes_appended(self) -> int:
        return sum(replica.bytes_appended for replica in self.replicas)


# --- event <-> fact bridging ---------------------------------------------------


def reify_shared_fact(fact: AttestedFact) -> Atom:
    """Flatten a fact into a payload atom for a shared-fact event."""
    return Atom(
        "attests",
        (
            StrConst(fact.principal or ""),
            StrConst(fact.atom.predicate),
            *fact.atom.args,
        ),
    )


def extract_fact(se: SignedEvent, index: int) -> AttestedFact | None:
    """The attested fact a log entry contributes; None for monitor bookkeeping.

    Component messages are attested by their receiver ("the component saw
    this request"); shared-fact events unreify the payload produced by
    reify_shared_fact.
    """
    ev = se.event
    if ev.kind == KIND_SHARED:
        principal_arg = ev.payload.args[0]
        predicate_arg = ev.payload.args[1]
        if not isinstance(principal_arg, StrConst) or not isinstance(predicate_arg, StrConst):
            return None
        principal = principal_arg.value or None
        atom = Atom(predicate_arg.value, ev.payload.args[2:])
        return AttestedFact(
            principal=principal,
            atom=atom,
            revision=ev.session_id,
            source=index,
            derived=True,
        )
    if ev.kind in (KIND_VERDICT, KIND_REJECTED):
        return None
    return AttestedFact(
        principal=ev.receiver,
        atom=ev.payload,
        revision=ev.session_id,
        source=index,
        derived=False,
    )


# --- outcomes, proof trees, verdicts -----------------------------------------


@dataclass(frozen=True)
class FactLeaf:
    fact: AttestedFact
    log_index: int
    path: MerkleAuditPath
    signed_event: SignedEvent

    @property
    def signer(self) -> str:
        return self.signed_event.signer


@dataclass(frozen=True)
class RuleNode:
    rule_id: int
    subst: tuple[tuple[str, Term], ...]  # ground bindings of the rule's variables
    children: tuple["ProofNode", ...]

    def bindings(self) -> Subst:
        return dict(self.subst)


ProofNode = Union[FactLeaf, RuleNode]


@dataclass(frozen=True)
class ProofTree:
    """A derivation of `goal` whose leaves are log-included signed facts."""

    goal: Atom
    goal_principal: str | None
    state: TreeState  # log head the inclusion paths were issued against
    root: ProofNode

    def leaves(self) -> Iterator[FactLeaf]:
        def walk(node: ProofNode) -> Iterator[FactLeaf]:
            if isinstance(node, FactLeaf):
                yield node
            else:
                for child in node.children:
                    yield from walk(child)

        yield from walk(self.root)


@dataclass(frozen=True)
class Verdict:
    property: str
    atom: Atom
    bindings: tuple[tuple[str, Term], ...]
    responsible: tuple[str, ...]
    evidence: tuple[ProofTree, ...]
    lamport_ts: int
    session_id: int
    monitor: str

    def key(self) -> tuple[str, tuple[Term, ...], int]:
        return (self.property, self.atom.args, self.session_id)


@dataclass(frozen=True)
class Accept:
    pass


@dataclass(frozen=True)
class Flag:
    verdicts: tuple[Verdict, ...]


@dataclass(frozen=True)
class SignatureInvalid:
    signer: str


@dataclass(frozen=True)
class NoJustification:
    goal: str


@dataclass(frozen=True)
class WouldViolate:
    verdicts: tuple[Verdict, ...]


@dataclass(frozen=True)
class Reject:
    reason: Union[SignatureInvalid, NoJustification, WouldViolate]


MonitorOutcome = Union[Accept, Flag, Reject]


# --- configuration ---------------------------------------------------------------


@dataclass
class MonitorConfig:
    """Static wiring of one monitor.

    `principal` None makes a global monitor that observes every component.
    `share_routes` maps locally derived predicates to the component monitors
    that consume them (partitioned deployments only).
    """

    principal: str | None
    mode: str
    rules: ValidatedRuleSet
    strata: Strata
    justification_goals: dict[str, str] = field(default_factory=dict)
    justification_rules: ValidatedRuleSet | None = None
    violation_prefixes: tuple[str, ...] = ("forbidden",)
    share_routes: dict[str, tuple[str, ...]] = field(default_factory=dict)

    def __post_init__(self):
        if self.mode not in (TRUST_THEN_VERIFY, VERIFY_THEN_TRUST):
            raise MonitorConfigError(f"unknown mode {self.mode!r}")
        if self.justification_rules is None and self.justification_goals:
            self.justification_rules = justification_closure(
                self.rules, set(self.justification_goals.values())
            )
        if self.justification_rules is not None:
            for rule in self.justification_rules.rules:
                if rule.negated_body():
                    raise MonitorConfigError(
                        f"justification rule {rule.id} uses negation"
                    )

    @property
    def monitor_name(self) -> str:
        return MONITOR_PREFIX + (self.principal or "global")

    def is_violation(self, predicate: str) -> bool:
        return predicate.startswith(self.violation_prefixes)


def justification_closure(rules: ValidatedRuleSet, goals: set[str]) -> ValidatedRuleSet:
    """Rules reachable from the goal predicates through positive bodies."""
    ruleset = rules.ruleset
    needed: set[str] = set()
    frontier = sorted(goals)
    while frontier:
        pred = frontier.pop()
        if pred in needed:
            continue
        needed.add(pred)
        for rule in ruleset.rules_for(pred):
            for lit in rule.positive_body():
                frontier.append(lit.atom.predicate)
    kept = tuple(r for r in ruleset.rules if r.head.atom.predicate in needed)
    return check_safety(RuleSet(rules=kept))


# --- proof search -------------------------------------------------------------


class _Unifier:
    """Unification over flat terms (variables and constants only)."""

    def __init__(self):
        self.counter = 0

    def fresh(self, rule_vars: set[str]) -> dict[str, Variable]:
        self.counter += 1
        return {v: Variable(f"{v}__r{self.counter}") for v in rule_vars}


def _walk(t: Term, subst: dict[str, Term]) -> Term:
    while isinstance(t, Variable) and t.name in subst:
        t = subst[t.name]
    return t


def _unify(a: Term, b: Term, subst: dict[str, Term]) -> dict[str, Term] | None:
    a, b = _walk(a, subst), _walk(b, subst)
    if a == b:
        return subst
    if isinstance(a, Variable):
        out = dict(subst)
        out[a.name] = b
        return out
    if isinstance(b, Variable):
        out = dict(subst)
        out[b.name] = a
        return out
    return None


def _unify_atoms(a: Atom, b: Atom, subst: dict[str, Term]) -> dict[str, Term] | None:
    if a.predicate != b.predicate or a.arity != b.arity:
        return None
    current = subst
    for x, y in zip(a.args, b.args):
        current = _unify(x, y, current)
        if current is None:
            return None
    return current


def _rename_literal(lit, renaming: dict[str, Variable]):
    def rename_term(t: Term) -> Term:
        if isinstance(t, Variable):
            return renaming[t.name]
        return t

    def rename_atom(a: Atom) -> Atom:
        return Atom(a.predicate, tuple(rename_term(x) for x in a.args))

    if isinstance(lit, PlainLit):
        return PlainLit(rename_atom(lit.atom))
    if isinstance(lit, AttestedLit):
        return AttestedLit(rename_term(lit.principal), rename_atom(lit.atom))
    if isinstance(lit, ComparisonLit):
        def rename_operand(t):
            if isinstance(t, Sum):
                return Sum(renaming[t.var.name], t.offset)
            return rename_term(t)

        return ComparisonLit(rename_operand(lit.lhs), lit.op, rename_operand(lit.rhs))
    raise ValueError(f"cannot rename {lit!r}")


@dataclass
class _PendingLeaf:
    fact: AttestedFact
    log_index: int


@dataclass
class _PendingRule:
    rule_id: int
    renaming: dict[str, Variable]
    children: list


class ProofSearch:
    """Top-down, first-proof-wins search over negation-free rules.

    Search order is deterministic: for each subgoal, committed log facts by
    ascending index first, then rules by id.  Ground subgoals already on the
    current path fail immediately (loop guard).  Exhausted ground subgoals
    are memoized as failures, but only when no loop guard fired underneath,
    so a blocked branch cannot poison other contexts.
    """

    def __init__(self, rules: ValidatedRuleSet, log: CommonLog):
        self.rules = rules.ruleset
        self.log = log
        self.unifier = _Unifier()
        self.steps = 0
        self._memo_failed: set[tuple] = set()
        self._blocks = 0

    def prove(
        self, principal: Term | None, atom: Atom, subst: dict[str, Term], ancestors: frozenset
    ) -> Iterator[tuple[dict[str, Term], "_PendingLeaf | _PendingRule"]]:
        self.steps += 1
        key = self._goal_key(principal, atom, subst)
        if key is not None:
            if key in self._memo_failed:
                return
            if key in ancestors:
                self._blocks += 1
                return
        produced = False
        blocks_before = self._blocks
        # Logged facts first.
        for idx, fact in self.log.committed_facts_for(atom.predicate):
            current = subst
            if principal is None:
                if fact.principal is not None:
                    continue
            else:
                if fact.principal is None:
                    continue
                current = _unify(principal, StrConst(fact.principal), current)
                if current is None:
                    continue
            current = _unify_atoms(atom, fact.atom, current)
            if current is None:
                continue
            produced = True
            yield current, _PendingLeaf(fact=fact, log_index=idx)
        # Then rule expansion.
        next_ancestors = ancestors | {key} if key is not None else ancestors
        for rule in self.rules.rules_for(atom.predicate):
            head = rule.head
            if (principal is None) != isinstance(head, PlainLit):
                continue
            rule_vars: set[str] = set()
            for lit in (head, *rule.body):
                rule_vars |= {v.name for v in literal_variables(lit)}
            renaming = self.unifier.fresh(rule_vars)
            current: dict[str, Term] | None = subst
            if isinstance(head, AttestedLit):
                current = _unify(principal, _rename_principal(head.principal, renaming), current)
                if current is None:
                    continue
            renamed_head = Atom(
                head.atom.predicate,
                tuple(renaming[a.name] if isinstance(a, Variable) else a for a in head.atom.args),
            )
            current = _unify_atoms(atom, renamed_head, current)
            if current is None:
                continue
            body = [_rename_literal(l, renaming) for l in rule.body]
            positives = [l for l in body if isinstance(l, (PlainLit, AttestedLit))]
            comparisons = [l for l in body if isinstance(l, ComparisonLit)]
            for final, children in self._prove_body(positives, comparisons, current, next_ancestors):
                produced = True
                yield final, _PendingRule(rule_id=rule.id, renaming=renaming, children=children)
        if not produced and key is not None and self._blocks == blocks_before:
            self._memo_failed.add(key)

    def _prove_body(
        self,
        positives: list,
        comparisons: list,
        subst: dict[str, Term],
        ancestors: frozenset,
    ) -> Iterator[tuple[dict[str, Term], list]]:
        def descend(i: int, current: dict[str, Term], acc: list) -> Iterator:
            if i == len(positives):
                ground = _ground_subst(current)
                for cmp in comparisons:
                    if not _comparison_ground_ok(cmp, ground):
                        return
                yield current, acc
                return
            lit = positives[i]
            principal = lit.principal if isinstance(lit, AttestedLit) else None
            for nxt, node in self.prove(principal, lit.atom, current, ancestors):
                yield from descend(i + 1, nxt, acc + [node])

        yield from descend(0, subst, [])

    def _goal_key(self, principal: Term | None, atom: Atom, subst: dict[str, Term]):
        """Hashable key for fully ground subgoals; None when variables remain."""
        parts: list = [atom.predicate]
        if principal is not None:
            p = _walk(principal, subst)
            if isinstance(p, Variable):
                return None
            parts.append(p)
        else:
            parts.append(None)
        for a in atom.args:
            a = _walk(a, subst)
            if isinstance(a, Variable):
                return None
            parts.append(a)
        return tuple(parts)


def _rename_principal(t: Term, renaming: dict[str, Variable]) -> Term:
    if isinstance(t, Variable):
        return renaming[t.name]
    return t


def _ground_subst(subst: dict[str, Term]) -> Subst:
    out: Subst = {}
    for name in subst:
        value = _walk(Variable(name), subst)
        if not isinstance(value, Variable):
            out[name] = value  # type: ignore[assignment]
    return out


def _comparison_ground_ok(cmp: ComparisonLit, ground: Subst) -> bool:
    return eval_comparison(cmp, ground)


# --- monitor -------------------------------------------------------------------


class Monitor:
    """Monitor for one component (or the whole system when principal is None)."""

    def __init__(
        self,
        config: MonitorConfig,
        log: CommonLog,
        registry: KeyRegistry,
        signing_key: SigningKey,
        clock,
        metrics: Metrics | None = None,
    ):
        if signing_key.owner != config.monitor_name:
            raise MonitorConfigError(
                f"monitor key {signing_key.owner!r} does not match {config.monitor_name!r}"
            )
        self.config = config
        self.log = log
        self.registry = registry
        self.key = signing_key
        self.clock = clock
        self.metrics = metrics if metrics is not None else Metrics()
        self.store = FactStore()
        self.store.protect(SIGNATURE_PROPERTY)
        self.store.register_predicates(config.rules.ruleset.predicates())
        self.outbox: list[tuple[AttestedFact, tuple[str, ...]]] = []
        self.verdict_log: list[Verdict] = []
        self._last_justify_steps = 0

    # -- helpers ---------------------------------------------------------

    def _verify_signature(self, se: SignedEvent) -> bool:
        self.metrics.signature_verifications += 1
        try:
            return verify_event(self.registry, se) and se.signer == se.event.sender
        except UnknownPrincipalError:
            return False

    def _new_violations(self, store: FactStore, before: set) -> list[tuple[str | None, Atom]]:
        out = []
        for fact in store.facts():
            if self.config.is_violation(fact.atom.predicate) and fact.key() not in before:
                out.append((fact.principal, fact.atom))
        return out

    def _violation_keys(self, store: FactStore) -> set:
        return {
            fact.key()
            for fact in store.facts()
            if self.config.is_violation(fact.atom.predicate)
        }

    def _evaluate_into(
        self, store: FactStore, new_facts: list[AttestedFact]
    ) -> tuple[list[tuple[str | None, Atom]], list[AttestedFact]]:
        """Assert facts, evaluate, return (new violations, new shared facts)."""
        before_violations = self._violation_keys(store)
        before_keys = {f.key() for f in store.facts()}
        for f in new_facts:
            store.begin_revision(f.revision)
            store.assert_fact(f)
        evaluate(self.config.strata, store, stats=self.metrics)
        shared: list[AttestedFact] = []
        if self.config.share_routes:
            for fact in store.facts():
                if fact.atom.predicate in self.config.share_routes and fact.key() not in before_keys:
                    shared.append(fact)
            shared.sort(key=lambda f: (f.atom.predicate, f.principal or "", repr(f.atom.args)))
        return self._new_violations(store, before_violations), shared

    def _queue_shared(self, shared: list[AttestedFact]) -> None:
        for fact in shared:
            self.outbox.append((fact, self.config.share_routes[fact.atom.predicate]))

    def drain_outbox(self) -> list[tuple[AttestedFact, tuple[str, ...]]]:
        out, self.outbox = self.outbox, []
        return out

    # -- evidence ---------------------------------------------------------

    def _leaf_for(self, fact: AttestedFact) -> FactLeaf:
        if fact.source is None:
            raise MissingInclusionProofError(f"fact has no log entry: {fact.atom}")
        return FactLeaf(
            fact=fact,
            log_index=fact.source,
            path=self.log.inclusion_proof(fact.source),
            signed_event=self.log.entry(fact.source),
        )

    def _evidence_node(self, store: FactStore, principal: str | None, atom: Atom) -> ProofNode:
        key = (principal, atom.predicate, atom.args)
        provenance = store.provenance.get(key)
        if provenance is not None:
            rule_id, subst_items, support = provenance
            return RuleNode(
                rule_id=rule_id,
                subst=subst_items,
                children=tuple(self._evidence_node(store, p, a) for p, a in support),
            )
        bucket = {f.key(): f for f in store.facts_for(atom.predicate)}
        fact = bucket.get(key)
        if fact is None:
            raise MissingInclusionProofError(f"fact not present: {atom}")
        return self._leaf_for(fact)

    def _build_verdict(
        self, store: FactStore, principal: str | None, atom: Atom, se: SignedEvent
    ) -> Verdict:
        state = self.log.root()
        evidence: list[ProofTree] = []
        responsible: set[str] = set()
        bindings: tuple[tuple[str, Term], ...] = ()
        provenance = store.provenance.get((principal, atom.predicate, atom.args))
        if provenance is not None:
            rule_id, subst_items, support = provenance
            rule = next(r for r in self.config.rules.rules if r.id == rule_id)
            head_vars = {v.name for v in rule.head.atom.variables()}
            bindings = tuple((k, v) for k, v in subst_items if k in head_vars)
            for sup_principal, sup_atom in support:
                node = self._evidence_node(store, sup_principal, sup_atom)
                tree = ProofTree(
                    goal=sup_atom, goal_principal=sup_principal, state=state, root=node
                )
                evidence.append(tree)
                for leaf in tree.leaves():
                    if leaf.fact.principal is not None:
                        responsible.add(leaf.fact.principal)
        responsible.add(se.event.sender)
        return Verdict(
            property=atom.predicate,
            atom=atom,
            bindings=bindings,
            responsible=tuple(sorted(responsible)),
            evidence=tuple(evidence),
            lamport_ts=se.event.lamport_ts,
            session_id=se.event.session_id,
            monitor=self.config.monitor_name,
        )

    def _signature_verdict(self, se: SignedEvent) -> Verdict:
        atom = Atom(
            SIGNATURE_PROPERTY,
            (IntConst(se.event.session_id), StrConst(se.signer)),
        )
        return Verdict(
            property=SIGNATURE_PROPERTY,
            atom=atom,
            bindings=(),
            responsible=(se.event.sender,),
            evidence=(),
            lamport_ts=se.event.lamport_ts,
            session_id=se.event.session_id,
            monitor=self.config.monitor_name,
        )

    # -- monitor-signed events ---------------------------------------------

    def _emit_event(self, kind: str, path: str, payload: Atom, session_id: int) -> SignedEvent:
        ts = self.clock.tick()
        event = Event(
            session_id=session_id,
            kind=kind,
            path=path,
            payload=payload,
            sender=self.config.monitor_name,
            receiver=AUDITOR,
            lamport_ts=ts,
            wall_ts=wall_time(ts),
        )
        se = sign_event(self.key, event)
        self.log.append(se)
        return se

    def emit_verdict(self, v: Verdict) -> SignedEvent:
        """Log the verdict and pin its fact under a protected predicate."""
        se = self._emit_event(
            KIND_VERDICT, f"/verdict/{v.property}", v.atom, v.session_id
        )
        self.store.protect(v.property)
        self.store.assert_fact(
            AttestedFact(
                principal=None,
                atom=v.atom,
                revision=self.store.current_revision,
                derived=True,
            )
        )
        self.verdict_log.append(v)
        return se

    def _append_rejection(self, se: SignedEvent, index: int, reason: str) -> None:
        payload = Atom(
            KIND_REJECTED,
            (IntConst(se.event.session_id), SymConst(reason), IntConst(index)),
        )
        self.log.mark_rejected(index)
        self._emit_event(KIND_REJECTED, "/monitor/rejected", payload, se.event.session_id)

    # -- justification -----------------------------------------------------

    def justify(self, e: Event) -> ProofTree:
        """Search for a proof of the configured goal for this event's path."""
        goal_pred = self.config.justification_goals.get(e.path)
        if goal_pred is None or self.config.justification_rules is None:
            raise ValueError(f"no justification goal configured for path {e.path}")
        goal = Atom(goal_pred, (IntConst(e.session_id),))
        search = ProofSearch(self.config.justification_rules, self.log)
        try:
            subst, pending = next(search.prove(None, goal, {}, frozenset()))
        except StopIteration:
            self._last_justify_steps = search.steps
            raise NoJustificationError(str(goal)) from None
        self._last_justify_steps = search.steps
        state = self.log.root()
        root = self._materialize(pending, subst, state)
        return ProofTree(goal=goal, goal_principal=None, state=state, root=root)

    def _materialize(self, pending, subst: dict[str, Term], state: TreeState) -> ProofNode:
        if isinstance(pending, _PendingLeaf):
            return FactLeaf(
                fact=pending.fact,
                log_index=pending.log_index,
                path=self.log.inclusion_proof(pending.log_index),
                signed_event=self.log.entry(pending.log_index),
            )
        ground: list[tuple[str, Term]] = []
        for original, fresh in sorted(pending.renaming.items()):
            value = _walk(fresh, subst)
            ground.append((original, value))
        return RuleNode(
            rule_id=pending.rule_id,
            subst=tuple(ground),
            children=tuple(self._materialize(c, subst, state) for c in pending.children),
        )

    # -- observation --------------------------------------------------------

    def observes(self, se: SignedEvent) -> bool:
        if self.config.principal is None:
            return True
        return self.config.principal in (se.event.receiver, se.event.sender)

    def observe(self, se: SignedEvent) -> MonitorOutcome:
        if not self.observes(se):
            raise ValueError(
                f"event for {se.event.receiver} misrouted to monitor of {self.config.principal}"
            )
        self.metrics.events_processed += 1
        self.clock.receive(se.event.lamport_ts)
        if self.config.mode == TRUST_THEN_VERIFY:
            return self._observe_ttv(se)
        return self._observe_vtt(se)

    def _observe_ttv(self, se: SignedEvent) -> MonitorOutcome:
        index = self.log.append(se)
        self.metrics.blocking_ticks.append(0)
        if not self._verify_signature(se):
            verdict = self._signature_verdict(se)
            self.emit_verdict(verdict)
            return Flag(verdicts=(verdict,))
        fact = extract_fact(se, index)
        new_facts = []
        if fact is not None:
            self.log.commit_fact(index, fact)
            new_facts.append(fact)
        violations, shared = self._evaluate_into(self.store, new_facts)
        self._queue_shared(shared)
        if violations:
            verdicts = tuple(
                self._build_verdict(self.store, p, a, se) for p, a in violations
            )
            for v in verdicts:
                self.emit_verdict(v)
            return Flag(verdicts=verdicts)
        return Accept()

    def _observe_vtt(self, se: SignedEvent) -> MonitorOutcome:
        blocking = 0
        fixpoint_before = self.metrics.fixpoint_iterations
        index = self.log.append(se)
        sig_ok = self._verify_signature(se)
        blocking += 1  # the signature check itself
        if not sig_ok:
            self._append_rejection(se, index, "sig_invalid")
            verdict = self._signature_verdict(se)
            self.emit_verdict(verdict)
            self.metrics.events_rejected += 1
            self.metrics.blocking_ticks.append(blocking)
            return Reject(reason=SignatureInvalid(signer=se.signer))
        fact = extract_fact(se, index)
        hypothetical = self.store.clone()
        violations, shared = self._evaluate_into(
            hypothetical, [fact] if fact is not None else []
        )
        blocking += self.metrics.fixpoint_iterations - fixpoint_before
        if violations:
            self._append_rejection(se, index, "would_violate")
            verdicts = tuple(
                self._build_verdict(hypothetical, p, a, se) for p, a in violations
            )
            for v in verdicts:
                self.emit_verdict(v)
            self.metrics.events_rejected += 1
            self.metrics.blocking_ticks.append(blocking)
            return Reject(reason=WouldViolate(verdicts=verdicts))
        if se.event.path in self.config.justification_goals and se.event.kind == KIND_POST:
            try:
                self.justify(se.event)
            except NoJustificationError as exc:
                blocking += getattr(self, "_last_justify_steps", 0)
                self._append_rejection(se, index, "no_justification")
                self.metrics.events_rejected += 1
                self.metrics.blocking_ticks.append(blocking)
                return Reject(reason=NoJustification(goal=exc.goal))
            blocking += getattr(self, "_last_justify_steps", 0)
        # Commit: adopt the evaluated hypothetical store.
        self.store = hypothetical
        if fact is not None:
            self.log.commit_fact(index, fact)
        self._queue_shared(shared)
        self.metrics.blocking_ticks.append(blocking)
        return Accept()

    def receive_shared(self, se: SignedEvent) -> list[Verdict]:
        """Ingest a derived fact shipped by another monitor.

        Fact exchange between monitors is never blocked: in both modes the
        fact is logged, asserted, and any newly derivable violations are
        emitted as verdicts (flag semantics).
        """
        self.metrics.events_processed += 1
        self.clock.receive(se.event.lamport_ts)
        index = self.log.append(se)
        if not self._verify_signature(se):
            verdict = self._signature_verdict(se)
            self.emit_verdict(verdict)
            return [verdict]
        fact = extract_fact(se, index)
        violations, shared = self._evaluate_into(
            self.store, [fact] if fact is not None else []
        )
        self._queue_shared(shared)
        verdicts = [self._build_verdict(self.store, p, a, se) for p, a in violations]
        for v in verdicts:
            self.emit_verdict(v)
        return verdicts

    def compact(self, keep_from: int) -> None:
        self.store.compact_revisions(keep_from)


# --- third-party verification -----------------------------------------------


@dataclass(frozen=True)
class VerifyResult:
    ok: bool
    reason: str = ""

    def __bool__(self) -> bool:
        return self.ok


def _fail(reason: str) -> VerifyResult:
    return VerifyResult(ok=False, reason=reason)


def verify_proof_tree(
    rules: RuleSet | ValidatedRuleSet,
    registry: KeyRegistry,
    state: TreeState,
    tree: ProofTree,
) -> VerifyResult:
    """Re-check a proof tree with only the rule set, registry and log head.

    Confirms leaf signatures and inclusion paths, the event->fact mapping of
    every leaf, and that every rule node is a correct ground instantiation
    whose children prove exactly its positive body literals.
    """
    ruleset = rules.ruleset if isinstance(rules, ValidatedRuleSet) else rules
    by_id = {r.id: r for r in ruleset.rules}

    def check(node: ProofNode, principal: str | None, atom: Atom) -> VerifyResult:
        if isinstance(node, FactLeaf):
            if node.fact.principal != principal or node.fact.atom != atom:
                return _fail("leaf_conclusion_mismatch")
            try:
                if not verify_event(registry, node.signed_event):
                    return _fail("leaf_signature_invalid")
            except UnknownPrincipalError:
                return _fail("leaf_signer_unknown")
            if node.signed_event.signer != node.signed_event.event.sender:
                return _fail("leaf_signer_not_sender")
            extracted = extract_fact(node.signed_event, node.log_index)
            if (
                extracted is None
                or extracted.principal != node.fact.principal
                or extracted.atom != node.fact.atom
            ):
                return _fail("leaf_fact_mismatch")
            if node.path.leaf_index != node.log_index:
                return _fail("leaf_index_mismatch")
            leaf_hash = hashlib.sha256(b"\x00" + signed_event_bytes(node.signed_event)).digest()
            if not verify_inclusion(state, leaf_hash, node.path):
                return _fail("leaf_inclusion_invalid")
            return VerifyResult(ok=True)
        rule = by_id.get(node.rule_id)
        if rule is None:
            return _fail("unknown_rule")
        subst = node.bindings()
        head = rule.head
        head_principal: str | None = None
        if isinstance(head, AttestedLit):
            p = resolve_term(head.principal, subst)
            if not isinstance(p, StrConst):
                return _fail("head_principal_unbound")
            head_principal = p.value
        head_atom = Atom(
            head.atom.predicate, tuple(resolve_term(a, subst) for a in head.atom.args)
        )
        if head_principal != principal or head_atom != atom:
            return _fail("rule_head_mismatch")
        if not head_atom.is_ground():
            return _fail("rule_not_ground")
        positives = rule.positive_body()
        if len(positives) != len(node.children):
            return _fail("child_count_mismatch")
        for cmp in rule.comparisons():
            if not eval_comparison(cmp, subst):
                return _fail("comparison_failed")
        for lit, child in zip(positives, node.children):
            child_principal: str | None = None
            if isinstance(lit, AttestedLit):
                p = resolve_term(lit.principal, subst)
                if not isinstance(p, StrConst):
                    return _fail("body_principal_unbound")
                child_principal = p.value
            child_atom = Atom(
                lit.atom.predicate, tuple(resolve_term(a, subst) for a in lit.atom.args)
            )
            if not child_atom.is_ground():
                return _fail("body_not_ground")
            result = check(child, child_principal, child_atom)
            if not result:
                return result
        return VerifyResult(ok=True)

    return check(tree.root, tree.goal_principal, tree.goal)
