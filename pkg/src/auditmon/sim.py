"""Deterministic discrete-event simulation of the UAV booking workflow.

The harness executes a scripted scenario: component messages travel as
signed events through the receiving component's monitor, monitors exchange
shared facts and verdicts through the replicated common log, and faults can
be injected (forged or delayed messages, dropped deliveries, log
tampering).  Identical scenario + seed yields byte-identical logs, traces
and metrics; there is no wall-clock or unordered-container nondeterminism.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Union

from .cryptoid import (
    Event,
    KeyRegistry,
    SignedEvent,
    SigningKey,
    forge_signature,
    generate_principal,
    sign_event,
)
from .engine import AttestedFact, assert_spec_facts
from .errors import (
    LogUnavailableError,
    ScenarioHaltError,
    ScenarioParseError,
    UnresolvedEventRefError,
)
from .merklelog import Divergence, tree_head_bytes
from .monitor import (
    AUDITOR,
    KIND_POST,
    KIND_SHARED,
    MONITOR_PREFIX,
    Accept,
    CommonLog,
    Flag,
    Metrics,
    Monitor,
    MonitorConfig,
    MonitorOutcome,
    Reject,
    Verdict,
    justification_closure,
    path_constant,
    reify_shared_fact,
    wall_time,
)
from .partition import PartitionResult, Topology, partition
from .speclang import (
    Atom,
    IntConst,
    RuleSet,
    StrConst,
    ValidatedRuleSet,
    check_safety,
    stratify,
)

LAUNCH_PATH = "/launch"
RTF_PATH = "/ready_to_fly"


# --- logical clocks ------------------------------------------------------------


@dataclass
class LamportClock:
    """Per-principal logical counter; strictly increases on send/receive."""

    value: int = 0

    def tick(self) -> int:
        self.value += 1
        return self.value

    def receive(self, received_ts: int) -> int:
        self.value = max(self.value, received_ts) + 1
        return self.value


def next_timestamp(clock: LamportClock, received_ts: int | None = None) -> int:
    """Lamport step: local := max(local, received or 0) + 1."""
    if received_ts is None:
        return clock.tick()
    return clock.receive(received_ts)


def global_order_key(lamport_ts: int, principal: str) -> tuple[int, str]:
    """Total event order: timestamp first, principal name breaks ties."""
    return (lamport_ts, principal)


# --- scenario model -------------------------------------------------------------


@dataclass(frozen=True)
class SendMessage:
    sender: str
    receiver: str
    path: str
    session: int
    content: str
    label: str | None = None


@dataclass(frozen=True)
class SelectBooking:
    sender: str
    receiver: str
    session: int
    content: str
    label: str | None = None


@dataclass(frozen=True)
class CloseSession:
    session: int


@dataclass(frozen=True)
class Forge:
    sender: str
    receiver: str
    path: str
    session: int
    content: str
    key_source: str  # "valid" | "invalid"


@dataclass(frozen=True)
class Delay:
    event_ref: str
    amount: int

    def __post_init__(self):
        if self.amount <= 0:
            raise ScenarioParseError("delay amount must be positive")


@dataclass(frozen=True)
class Drop:
    event_ref: str


@dataclass(frozen=True)
class TamperLog:
    replica: int
    leaf_index: int
    byte_offset: int
    xor_mask: int


FaultSpec = Union[Forge, Delay, Drop, TamperLog]


@dataclass(frozen=True)
class InjectFault:
    fault: FaultSpec


Action = Union[SendMessage, SelectBooking, CloseSession, InjectFault]


@dataclass(frozen=True)
class Scenario:
    name: str
    seed: int
    principals: tuple[str, ...]
    script: tuple[Action, ...]
    deadlines: dict[str, int] = field(default_factory=dict)

    def labels(self) -> set[str]:
        return {
            a.label
            for a in self.script
            if isinstance(a, (SendMessage, SelectBooking)) and a.label
        }


def _action_from_dict(i: int, data: dict, principals: set[str]) -> Action:
    def need(key: str):
        if key not in data:
            raise ScenarioParseError(f"script[{i}]: missing field {key!r}")
        return data[key]

    def principal(key: str) -> str:
        name = need(key)
        if name not in principals:
            raise ScenarioParseError(f"script[{i}]: undeclared principal {name!r}")
        return name

    kind = need("action")
    if kind == "send":
        return SendMessage(
            sender=principal("sender"),
            receiver=principal("receiver"),
            path=need("path"),
            session=int(need("session")),
            content=str(need("content")),
            label=data.get("label"),
        )
    if kind == "select_booking":
        return SelectBooking(
            sender=principal("sender"),
            receiver=principal("receiver"),
            session=int(need("session")),
            content=str(need("content")),
            label=data.get("label"),
        )
    if kind == "close_session":
        return CloseSession(session=int(need("session")))
    if kind == "inject_fault":
        return InjectFault(fault=_fault_from_dict(i, need("fault"), principals))
    raise ScenarioParseError(f"script[{i}]: unknown action kind {kind!r}")


def _fault_from_dict(i: int, data: dict, principals: set[str]) -> FaultSpec:
    def need(key: str):
        if key not in data:
            raise ScenarioParseError(f"script[{i}]: fault missing field {key!r}")
        return data[key]

    kind = need("kind")
    if kind == "forge":
        event = need("event")
        sender, receiver = event.get("sender"), event.get("receiver")
        if sender not in principals or receiver not in principals:
            raise ScenarioParseError(f"script[{i}]: forged event names undeclared principals")
        source = need("key_source")
        if source not in ("valid", "invalid"):
            raise ScenarioParseError(f"script[{i}]: key_source must be valid|invalid")
        try:
            return Forge(
                sender=sender,
                receiver=receiver,
                path=event["path"],
                session=int(event["session"]),
                content=str(event.get("content", "")),
                key_source=source,
            )
        except KeyError as exc:
            raise ScenarioParseError(f"script[{i}]: forged event missing {exc}") from None
    if kind == "delay":
        return Delay(event_ref=need("event_ref"), amount=int(need("amount")))
    if kind == "drop":
        return Drop(event_ref=need("event_ref"))
    if kind == "tamper_log":
        return TamperLog(
            replica=int(need("replica")),
            leaf_index=int(need("leaf_index")),
            byte_offset=int(need("byte_offset")),
            xor_mask=int(need("xor_mask")),
        )
    raise ScenarioParseError(f"script[{i}]: unknown fault kind {kind!r}")


def scenario_from_dict(data: dict) -> Scenario:
    try:
        principals = tuple(data["principals"])
    except KeyError:
        raise ScenarioParseError("scenario missing 'principals'") from None
    pset = set(principals)
    script = tuple(
        _action_from_dict(i, action, pset)
        for i, action in enumerate(data.get("script", []))
    )
    scenario = Scenario(
        name=str(data.get("name", "scenario")),
        seed=int(data.get("seed", 0)),
        principals=principals,
        script=script,
        deadlines={k: int(v) for k, v in data.get("deadlines", {}).items()},
    )
    _validate_refs(scenario)
    return scenario


def _validate_refs(scenario: Scenario) -> None:
    labels = scenario.labels()
    for action in scenario.script:
        if isinstance(action, InjectFault) and isinstance(action.fault, (Delay, Drop)):
            if action.fault.event_ref not in labels:
                raise UnresolvedEventRefError(
                    f"fault references unknown label {action.fault.event_ref!r}"
                )


def load_scenario(path: str | Path) -> Scenario:
    """Parse and validate a scenario JSON file."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ScenarioParseError(f"cannot read scenario file: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioParseError(f"{path}: {exc}") from exc
    return scenario_from_dict(data)


def inject_fault(sc: Scenario, fault: FaultSpec) -> Scenario:
    """Scenario with `fault` added; Delay/Drop register before their target."""
    if isinstance(fault, (Delay, Drop)) and fault.event_ref not in sc.labels():
        raise UnresolvedEventRefError(f"no script label {fault.event_ref!r}")
    action = InjectFault(fault=fault)
    if isinstance(fault, (Delay, Drop)):
        script = (action, *sc.script)
    else:
        script = (*sc.script, action)
    return Scenario(
        name=sc.name,
        seed=sc.seed,
        principals=sc.principals,
        script=script,
        deadlines=dict(sc.deadlines),
    )


# --- trace and result -----------------------------------------------------------


@dataclass(frozen=True)
class TraceEntry:
    path: str
    sender: str
    receiver: str
    session: int
    lamport_ts: int
    outcome: str  # accept | flag | reject:<reason> | dropped
    log_index: int | None

    def to_dict(self) -> dict:
        return {
            "path": self.path,
            "sender": self.sender,
            "receiver": self.receiver,
            "session": self.session,
            "lamport_ts": self.lamport_ts,
            "outcome": self.outcome,
            "log_index": self.log_index,
        }


@dataclass
class RunResult:
    scenario: Scenario
    mode: str
    partitioned: bool
    trace: list[TraceEntry]
    verdicts: list[Verdict]
    metrics: Metrics
    divergences: list[Divergence]
    log: CommonLog
    registry: KeyRegistry
    monitors: dict[str, Monitor]
    justification_goals: dict[str, str]
    keys: dict[str, SigningKey] = field(default_factory=dict)

    def verdict_keys(self) -> set[tuple]:
        return {v.key() for v in self.verdicts}

    def has_path(self, path: str) -> bool:
        return any(entry.path == path and entry.outcome != "dropped" for entry in self.trace)

    def persist(self, out_dir: str | Path) -> Path:
        """Write the auditable artifacts of this run to a directory.

        Per replica: the raw record log (`log_replica_i.adtl`) and a signed
        tree-head checkpoint.  Plus the key registry, the monitor manifest
        (what an auditor needs to re-run justification checks), verdicts,
        metrics and the delivery trace.
        """
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        for i, replica in enumerate(self.log.replicas):
            (out / f"log_replica_{i}.adtl").write_bytes(replica.to_bytes())
            state = replica.root()
            signer = f"log:{i}"
            signature = self.keys[signer].sign(tree_head_bytes(state.size, state.root_hash))
            (out / f"checkpoint_{i}.json").write_text(
                json.dumps(
                    {
                        "replica": i,
                        "size": state.size,
                        "root": state.root_hash.hex(),
                        "signer": signer,
                        "signature": signature.hex(),
                    },
                    indent=2,
                    sort_keys=True,
                ),
                encoding="utf-8",
            )
        (out / "registry.txt").write_text(self.registry.to_text(), encoding="utf-8")
        (out / "monitors.json").write_text(
            json.dumps(
                {
                    "mode": self.mode,
                    "partitioned": self.partitioned,
                    "justification_goals": self.justification_goals,
                    "violation_prefixes": ["forbidden"],
                    "monitors": sorted(self.monitors),
                },
                indent=2,
                sort_keys=True,
            ),
            encoding="utf-8",
        )
        (out / "verdicts.json").write_text(
            json.dumps(
                [
                    {
                        "property": v.property,
                        "atom": str(v.atom),
                        "session": v.session_id,
                        "responsible": list(v.responsible),
                        "monitor": v.monitor,
                        "lamport_ts": v.lamport_ts,
                    }
                    for v in self.verdicts
                ],
                indent=2,
                sort_keys=True,
            ),
            encoding="utf-8",
        )
        (out / "metrics.json").write_text(
            json.dumps(self.metrics.to_dict(), indent=2, sort_keys=True), encoding="utf-8"
        )
        (out / "trace.json").write_text(
            json.dumps([t.to_dict() for t in self.trace], indent=2, sort_keys=True),
            encoding="utf-8",
        )
        dump = "".join(
            f"% store of {name}\n{monitor.store.dump()}"
            for name, monitor in self.monitors.items()
        )
        (out / "facts.txt").write_text(dump, encoding="utf-8")
        return out


# --- system wiring -----------------------------------------------------------------


def key_seed(run_seed: int, name: str) -> bytes:
    return hashlib.sha256(b"auditmon-key:" + run_seed.to_bytes(8, "big") + name.encode()).digest()


def build_registry(
    scenario: Scenario, replica_count: int = 2
) -> tuple[KeyRegistry, dict[str, SigningKey]]:
    """Keys for components, their monitors, the global monitor, log signers."""
    registry = KeyRegistry()
    keys: dict[str, SigningKey] = {}
    names = list(scenario.principals)
    names += [MONITOR_PREFIX + p for p in scenario.principals]
    names.append(MONITOR_PREFIX + "global")
    names += [f"log:{i}" for i in range(replica_count)]
    names.append(AUDITOR)
    for name in names:
        _, key = generate_principal(registry, name, key_seed(scenario.seed, name))
        keys[name] = key
    return registry, keys


def split_justification_rules(
    vrs: ValidatedRuleSet, goals: dict[str, str]
) -> tuple[ValidatedRuleSet, set[str]]:
    """Evaluation subset of the rules: goal-predicate rules are search-only."""
    goal_preds = set(goals.values())
    kept = tuple(r for r in vrs.rules if r.head.atom.predicate not in goal_preds)
    eval_rules = check_safety(RuleSet(rules=kept, facts=vrs.ruleset.facts))
    return eval_rules, goal_preds


def make_post_event(
    sender: str, receiver: str, path: str, session: int, content: str, lamport_ts: int
) -> Event:
    payload = Atom(
        KIND_POST,
        (
            StrConst(path_constant(path)),
            IntConst(session),
            IntConst(lamport_ts),
            StrConst(content),
        ),
    )
    return Event(
        session_id=session,
        kind=KIND_POST,
        path=path,
        payload=payload,
        sender=sender,
        receiver=receiver,
        lamport_ts=lamport_ts,
        wall_ts=wall_time(lamport_ts),
    )


class Simulation:
    """One scenario run: builds the monitors, executes the script."""

    def __init__(
        self,
        scenario: Scenario,
        rules: ValidatedRuleSet,
        topology: Topology,
        justification_goals: dict[str, str] | None = None,
        mode: str = "ttv",
        partitioned: bool = False,
        replica_count: int = 2,
        apply_compaction: bool = True,
    ):
        self.scenario = scenario
        self.topology = topology
        self.mode = mode
        self.partitioned = partitioned
        self.apply_compaction = apply_compaction
        self.justification_goals = dict(justification_goals or {})
        self.metrics = Metrics()
        self.log = CommonLog(replica_count=replica_count)
        self.registry, self.keys = build_registry(scenario, replica_count)
        self.clocks: dict[str, LamportClock] = {}
        self.eval_rules, self._goal_preds = split_justification_rules(
            rules, self.justification_goals
        )
        self.full_rules = rules
        self.monitors: dict[str, Monitor] = {}
        self._partition: PartitionResult | None = None
        self._build_monitors()
        self.trace: list[TraceEntry] = []

    def clock(self, principal: str) -> LamportClock:
        return self.clocks.setdefault(principal, LamportClock())

    def _justification_ruleset(self) -> ValidatedRuleSet | None:
        if not self.justification_goals:
            return None
        return justification_closure(self.full_rules, set(self.justification_goals.values()))

    def _build_monitors(self) -> None:
        justification_rules = self._justification_ruleset()
        if not self.partitioned:
            config = MonitorConfig(
                principal=None,
                mode=self.mode,
                rules=self.eval_rules,
                strata=stratify(self.eval_rules),
                justification_goals=self.justification_goals,
                justification_rules=justification_rules,
            )
            self.monitors["global"] = self._wire(config)
            return
        result = partition(self.eval_rules, self.topology)
        self._partition = result
        for principal in self.topology.principals:
            local = result.assignments[principal]
            config = MonitorConfig(
                principal=principal,
                mode=self.mode,
                rules=local,
                strata=stratify(local),
                justification_goals=self.justification_goals,
                justification_rules=justification_rules,
                share_routes=result.routes_from(principal),
            )
            self.monitors[principal] = self._wire(config)

    def _wire(self, config: MonitorConfig) -> Monitor:
        name = config.monitor_name
        monitor = Monitor(
            config=config,
            log=self.log,
            registry=self.registry,
            signing_key=self.keys[name],
            clock=self.clock(name),
            metrics=self.metrics,
        )
        assert_spec_facts(monitor.store, config.rules)
        return monitor

    def monitor_for(self, receiver: str) -> Monitor:
        if not self.partitioned:
            return self.monitors["global"]
        return self.monitors[receiver]

    # -- script execution ---------------------------------------------------

    def run(self) -> RunResult:
        pending_delay: dict[str, int] = {}
        pending_drop: set[str] = set()
        for action in self.scenario.script:
            if isinstance(action, InjectFault):
                self._apply_fault(action.fault, pending_delay, pending_drop)
                continue
            if isinstance(action, CloseSession):
                if self.apply_compaction:
                    for monitor in self.monitors.values():
                        monitor.store.current_revision = max(
                            monitor.store.current_revision, action.session + 1
                        )
                        monitor.compact(action.session + 1)
                continue
            send = self._as_send(action)
            if send.label and send.label in pending_drop:
                self.clock(send.sender).tick()
                self.trace.append(
                    TraceEntry(
                        path=send.path,
                        sender=send.sender,
                        receiver=send.receiver,
                        session=send.session,
                        lamport_ts=self.clock(send.sender).value,
                        outcome="dropped",
                        log_index=None,
                    )
                )
                continue
            if send.label and send.label in pending_delay:
                self.clock(send.sender).value += pending_delay[send.label]
            ts = self.clock(send.sender).tick()
            event = make_post_event(
                send.sender, send.receiver, send.path, send.session, send.content, ts
            )
            se = sign_event(self.keys[send.sender], event)
            self._deliver(se)
        divergences = self.log.cross_audit()
        self._sync_metrics()
        verdicts = self._collect_verdicts()
        return RunResult(
            scenario=self.scenario,
            mode=self.mode,
            partitioned=self.partitioned,
            trace=self.trace,
            verdicts=verdicts,
            metrics=self.metrics,
            divergences=divergences,
            log=self.log,
            registry=self.registry,
            monitors=self.monitors,
            justification_goals=self.justification_goals,
            keys=self.keys,
        )

    def _as_send(self, action: Action) -> SendMessage:
        if isinstance(action, SendMessage):
            return action
        if isinstance(action, SelectBooking):
            return SendMessage(
                sender=action.sender,
                receiver=action.receiver,
                path="/select_booking",
                session=action.session,
                content=action.content,
                label=action.label,
            )
        raise TypeError(f"not a send action: {action!r}")

    def _apply_fault(
        self, fault: FaultSpec, pending_delay: dict[str, int], pending_drop: set[str]
    ) -> None:
        if isinstance(fault, Delay):
            pending_delay[fault.event_ref] = fault.amount
        elif isinstance(fault, Drop):
            pending_drop.add(fault.event_ref)
        elif isinstance(fault, TamperLog):
            self.log.replicas[fault.replica].tamper_record(
                fault.leaf_index, fault.byte_offset, fault.xor_mask
            )
        elif isinstance(fault, Forge):
            ts = self.clock(fault.sender).tick()
            event = make_post_event(
                fault.sender, fault.receiver, fault.path, fault.session, fault.content, ts
            )
            if fault.key_source == "valid":
                se = sign_event(self.keys[fault.sender], event)
            else:
                # Attacker key: unknown to the registry, so verification fails.
                attacker = SigningKey(
                    owner=fault.sender,
                    private_key=_attacker_private_key(self.scenario.seed),
                )
                se = forge_signature(attacker, event, claimed_signer=fault.sender)
            self._deliver(se)
        else:  # pragma: no cover
            raise TypeError(f"unknown fault: {fault!r}")

    def _deliver(self, se: SignedEvent) -> None:
        monitor = self.monitor_for(se.event.receiver)
        log_index = self.log.size
        try:
            outcome = monitor.observe(se)
        except LogUnavailableError as exc:
            raise ScenarioHaltError(
                f"monitor {monitor.config.monitor_name} cannot reach the log: {exc}"
            ) from exc
        self.trace.append(
            TraceEntry(
                path=se.event.path,
                sender=se.event.sender,
                receiver=se.event.receiver,
                session=se.event.session_id,
                lamport_ts=se.event.lamport_ts,
                outcome=_outcome_label(outcome),
                log_index=log_index,
            )
        )
        self._pump_shared()
        if not isinstance(outcome, Reject):
            # The component sees the message only when it is not blocked.
            self.clock(se.event.receiver).receive(se.event.lamport_ts)
            self._react(se)

    def _react(self, se: SignedEvent) -> None:
        """Minimal component behaviour: an accepted RTF triggers the launch."""
        if se.event.path == RTF_PATH and se.event.kind == KIND_POST:
            operator = se.event.receiver
            ts = self.clock(operator).tick()
            event = make_post_event(
                operator, se.event.sender, LAUNCH_PATH, se.event.session_id, "launch", ts
            )
            self._deliver(sign_event(self.keys[operator], event))

    def _pump_shared(self) -> None:
        """Ship newly derived shared facts until every outbox drains."""
        progress = True
        while progress:
            progress = False
            for principal in list(self.monitors):
                producer = self.monitors[principal]
                for fact, consumers in producer.drain_outbox():
                    progress = True
                    for consumer in consumers:
                        self._ship_fact(producer, fact, consumer)

    def _ship_fact(self, producer: Monitor, fact: AttestedFact, consumer: str) -> None:
        name = producer.config.monitor_name
        ts = self.clock(name).tick()
        event = Event(
            session_id=fact.revision,
            kind=KIND_SHARED,
            path=f"/shared/{fact.atom.predicate}",
            payload=reify_shared_fact(fact),
            sender=name,
            receiver=MONITOR_PREFIX + consumer,
            lamport_ts=ts,
            wall_ts=wall_time(ts),
        )
        se = sign_event(self.keys[name], event)
        try:
            self.monitors[consumer].receive_shared(se)
        except LogUnavailableError as exc:
            raise ScenarioHaltError(
                f"monitor of {consumer} cannot reach the log: {exc}"
            ) from exc

    def _collect_verdicts(self) -> list[Verdict]:
        verdicts: list[Verdict] = []
        seen: set[tuple] = set()
        for monitor in self.monitors.values():
            for v in monitor.verdict_log:
                if v.key() not in seen:
                    seen.add(v.key())
                    verdicts.append(v)
        return verdicts

    def _sync_metrics(self) -> None:
        self.metrics.hash_computations = self.log.hash_count()
        self.metrics.bytes_appended = self.log.bytes_appended()


def _attacker_private_key(seed: int):
    from cryptography.hazmat.primitives.asymmetric import ed25519

    return ed25519.Ed25519PrivateKey.from_private_bytes(key_seed(seed, "attacker"))


def _outcome_label(outcome: MonitorOutcome) -> str:
    if isinstance(outcome, Accept):
        return "accept"
    if isinstance(outcome, Flag):
        return "flag"
    reason = outcome.reason
    return f"reject:{type(reason).__name__}"


def run(
    scenario: Scenario,
    rules: ValidatedRuleSet,
    topology: Topology,
    justification_goals: dict[str, str] | None = None,
    mode: str = "ttv",
    partitioned: bool = False,
    replica_count: int = 2,
    apply_compaction: bool = True,
) -> RunResult:
    """Execute a scenario deterministically; see Simulation."""
    sim = Simulation(
        scenario,
        rules,
        topology,
        justification_goals=justification_goals,
        mode=mode,
        partitioned=partitioned,
        replica_count=replica_count,
        apply_compaction=apply_compaction,
    )
    return sim.run()


# --- scenario synthesis (bench and tests) ----------------------------------------


UAV_PRINCIPALS = ("User", "SB", "MRM", "Personnel", "DO")


def nominal_session_script(session: int) -> list[Action]:
    s = session
    return [
        SendMessage("User", "SB", "/booking_request", s, f"organ:A->B#{s}", label=f"request{s}"),
        SendMessage("SB", "MRM", "/mission_request", s, f"organ:A->B#{s}", label=f"forward{s}"),
        SendMessage("MRM", "User", "/booking_options", s, f"uav-12@{s}", label=f"options{s}"),
        SelectBooking("User", "MRM", s, "uav-12", label=f"select{s}"),
        SendMessage("MRM", "Personnel", "/prepare_drone", s, "uav-12", label=f"prepare{s}"),
        SendMessage("Personnel", "MRM", "/preparation_complete", s, "uav-12", label=f"ready{s}"),
        SendMessage("MRM", "DO", RTF_PATH, s, "uav-12", label=f"rtf{s}"),
        CloseSession(session=s),
    ]


def synth_scenario(sessions: int, seed: int = 7) -> Scenario:
    script: list[Action] = []
    for s in range(1, sessions + 1):
        script.extend(nominal_session_script(s))
    return Scenario(
        name=f"synthetic-{sessions}",
        seed=seed,
        principals=UAV_PRINCIPALS,
        script=tuple(script),
        deadlines={"ready_to_fly": 50},
    )
