"""Operator command line.

Subcommands:
  check      validate an .adl specification (parse, safety, stratification)
  partition  write per-principal rule files and the shared-predicate manifest
  run        execute a scenario and persist the auditable run directory
  audit      replay a persisted run directory as an impartial third party
  bench      synthesize booking sessions and print desk-scale throughput

Exit codes: 0 success, 1 check/audit failure, 2 I/O or usage errors.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

from . import data as bundled
from .audit import audit_run
from .cryptoid import KeyRegistry
from .errors import AuditmonError, SpecSyntaxError
from .monitor import TRUST_THEN_VERIFY, VERIFY_THEN_TRUST
from .partition import partition
from .sim import Scenario, Simulation, load_scenario, synth_scenario
from .speclang import check_safety, parse_spec, stratify

MODES = {"ttv": TRUST_THEN_VERIFY, "vtt": VERIFY_THEN_TRUST}


def _read_text(path: str) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        raise SystemExit(2)


def cmd_check(args: argparse.Namespace) -> int:
    text = _read_text(args.spec)
    try:
        rules = parse_spec(text)
        validated = check_safety(rules)
        strata = stratify(validated)
    except AuditmonError as exc:
        print(f"{args.spec}: {exc}", file=sys.stderr)
        return 1
    print(
        f"{args.spec}: {len(rules.rules)} rules, {len(rules.facts)} facts, "
        f"{len(strata)} strata"
    )
    return 0


def cmd_partition(args: argparse.Namespace) -> int:
    rules = bundled.load_spec_file(args.spec)
    topology, goals = bundled.load_topology_file(args.topology)
    result = partition(rules, topology)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for principal, assignment in result.assignments.items():
        (out / f"{principal}.adl").write_text(assignment.ruleset.pretty(), encoding="utf-8")
        (out / f"{principal}.monitor.json").write_text(
            json.dumps(
                {
                    "principal": principal,
                    "mode": args.mode,
                    "spec_file": f"{principal}.adl",
                    "justification_goals": goals,
                },
                indent=2,
                sort_keys=True,
            ),
            encoding="utf-8",
        )
    (out / "shared.json").write_text(
        json.dumps(result.to_manifest(), indent=2, sort_keys=True), encoding="utf-8"
    )
    print(f"wrote {len(result.assignments)} monitor rule sets to {out}")
    for name, route in sorted(result.shared.items()):
        print(f"  shared: {name} from {route.producer} -> {', '.join(route.consumers)}")
    return 0


def _load_scenario_arg(args: argparse.Namespace) -> Scenario:
    scenario = load_scenario(args.scenario)
    if args.seed is not None:
        scenario = Scenario(
            name=scenario.name,
            seed=args.seed,
            principals=scenario.principals,
            script=scenario.script,
            deadlines=dict(scenario.deadlines),
        )
    return scenario


def cmd_run(args: argparse.Namespace) -> int:
    rules = bundled.load_spec_file(args.spec)
    topology, goals = bundled.load_topology_file(args.topology)
    scenario = _load_scenario_arg(args)
    sim = Simulation(
        scenario,
        rules,
        topology,
        justification_goals=goals,
        mode=MODES[args.mode],
        partitioned=args.partitioned,
    )
    result = sim.run()
    out = result.persist(args.out)
    print(f"scenario {scenario.name}: {len(result.trace)} deliveries, "
          f"{len(result.verdicts)} verdicts, {result.log.size} log entries")
    for v in result.verdicts:
        print(f"  verdict {v.atom} responsible={','.join(v.responsible)} by {v.monitor}")
    for d in result.divergences:
        print(f"  divergence {d.kind}: replicas {d.replicas} ({d.detail})")
    print(f"run directory: {out}")
    return 0


def cmd_audit(args: argparse.Namespace) -> int:
    rules = bundled.load_spec_file(args.spec)
    registry_path = args.registry or str(Path(args.log_dir) / "registry.txt")
    registry = KeyRegistry.from_text(_read_text(registry_path))
    report = audit_run(args.log_dir, rules, registry)
    if args.out:
        Path(args.out).write_text(report.to_json(), encoding="utf-8")
    print(report.to_json())
    return 0 if report.ok else 1


def cmd_bench(args: argparse.Namespace) -> int:
    rules = bundled.load_spec_file(args.spec)
    topology, goals = bundled.load_topology_file(args.topology)
    scenario = synth_scenario(args.sessions, seed=args.seed or 7)
    print(f"benchmark: {args.sessions} booking sessions per mode")
    header = (
        f"{'mode':<5} {'events':>7} {'rejected':>8} {'events/s':>10} "
        f"{'mean block':>10} {'hashes':>9} {'sig checks':>10} {'log bytes':>10}"
    )
    print(header)
    print("-" * len(header))
    for mode in ("ttv", "vtt"):
        sim = Simulation(
            scenario, rules, topology, justification_goals=goals, mode=mode
        )
        started = time.perf_counter()
        result = sim.run()
        elapsed = time.perf_counter() - started
        m = result.metrics
        rate = m.events_processed / elapsed if elapsed > 0 else float("inf")
        print(
            f"{mode:<5} {m.events_processed:>7} {m.events_rejected:>8} {rate:>10.0f} "
            f"{m.mean_blocking_ticks:>10.2f} {m.hash_computations:>9} "
            f"{m.signature_verifications:>10} {m.bytes_appended:>10}"
        )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="auditmon",
        description="Runtime monitoring with auditable evidence for a simulated distributed system",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_spec(p: argparse.ArgumentParser) -> None:
        p.add_argument("--spec", default=str(bundled.spec_path()),
                       help="attestation-Datalog file (default: bundled UAV spec)")

    def add_topology(p: argparse.ArgumentParser) -> None:
        p.add_argument("--topology", default=str(bundled.topology_path()),
                       help="topology JSON (default: bundled UAV topology)")

    p = sub.add_parser("check", help="validate a specification file")
    add_spec(p)
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("partition", help="compile per-monitor rule subsets")
    add_spec(p)
    add_topology(p)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--mode", choices=sorted(MODES), default="ttv")
    p.set_defaults(func=cmd_partition)

    p = sub.add_parser("run", help="execute a scenario")
    p.add_argument("--scenario", required=True, help="scenario JSON file")
    add_spec(p)
    add_topology(p)
    p.add_argument("--mode", choices=sorted(MODES), default="ttv")
    p.add_argument("--partitioned", action="store_true",
                   help="per-component monitors instead of one global monitor")
    p.add_argument("--out", required=True, help="run directory to write")
    p.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("audit", help="replay and verify a persisted run directory")
    p.add_argument("--log-dir", required=True, help="run directory from `auditmon run`")
    add_spec(p)
    p.add_argument("--registry", default=None,
                   help="registry file (default: <log-dir>/registry.txt)")
    p.add_argument("--out", default=None, help="also write the JSON report here")
    p.set_defaults(func=cmd_audit)

    p = sub.add_parser("bench", help="desk-scale throughput for both monitor modes")
    p.add_argument("sessions", type=int, help="number of booking sessions to synthesize")
    add_spec(p)
    add_topology(p)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "sessions", None) is not None and args.sessions < 1:
        parser.error("sessions must be >= 1")
    try:
        return args.func(args)
    except SpecSyntaxError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except AuditmonError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
