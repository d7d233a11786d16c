"""Exception types shared across the package.

Every error raised by the library derives from AuditmonError so callers can
catch the whole family at an API boundary (the CLI maps them to exit codes).
"""

from __future__ import annotations


class AuditmonError(Exception):
    """Base class for all library errors."""


# --- specification language ---------------------------------------------

class SpecSyntaxError(AuditmonError):
    """Malformed rule text; carries 1-based line/column of the offending token."""

    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"{message} (line {line}, column {column})")
        self.line = line
        self.column = column


class ArityError(AuditmonError):
    """A predicate is used with inconsistent arity within one rule set."""


class UnsafeRuleError(AuditmonError):
    """A rule violates the safety condition; names the variable and rule."""

    def __init__(self, variable: str, rule_id: int, reason: str):
        super().__init__(f"unsafe rule {rule_id}: variable {variable}: {reason}")
        self.variable = variable
        self.rule_id = rule_id


class NotStratifiableError(AuditmonError):
    """Negation participates in a dependency cycle."""

    def __init__(self, cycle: list[str]):
        super().__init__("negative cycle through: " + " -> ".join(cycle))
        self.cycle = cycle


# --- engine ---------------------------------------------------------------

class NonGroundFactError(AuditmonError):
    """A fact contains a variable."""


class RevisionRegressionError(AuditmonError):
    """A fact's revision is too far ahead of the store's current revision."""


class ArithmeticOverflowError(AuditmonError):
    """Comparison-side addition left the signed 64-bit range."""


class UnknownPredicateError(AuditmonError):
    """Query or closure over a predicate the rule set / store never mentions."""


# --- identities and signing ------------------------------------------------

class DuplicatePrincipalError(AuditmonError):
    """A principal name is already registered."""


class UnknownPrincipalError(AuditmonError):
    """Signer is absent from the key registry."""


class KeyPrincipalMismatchError(AuditmonError):
    """Signing key does not belong to the event's sender."""


# --- audit log --------------------------------------------------------------

class IndexOutOfRangeError(AuditmonError, IndexError):
    """Leaf index not present in the log."""


class SizeOutOfRangeError(AuditmonError):
    """Requested tree size outside the log's history."""


class LogDecodeError(AuditmonError):
    """Persisted log bytes cannot be decoded."""


class LogUnavailableError(AuditmonError):
    """The common log cannot be reached (simulated outage)."""


# --- monitors ----------------------------------------------------------------

class NoJustificationError(AuditmonError):
    """Proof search found no derivation for the configured goal."""

    def __init__(self, goal: str):
        super().__init__(f"no justification for goal {goal}")
        self.goal = goal


class MissingInclusionProofError(AuditmonError):
    """A fact required for evidence is absent from the log."""


class MonitorConfigError(AuditmonError):
    """Monitor configuration violates its invariants."""


# --- partitioner ----------------------------------------------------------------

class UncoveredPredicateError(AuditmonError):
    """A base predicate is observed by no principal in the topology."""


# --- simulation -----------------------------------------------------------------

class ScenarioParseError(AuditmonError):
    """Scenario file malformed; message carries the offending location."""


class UnresolvedEventRefError(AuditmonError):
    """Fault references a script label that does not exist."""


class ScenarioHaltError(AuditmonError):
    """A monitor could not reach the log; the run stops with a diagnostic."""
