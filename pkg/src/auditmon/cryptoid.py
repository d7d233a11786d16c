"""Principal identities, canonical event serialization, Ed25519 signing.

Every inter-component message is an Event; its canonical byte encoding is
deterministic and injective on valid events, so a signature over those bytes
pins the message content.  Keypairs derive from 32-byte seeds to keep whole
simulation runs reproducible.  The registry is a flat name -> public key map
(self-signed setting; no certificate chains).

Encoding layout, all lengths/integers big-endian:
  string   = u32 length ++ UTF-8 bytes
  u64      = 8 bytes unsigned
  i64      = 8 bytes two's complement
  term     = tag u8 (0 sym, 1 int, 2 str) ++ payload
  atom     = string predicate ++ u64 arity ++ terms
  event    = u64 session ++ string kind ++ string path ++ atom payload
             ++ string sender ++ string receiver ++ u64 lamport ++ u64 wall
  signed   = event ++ string signer ++ bytes signature
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

from cryptography.exceptions import InvalidSignature
from cryptography.hazmat.primitives.asymmetric import ed25519

from .errors import (
    DuplicatePrincipalError,
    KeyPrincipalMismatchError,
    LogDecodeError,
    UnknownPrincipalError,
)
from .speclang import Atom, IntConst, StrConst, SymConst, Term

TAG_SYM = 0
TAG_INT = 1
TAG_STR = 2


@dataclass(frozen=True)
class Principal:
    name: str
    public_key: bytes

    def __post_init__(self):
        if not self.name:
            raise ValueError("principal name must be non-empty")


@dataclass(frozen=True)
class Event:
    session_id: int
    kind: str
    path: str
    payload: Atom
    sender: str
    receiver: str
    lamport_ts: int
    wall_ts: int

    def __post_init__(self):
        if self.sender == self.receiver:
            raise ValueError("event sender and receiver must differ")
        if not self.payload.is_ground():
            raise ValueError("event payload must be ground")


@dataclass(frozen=True)
class SignedEvent:
    event: Event
    signer: str
    signature: bytes


class SigningKey:
    """Private key handle confined to its owning simulated component."""

    def __init__(self, owner: str, private_key: ed25519.Ed25519PrivateKey):
        self.owner = owner
        self._key = private_key

    def sign(self, message: bytes) -> bytes:
        return self._key.sign(message)


class KeyRegistry:
    """Flat principal -> public key map; lookup total for scenario principals."""

    def __init__(self):
        self._keys: dict[str, bytes] = {}

    def __contains__(self, name: str) -> bool:
        return name in self._keys

    def __len__(self) -> int:
        return len(self._keys)

    def names(self) -> list[str]:
        return list(self._keys)

    def add(self, principal: Principal) -> None:
        if principal.name in self._keys:
            raise DuplicatePrincipalError(f"principal already registered: {principal.name}")
        self._keys[principal.name] = principal.public_key

    def public_key(self, name: str) -> bytes:
        try:
            return self._keys[name]
        except KeyError:
            raise UnknownPrincipalError(f"unknown principal: {name}") from None

    def to_text(self) -> str:
        return "".join(f"{name} {key.hex()}\n" for name, key in self._keys.items())

    @classmethod
    def from_text(cls, text: str) -> "KeyRegistry":
        reg = cls()
        for lineno, line in enumerate(text.splitlines(), start=1):
            line = line.strip()
            if not line:
                continue
            try:
                name, hexkey = line.split(" ")
                reg.add(Principal(name=name, public_key=bytes.fromhex(hexkey)))
            except ValueError as exc:
                raise LogDecodeError(f"bad registry line {lineno}: {line!r}") from exc
        return reg


def generate_principal(
    registry: KeyRegistry, name: str, seed: bytes
) -> tuple[Principal, SigningKey]:
    """Deterministic keypair from a 32-byte seed; registers the principal."""
    if len(seed) != 32:
        raise ValueError("seed must be exactly 32 bytes")
    private = ed25519.Ed25519PrivateKey.from_private_bytes(seed)
    public = private.public_key().public_bytes_raw()
    principal = Principal(name=name, public_key=public)
    registry.add(principal)
    return principal, SigningKey(owner=name, private_key=private)


# --- canonical encoding -------------------------------------------------


def encode_str(s: str) -> bytes:
    data = s.encode("utf-8")
    return struct.pack(">I", len(data)) + data


def encode_bytes(b: bytes) -> bytes:
    return struct.pack(">I", len(b)) + b


def encode_u64(n: int) -> bytes:
    return struct.pack(">Q", n)


def encode_i64(n: int) -> bytes:
    return struct.pack(">q", n)


def encode_term(t: Term) -> bytes:
    if isinstance(t, SymConst):
        return bytes([TAG_SYM]) + encode_str(t.name)
    if isinstance(t, IntConst):
        return bytes([TAG_INT]) + encode_i64(t.value)
    if isinstance(t, StrConst):
        return bytes([TAG_STR]) + encode_str(t.value)
    raise ValueError(f"only ground terms are encodable, got {t!r}")


def encode_atom(a: Atom) -> bytes:
    out = encode_str(a.predicate) + encode_u64(a.arity)
    for t in a.args:
        out += encode_term(t)
    return out


def canonical_bytes(e: Event) -> bytes:
    """Deterministic, injective-on-valid-events encoding of an event."""
    return (
        encode_u64(e.session_id)
        + encode_str(e.kind)
        + encode_str(e.path)
        + encode_atom(e.payload)
        + encode_str(e.sender)
        + encode_str(e.receiver)
        + encode_u64(e.lamport_ts)
        + encode_u64(e.wall_ts)
    )


def signed_event_bytes(se: SignedEvent) -> bytes:
    """Canonical bytes of the full signed event; the log's leaf/record payload."""
    return canonical_bytes(se.event) + encode_str(se.signer) + encode_bytes(se.signature)


# --- decoding (for log recovery and offline audit) -----------------------


class _Cursor:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise LogDecodeError("truncated record")
        out = self.data[self.pos : self.pos + n]
        self.pos += n
        return out

    def u32(self) -> int:
        return struct.unpack(">I", self.take(4))[0]

    def u64(self) -> int:
        return struct.unpack(">Q", self.take(8))[0]

    def i64(self) -> int:
        return struct.unpack(">q", self.take(8))[0]

    def string(self) -> str:
        n = self.u32()
        try:
            return self.take(n).decode("utf-8")
        except UnicodeDecodeError as exc:
            raise LogDecodeError("record string is not UTF-8") from exc

    def raw(self) -> bytes:
        return self.take(self.u32())


def _decode_term(c: _Cursor) -> Term:
    tag = c.take(1)[0]
    if tag == TAG_SYM:
        name = c.string()
        try:
            return SymConst(name)
        except ValueError as exc:
            raise LogDecodeError(str(exc)) from exc
    if tag == TAG_INT:
        return IntConst(c.i64())
    if tag == TAG_STR:
        return StrConst(c.string())
    raise LogDecodeError(f"bad term tag {tag}")


def _decode_atom(c: _Cursor) -> Atom:
    predicate = c.string()
    arity = c.u64()
    if arity > 64:
        raise LogDecodeError(f"implausible arity {arity}")
    args = tuple(_decode_term(c) for _ in range(arity))
    return Atom(predicate=predicate, args=args)


def decode_signed_event(data: bytes) -> SignedEvent:
    """Inverse of signed_event_bytes; raises LogDecodeError on malformed input."""
    c = _Cursor(data)
    try:
        event = Event(
            session_id=c.u64(),
            kind=c.string(),
            path=c.string(),
            payload=_decode_atom(c),
            sender=c.string(),
            receiver=c.string(),
            lamport_ts=c.u64(),
            wall_ts=c.u64(),
        )
    except ValueError as exc:
        raise LogDecodeError(str(exc)) from exc
    signer = c.string()
    signature = c.raw()
    if c.pos != len(data):
        raise LogDecodeError("trailing bytes after signed event")
    return SignedEvent(event=event, signer=signer, signature=signature)


# --- signing / verification ------------------------------------------------


def sign_event(key: SigningKey, e: Event) -> SignedEvent:
    """Sign the canonical bytes; the key must belong to the event sender."""
    if key.owner != e.sender:
        raise KeyPrincipalMismatchError(
            f"key owner {key.owner!r} cannot sign event from {e.sender!r}"
        )
    return SignedEvent(event=e, signer=key.owner, signature=key.sign(canonical_bytes(e)))


def forge_signature(key: SigningKey, e: Event, claimed_signer: str) -> SignedEvent:
    """Sign with the wrong key on purpose (fault injection only)."""
    return SignedEvent(event=e, signer=claimed_signer, signature=key.sign(canonical_bytes(e)))


def verify_event(registry: KeyRegistry, se: SignedEvent) -> bool:
    """True iff the signature is valid under the signer's registered key."""
    public = ed25519.Ed25519PublicKey.from_public_bytes(registry.public_key(se.signer))
    try:
        public.verify(se.signature, canonical_bytes(se.event))
        return True
    except InvalidSignature:
        return False
