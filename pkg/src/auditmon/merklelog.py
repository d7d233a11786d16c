"""Append-only Merkle log with inclusion and consistency proofs.

The tree follows the transparency-log construction: leaves are hashed with a
0x00 prefix, interior nodes with 0x01, and an n-leaf tree splits at the
largest power of two strictly below n.  The empty log's root is H("").
Replicated logs are compared with cross_audit; a replica presenting a
different history for the same size is named in the divergence report.

On-disk format: magic ``ADTL`` + version byte 1, then length-prefixed
records (u32 big-endian length, record bytes).  Records are canonical
signed-event bytes, so recovery rebuilds the identical tree.
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass

from .errors import IndexOutOfRangeError, LogDecodeError, LogUnavailableError, SizeOutOfRangeError
from .cryptoid import SignedEvent, decode_signed_event, signed_event_bytes

LEAF_PREFIX = b"\x00"
NODE_PREFIX = b"\x01"
EMPTY_ROOT = hashlib.sha256(b"").digest()

LOG_MAGIC = b"ADTL"
LOG_VERSION = 1
TREE_HEAD_PREFIX = b"ADTL-HEAD"

LEFT = "left"
RIGHT = "right"


def tree_head_bytes(size: int, root_hash: bytes) -> bytes:
    """Byte string a log signer commits to when checkpointing a tree head."""
    return TREE_HEAD_PREFIX + struct.pack(">Q", size) + root_hash


@dataclass(frozen=True)
class TreeState:
    size: int
    root_hash: bytes


@dataclass(frozen=True)
class MerkleAuditPath:
    leaf_index: int
    tree_size: int
    siblings: tuple[tuple[bytes, str], ...]  # (hash, side of the sibling)


@dataclass(frozen=True)
class ConsistencyProof:
    old_size: int
    new_size: int
    hashes: tuple[bytes, ...]


@dataclass
class Divergence:
    kind: str  # "root_mismatch" | "size_mismatch"
    replicas: list[int]
    detail: str


def _largest_power_of_two_below(n: int) -> int:
    if n < 2:
        raise ValueError("need n >= 2")
    k = 1
    while k * 2 < n:
        k *= 2
    return k


class AuditLog:
    """Single-writer append-only log; reads and proofs are side-effect free."""

    def __init__(self):
        self._records: list[bytes] = []
        self._leaf_hashes: list[bytes] = []
        self._node_cache: dict[tuple[int, int], bytes] = {}
        self.hash_count = 0
        self.bytes_appended = 0
        self.available = True

    @property
    def size(self) -> int:
        return len(self._records)

    def _hash_leaf(self, data: bytes) -> bytes:
        self.hash_count += 1
        return hashlib.sha256(LEAF_PREFIX + data).digest()

    def _hash_node(self, left: bytes, right: bytes) -> bytes:
        self.hash_count += 1
        return hashlib.sha256(NODE_PREFIX + left + right).digest()

    def append(self, se: SignedEvent) -> tuple[int, bytes]:
        """Append a signed event; returns (index, leaf hash)."""
        return self.append_record(signed_event_bytes(se))

    def append_record(self, record: bytes) -> tuple[int, bytes]:
        if not self.available:
            raise LogUnavailableError("log replica is unreachable")
        index = len(self._records)
        leaf = self._hash_leaf(record)
        self._records.append(record)
        self._leaf_hashes.append(leaf)
        self.bytes_appended += len(record)
        return index, leaf

    def record(self, index: int) -> bytes:
        if not (0 <= index < self.size):
            raise IndexOutOfRangeError(f"index {index} outside log of size {self.size}")
        return self._records[index]

    def entry(self, index: int) -> SignedEvent:
        return decode_signed_event(self.record(index))

    def leaf_hash(self, index: int) -> bytes:
        if not (0 <= index < self.size):
            raise IndexOutOfRangeError(f"index {index} outside log of size {self.size}")
        return self._leaf_hashes[index]

    # --- tree math ------------------------------------------------------

    def _subtree_hash(self, start: int, end: int) -> bytes:
        """Root of the subtree over leaves [start, end)."""
        if end - start == 1:
            return self._leaf_hashes[start]
        key = (start, end)
        cached = self._node_cache.get(key)
        if cached is not None:
            return cached
        k = _largest_power_of_two_below(end - start)
        value = self._hash_node(
            self._subtree_hash(start, start + k), self._subtree_hash(start + k, end)
        )
        self._node_cache[key] = value
        return value

    def root_at(self, size: int) -> TreeState:
        if not (0 <= size <= self.size):
            raise SizeOutOfRangeError(f"size {size} outside log of size {self.size}")
        if size == 0:
            return TreeState(size=0, root_hash=EMPTY_ROOT)
        return TreeState(size=size, root_hash=self._subtree_hash(0, size))

    def root(self) -> TreeState:
        return self.root_at(self.size)

    def inclusion_proof(self, index: int, tree_size: int | None = None) -> MerkleAuditPath:
        size = self.size if tree_size is None else tree_size
        if not (0 <= index < size <= self.size):
            raise IndexOutOfRangeError(
                f"index {index} outside tree of size {size} (log holds {self.size})"
            )
        siblings: list[tuple[bytes, str]] = []

        def walk(i: int, start: int, end: int) -> None:
            if end - start == 1:
                return
            k = _largest_power_of_two_below(end - start)
            if i < start + k:
                walk(i, start, start + k)
                siblings.append((self._subtree_hash(start + k, end), RIGHT))
            else:
                walk(i, start + k, end)
                siblings.append((self._subtree_hash(start, start + k), LEFT))

        walk(index, 0, size)
        # Recursion appends root-level siblings last; report leaf-to-root order.
        return MerkleAuditPath(leaf_index=index, tree_size=size, siblings=tuple(siblings))

    def consistency_proof(self, old_size: int, new_size: int | None = None) -> ConsistencyProof:
        new = self.size if new_size is None else new_size
        if not (0 < old_size <= new <= self.size):
            raise SizeOutOfRangeError(
                f"need 0 < old ({old_size}) <= new ({new}) <= log size ({self.size})"
            )

        def subproof(m: int, start: int, end: int, complete: bool) -> list[bytes]:
            n = end - start
            if m == n:
                return [] if complete else [self._subtree_hash(start, end)]
            k = _largest_power_of_two_below(n)
            if m <= k:
                return subproof(m, start, start + k, complete) + [
                    self._subtree_hash(start + k, end)
                ]
            return subproof(m - k, start + k, end, False) + [
                self._subtree_hash(start, start + k)
            ]

        hashes = [] if old_size == new else subproof(old_size, 0, new, True)
        return ConsistencyProof(old_size=old_size, new_size=new, hashes=tuple(hashes))

    # --- fault injection hook ------------------------------------------

    def tamper_record(self, index: int, byte_offset: int, xor_mask: int) -> None:
        """Flip bits of a stored record in place (simulated corruption)."""
        record = bytearray(self.record(index))
        byte_offset %= len(record)
        record[byte_offset] ^= xor_mask & 0xFF
        self._records[index] = bytes(record)
        self._leaf_hashes[index] = self._hash_leaf(bytes(record))
        self._node_cache.clear()

    # --- persistence -----------------------------------------------------

    def to_bytes(self) -> bytes:
        out = [LOG_MAGIC, bytes([LOG_VERSION])]
        for record in self._records:
            out.append(struct.pack(">I", len(record)))
            out.append(record)
        return b"".join(out)

    @classmethod
    def from_bytes(cls, data: bytes) -> "AuditLog":
        if data[:4] != LOG_MAGIC:
            raise LogDecodeError("bad log magic")
        if len(data) < 5 or data[4] != LOG_VERSION:
            raise LogDecodeError("unsupported log version")
        log = cls()
        pos = 5
        while pos < len(data):
            if pos + 4 > len(data):
                raise LogDecodeError("truncated record length")
            (length,) = struct.unpack(">I", data[pos : pos + 4])
            pos += 4
            if pos + length > len(data):
                raise LogDecodeError("truncated record body")
            log.append_record(data[pos : pos + length])
            pos += length
        return log


# --- verification (stateless; runnable by a third party) ---------------------


def expected_sides(index: int, size: int) -> list[str]:
    """Sibling sides for a leaf, leaf-to-root, derived from index and size."""
    sides: list[str] = []
    start, end = 0, size
    while end - start > 1:
        k = _largest_power_of_two_below(end - start)
        if index < start + k:
            sides.append(RIGHT)
            end = start + k
        else:
            sides.append(LEFT)
            start = start + k
    sides.reverse()
    return sides


def verify_inclusion(state: TreeState, leaf_hash: bytes, path: MerkleAuditPath) -> bool:
    """Recompute the root from the leaf via the sibling path."""
    if path.tree_size != state.size or not (0 <= path.leaf_index < path.tree_size):
        return False
    if state.size == 0:
        return False
    if [s for _, s in path.siblings] != expected_sides(path.leaf_index, path.tree_size):
        return False
    computed = leaf_hash
    for sibling, side in path.siblings:
        if side == RIGHT:
            computed = hashlib.sha256(NODE_PREFIX + computed + sibling).digest()
        else:
            computed = hashlib.sha256(NODE_PREFIX + sibling + computed).digest()
    return computed == state.root_hash


def verify_consistency(old: TreeState, new: TreeState, proof: ConsistencyProof) -> bool:
    """True iff `old` is a prefix commitment of `new` under `proof`."""
    if proof.old_size != old.size or proof.new_size != new.size:
        return False
    if old.size > new.size:
        return False
    if old.size == new.size:
        return not proof.hashes and old.root_hash == new.root_hash
    if old.size == 0:
        return not proof.hashes and old.root_hash == EMPTY_ROOT
    hashes = list(proof.hashes)
    if not hashes:
        return False
    if old.size & (old.size - 1) == 0:  # power of two: old root is implicit
        hashes.insert(0, old.root_hash)
    fn, sn = old.size - 1, new.size - 1
    while fn & 1:
        fn >>= 1
        sn >>= 1
    fr = sr = hashes[0]
    for h in hashes[1:]:
        if sn == 0:
            return False
        if fn & 1 or fn == sn:
            fr = hashlib.sha256(NODE_PREFIX + h + fr).digest()
            sr = hashlib.sha256(NODE_PREFIX + h + sr).digest()
            while fn != 0 and not (fn & 1):
                fn >>= 1
                sn >>= 1
        else:
            sr = hashlib.sha256(NODE_PREFIX + sr + h).digest()
        fn >>= 1
        sn >>= 1
    return fr == old.root_hash and sr == new.root_hash and sn == 0


def cross_audit(states: list[TreeState]) -> list[Divergence]:
    """Compare replica tree heads; an empty report means full agreement.

    Disagreeing replicas are those differing from the majority value (ties
    broken toward the lowest-index replica), so a single corrupted replica
    is named rather than the honest ones.
    """
    if len(states) < 2:
        raise ValueError("cross audit needs at least two replica states")
    report: list[Divergence] = []
    indexed = list(enumerate(states))

    def majority(values: list[tuple[int, object]]) -> object:
        counts: dict[object, tuple[int, int]] = {}
        for i, v in values:
            count, first = counts.get(v, (0, i))
            counts[v] = (count + 1, first)
        return max(counts, key=lambda v: (counts[v][0], -counts[v][1]))

    sizes = [(i, s.size) for i, s in indexed]
    ref_size = majority(sizes)
    off = [i for i, size in sizes if size != ref_size]
    if off:
        # Size disagreement is itself a divergence, reported not raised.
        report.append(
            Divergence(
                kind="size_mismatch",
                replicas=off,
                detail=f"sizes {[s.size for s in states]}, majority {ref_size}",
            )
        )
        indexed = [(i, s) for i, s in indexed if s.size == ref_size]
        if len(indexed) < 2:
            return report
    roots = [(i, s.root_hash) for i, s in indexed]
    ref_root = majority(roots)
    off = [i for i, root in roots if root != ref_root]
    if off:
        report.append(
            Divergence(
                kind="root_mismatch",
                replicas=off,
                detail=f"{len(off)} of {len(states)} replicas disagree with the majority root",
            )
        )
    return report
