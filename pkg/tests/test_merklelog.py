from __future__ import annotations

import hashlib
import math

import pytest

from auditmon.errors import IndexOutOfRangeError, LogDecodeError, SizeOutOfRangeError
from auditmon.merklelog import (
    EMPTY_ROOT,
    AuditLog,
    ConsistencyProof,
    MerkleAuditPath,
    TreeState,
    cross_audit,
    verify_consistency,
    verify_inclusion,
)


def H(data: bytes) -> bytes:
    return hashlib.sha256(data).digest()


def leaf_hash(record: bytes) -> bytes:
    return H(b"\x00" + record)


def node(left: bytes, right: bytes) -> bytes:
    return H(b"\x01" + left + right)


def make_log(n: int, salt: bytes = b"") -> AuditLog:
    log = AuditLog()
    for i in range(n):
        log.append_record(salt + f"record-{i}".encode())
    return log


def test_empty_log_root_is_hash_of_empty_string():
    assert AuditLog().root() == TreeState(size=0, root_hash=H(b""))
    assert AuditLog().root().root_hash == EMPTY_ROOT


def test_single_leaf_root_is_prefixed_leaf_hash():
    log = AuditLog()
    log.append_record(b"only")
    assert log.root().root_hash == leaf_hash(b"only")


def test_three_leaf_root_composition():
    records = [b"a", b"b", b"c"]
    log = AuditLog()
    for r in records:
        log.append_record(r)
    h0, h1, h2 = (leaf_hash(r) for r in records)
    assert log.root().root_hash == node(node(h0, h1), h2)


def test_append_returns_sequential_indices_and_stable_leaf_hashes():
    log = AuditLog()
    i0, l0 = log.append_record(b"same")
    i1, l1 = log.append_record(b"same")
    assert (i0, i1) == (0, 1)
    assert l0 == l1  # content-addressed leaves


def test_append_changes_root():
    log = make_log(3)
    before = log.root().root_hash
    log.append_record(b"new")
    assert log.root().root_hash != before


def test_append_preserves_old_internal_nodes():
    log = make_log(8)
    old_left = log._subtree_hash(0, 4)
    log.append_record(b"more")
    assert log._subtree_hash(0, 4) == old_left


def test_single_leaf_inclusion_proof_is_empty():
    log = make_log(1)
    path = log.inclusion_proof(0)
    assert path.siblings == ()
    assert verify_inclusion(log.root(), log.leaf_hash(0), path)


def test_four_leaf_index2_sibling_structure():
    log = make_log(4)
    h = [log.leaf_hash(i) for i in range(4)]
    path = log.inclusion_proof(2)
    assert path.siblings == ((h[3], "right"), (node(h[0], h[1]), "left"))


def test_inclusion_proof_index_out_of_range():
    log = make_log(4)
    with pytest.raises(IndexOutOfRangeError):
        log.inclusion_proof(4)


def test_inclusion_roundtrip_and_wrong_index_pairs():
    log = make_log(8)
    state = log.root()
    paths = [log.inclusion_proof(i) for i in range(8)]
    for i in range(8):
        assert verify_inclusion(state, log.leaf_hash(i), paths[i])
    for i in range(8):
        for j in range(8):
            if i != j:
                assert not verify_inclusion(state, log.leaf_hash(i), paths[j])


def test_inclusion_fails_on_flipped_sibling():
    log = make_log(5)
    path = log.inclusion_proof(3)
    bad = MerkleAuditPath(
        leaf_index=path.leaf_index,
        tree_size=path.tree_size,
        siblings=((bytes(32), path.siblings[0][1]), *path.siblings[1:]),
    )
    assert not verify_inclusion(log.root(), log.leaf_hash(3), bad)


def test_path_length_bound():
    for n in (1, 2, 3, 5, 8, 33, 100, 256):
        log = make_log(n)
        bound = math.ceil(math.log2(n)) if n > 1 else 0
        for i in range(n):
            assert len(log.inclusion_proof(i).siblings) <= bound


def test_consistency_equal_sizes_degenerates_to_root_equality():
    log = make_log(4)
    proof = log.consistency_proof(4, 4)
    assert proof.hashes == ()
    assert verify_consistency(log.root(), log.root(), proof)


def test_consistency_2_to_4():
    log = make_log(4)
    old = log.root_at(2)
    new = log.root_at(4)
    proof = log.consistency_proof(2, 4)
    assert verify_consistency(old, new, proof)
    # independently recompute both roots
    h = [log.leaf_hash(i) for i in range(4)]
    assert old.root_hash == node(h[0], h[1])
    assert new.root_hash == node(node(h[0], h[1]), node(h[2], h[3]))


def test_consistency_size_out_of_range():
    log = make_log(4)
    with pytest.raises(SizeOutOfRangeError):
        log.consistency_proof(5, 4)


def test_consistency_honest_prefix_pairs_exhaustive():
    log = make_log(16)
    for a in range(1, 17):
        for b in range(a, 17):
            proof = log.consistency_proof(a, b)
            assert verify_consistency(log.root_at(a), log.root_at(b), proof), (a, b)


def test_consistency_fails_when_prefix_rewritten():
    log = make_log(6)
    old = log.root_at(4)
    tampered = make_log(6)
    tampered.tamper_record(1, 0, 0xFF)
    proof = tampered.consistency_proof(4, 6)
    assert not verify_consistency(old, tampered.root(), proof)


def test_consistency_old_bigger_than_new_fails():
    log = make_log(6)
    proof = log.consistency_proof(2, 6)
    swapped = ConsistencyProof(old_size=6, new_size=2, hashes=proof.hashes)
    assert not verify_consistency(log.root_at(6), log.root_at(2), swapped)


def test_cross_audit_agreement():
    logs = [make_log(5) for _ in range(3)]
    assert cross_audit([l.root() for l in logs]) == []


def test_cross_audit_names_divergent_replica():
    logs = [make_log(5) for _ in range(3)]
    logs[2].tamper_record(1, 3, 0x10)
    report = cross_audit([l.root() for l in logs])
    assert len(report) == 1
    assert report[0].kind == "root_mismatch" and report[0].replicas == [2]


def test_cross_audit_size_mismatch_is_reported_not_raised():
    a, b = make_log(5), make_log(4)
    report = cross_audit([a.root(), b.root()])
    assert report[0].kind == "size_mismatch"


def test_disk_roundtrip():
    log = make_log(7)
    restored = AuditLog.from_bytes(log.to_bytes())
    assert restored.size == 7
    assert restored.root() == log.root()


def test_disk_decode_rejects_bad_magic():
    with pytest.raises(LogDecodeError):
        AuditLog.from_bytes(b"NOPE\x01")


def test_disk_decode_rejects_truncation():
    data = make_log(3).to_bytes()
    with pytest.raises(LogDecodeError):
        AuditLog.from_bytes(data[:-2])
