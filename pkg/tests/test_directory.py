import numpy as np
import pytest

from adaptsim.directory import (
    NEVER_MIGRATED,
    Directory,
    ProtocolViolation,
    pack_se_state,
    unpack_se_state,
)
from adaptsim.frames import MigrateAnnounce


def test_bootstrap_round_robin():
    d = Directory(9, 3)
    # dense assignment: entity 4 -> LP 1
    assert d.lookup(4) == 1
    assert [d.lookup(i) for i in range(9)] == [0, 1, 2, 0, 1, 2, 0, 1, 2]
    assert list(d.counts()) == [3, 3, 3]


def test_lookup_is_read_only():
    d = Directory(9, 3)
    assert d.lookup(4) == d.lookup(4)


def test_lookup_unknown_entity_fatal():
    d = Directory(9, 3)
    with pytest.raises(ProtocolViolation):
        d.lookup(9)
    with pytest.raises(ProtocolViolation):
        d.lookup(-1)


def test_apply_updates_replicate_identically():
    replicas = [Directory(9, 3) for _ in range(3)]
    ann = [MigrateAnnounce(step=5, se=4, src=1, dst=2)]
    for d in replicas:
        d.apply_boundary_updates(ann, 5)
    assert all(d.lookup(4) == 2 for d in replicas)
    assert len({d.replica_bytes() for d in replicas}) == 1
    assert all(d.epoch == 6 for d in replicas)


def test_empty_batch_advances_epoch_only():
    d = Directory(9, 3)
    before = d.replica_bytes()
    d.apply_boundary_updates([], 0)
    assert d.replica_bytes() == before
    assert d.epoch == 1


def test_opposite_migrations_conserve_counts():
    d = Directory(12, 2)
    anns = [MigrateAnnounce(step=1, se=0, src=0, dst=1),
            MigrateAnnounce(step=1, se=1, src=1, dst=0)]
    before = list(d.counts())
    d.apply_boundary_updates(anns, 1)
    assert list(d.counts()) == before
    assert int(d.counts().sum()) == 12


def test_non_owner_announcement_aborts():
    d = Directory(9, 3)
    # entity 4 is owned by LP 1, not LP 0
    with pytest.raises(ProtocolViolation):
        d.apply_boundary_updates([MigrateAnnounce(step=1, se=4, src=0, dst=2)], 1)


def test_conflicting_announcements_abort():
    d = Directory(9, 3)
    anns = [MigrateAnnounce(step=1, se=4, src=1, dst=2),
            MigrateAnnounce(step=1, se=4, src=1, dst=0)]
    with pytest.raises(ProtocolViolation):
        d.apply_boundary_updates(anns, 1)


def test_canonical_application_order():
    # Batches apply sorted by entity id regardless of input order.
    a, b = Directory(6, 3), Directory(6, 3)
    anns = [MigrateAnnounce(step=1, se=5, src=2, dst=0),
            MigrateAnnounce(step=1, se=1, src=1, dst=2)]
    a.apply_boundary_updates(anns, 1)
    b.apply_boundary_updates(list(reversed(anns)), 1)
    assert a.replica_bytes() == b.replica_bytes()


def test_se_state_blob_roundtrip():
    model_state = (1234.5, 987.0, 42.25, 10000.0 - 1e-9, 3.5)
    window = np.arange(16 * 3, dtype=np.uint32).reshape(16, 3)
    blob = pack_se_state(model_state, 77, window)
    got_state, got_last, got_window = unpack_se_state(blob)
    assert got_state == model_state
    assert got_last == 77
    assert (got_window == window).all()


def test_se_state_blob_never_migrated_sentinel():
    window = np.zeros((4, 2), dtype=np.uint32)
    blob = pack_se_state((0.0, 0.0, 0.0, 0.0, 1.0), NEVER_MIGRATED, window)
    _, last, _ = unpack_se_state(blob)
    assert last == NEVER_MIGRATED


def test_se_state_blob_truncation_rejected():
    window = np.zeros((4, 2), dtype=np.uint32)
    blob = pack_se_state((0.0, 0.0, 0.0, 0.0, 1.0), 0, window)
    with pytest.raises(ProtocolViolation):
        unpack_se_state(blob[:-1])
    with pytest.raises(ProtocolViolation):
        unpack_se_state(blob[:10])
