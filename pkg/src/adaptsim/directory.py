"""Replicated entity->LP placement map and migration bookkeeping.

Every LP holds its own replica; replicas are updated only at step
boundaries by applying the step's announcement batch in canonical (entity
id) order, so they stay byte-identical everywhere. Only the current owner
may announce a migration.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

REASON_CLUSTERING = "clustering"
REASON_LOAD = "load"

#: last-migration sentinel for "never migrated"
NEVER_MIGRATED = 0xFFFFFFFFFFFFFFFF


class ProtocolViolation(Exception):
    """A peer (or this LP) broke the migration/step protocol."""


@dataclass(slots=True, frozen=True)
class MigrationIntent:
    se: int
    src: int
    dst: int
    decided_at: int
    reason: str


class Directory:
    """One LP's replica of the global placement map."""

    def __init__(self, num_entities: int, num_lps: int):
        self.num_entities = num_entities
        self.num_lps = num_lps
        # Bootstrap: dense round-robin assignment.
        self.owners = (np.arange(num_entities, dtype=np.uint64) % num_lps).astype(np.uint32)
        self.epoch = 0

    def lookup(self, se: int) -> int:
        if not 0 <= se < self.num_entities:
            raise ProtocolViolation(f"lookup of unknown entity id {se}")
        return int(self.owners[se])

    def owned_by(self, lp: int) -> np.ndarray:
        return np.nonzero(self.owners == lp)[0].astype(np.uint64)

    def counts(self) -> np.ndarray:
        return np.bincount(self.owners, minlength=self.num_lps).astype(np.int64)

    def apply_boundary_updates(self, announces, step: int) -> None:
        """Apply one step's announcement batch; advances the epoch to step+1.

        announces: iterable of MigrateAnnounce frames collected during `step`
        from all LPs (including this one's own).
        """
        batch = sorted(announces, key=lambda a: a.se)
        seen = set()
        for ann in batch:
            if ann.se in seen:
                raise ProtocolViolation(
                    f"conflicting announcements for entity {ann.se} at step {step}")
            seen.add(ann.se)
            if not 0 <= ann.se < self.num_entities:
                raise ProtocolViolation(f"announcement for unknown entity {ann.se}")
            owner = int(self.owners[ann.se])
            if owner != ann.src:
                raise ProtocolViolation(
                    f"announcement for entity {ann.se} names source LP {ann.src}, "
                    f"but LP {owner} owns it")
            if ann.dst == ann.src or not 0 <= ann.dst < self.num_lps:
                raise ProtocolViolation(
                    f"announcement for entity {ann.se} has invalid target {ann.dst}")
            self.owners[ann.se] = ann.dst
        self.epoch = step + 1

    def replica_bytes(self) -> bytes:
        return self.owners.tobytes()


# --- migrating entity state blob -------------------------------------------
#
# MIGRATE_DATA.state carries the model state (5 float64 big-endian: position,
# waypoint, speed) followed by the heuristic statistics that must travel with
# the entity: last-migration step and the interaction window (ring-aligned,
# bucket-major u32 counts).

_MODEL = struct.Struct(">5d")
_STATS_HEAD = struct.Struct(">QHH")


def pack_se_state(model_state, last_migration: int, window: np.ndarray) -> bytes:
    w, lps = window.shape
    counts = window.astype(">u4", copy=False).tobytes()
    return (_MODEL.pack(*model_state)
            + _STATS_HEAD.pack(last_migration, w, lps)
            + counts)


def unpack_se_state(blob: bytes):
    if len(blob) < _MODEL.size + _STATS_HEAD.size:
        raise ProtocolViolation(f"migration state blob of {len(blob)} bytes is truncated")
    model_state = _MODEL.unpack_from(blob, 0)
    last_mig, w, lps = _STATS_HEAD.unpack_from(blob, _MODEL.size)
    counts_off = _MODEL.size + _STATS_HEAD.size
    expect = w * lps * 4
    if len(blob) - counts_off != expect:
        raise ProtocolViolation(
            f"migration state blob: {len(blob) - counts_off} count bytes, expected {expect}")
    window = np.frombuffer(blob, dtype=">u4", offset=counts_off).reshape(w, lps)
    return model_state, last_mig, window.astype(np.uint32)
