"""Wire protocol: length-prefixed binary frames, big-endian.

Layout (see docs/protocol.md for golden byte vectors):

    length: u32   bytes after this field (= 1 kind byte + body)
    kind:   u8
    body:   kind-specific, fixed layouts below

All integers are unsigned big-endian. The codec is strict: a frame must
decode to exactly the bytes that encode it, and malformed input raises a
``FrameDecodeError`` subclass rather than crashing.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

KIND_HELLO = 1
KIND_EVENT = 2
KIND_STEP_DONE = 3
KIND_MIGRATE_ANNOUNCE = 4
KIND_MIGRATE_DATA = 5
KIND_BYE = 6

PROTOCOL_VERSION = 1

#: EVENT dest value meaning "all entities in range of the sender".
BROADCAST_DEST = 0xFFFFFFFFFFFFFFFF

MAX_PAYLOAD_LEN = 1024
MAX_STATE_LEN = 1 << 20
# Largest legal frame length field (kind byte + biggest body).
MAX_FRAME_LEN = 1 + 8 + 8 + 4 + MAX_STATE_LEN


class FrameError(Exception):
    """Base class for codec errors."""


class FrameEncodeError(FrameError):
    """Body violates its invariants."""


class FrameDecodeError(FrameError):
    """Base class for malformed input."""


class UnknownKindError(FrameDecodeError):
    pass


class TruncatedFrameError(FrameDecodeError):
    pass


class OversizeFrameError(FrameDecodeError):
    pass


class BodyFormatError(FrameDecodeError):
    pass


@dataclass(slots=True)
class Hello:
    version: int
    lp: int
    num_lps: int
    seed: int
    kind = KIND_HELLO


@dataclass(slots=True)
class Event:
    step: int
    sender: int
    seq: int
    dest: int
    payload: bytes = b""
    kind = KIND_EVENT


@dataclass(slots=True)
class StepDone:
    step: int
    sent_count: int
    busy_nanos: int
    se_count: int
    kind = KIND_STEP_DONE


@dataclass(slots=True)
class MigrateAnnounce:
    step: int
    se: int
    src: int
    dst: int
    kind = KIND_MIGRATE_ANNOUNCE


@dataclass(slots=True)
class MigrateData:
    step: int
    se: int
    state: bytes = b""
    kind = KIND_MIGRATE_DATA


@dataclass(slots=True)
class Bye:
    step: int
    kind = KIND_BYE


_HELLO = struct.Struct(">HIIQ")
_EVENT_HEAD = struct.Struct(">QQIQH")
_STEP_DONE = struct.Struct(">QIQI")
_ANNOUNCE = struct.Struct(">QQII")
_DATA_HEAD = struct.Struct(">QQI")
_BYE = struct.Struct(">Q")
_PREFIX = struct.Struct(">IB")


def encoded_size(frame) -> int:
    """Total bytes on the wire including the length prefix."""
    kind = frame.kind
    if kind == KIND_HELLO:
        body = _HELLO.size
    elif kind == KIND_EVENT:
        body = _EVENT_HEAD.size + len(frame.payload)
    elif kind == KIND_STEP_DONE:
        body = _STEP_DONE.size
    elif kind == KIND_MIGRATE_ANNOUNCE:
        body = _ANNOUNCE.size
    elif kind == KIND_MIGRATE_DATA:
        body = _DATA_HEAD.size + len(frame.state)
    elif kind == KIND_BYE:
        body = _BYE.size
    else:
        raise FrameEncodeError(f"unknown frame kind {kind!r}")
    return 4 + 1 + body


def encode_frame(frame) -> bytes:
    """Serialize a frame, validating its body invariants."""
    kind = frame.kind
    try:
        if kind == KIND_HELLO:
            body = _HELLO.pack(frame.version, frame.lp, frame.num_lps, frame.seed)
        elif kind == KIND_EVENT:
            if len(frame.payload) > MAX_PAYLOAD_LEN:
                raise FrameEncodeError(
                    f"payload of {len(frame.payload)} bytes exceeds {MAX_PAYLOAD_LEN}")
            body = _EVENT_HEAD.pack(frame.step, frame.sender, frame.seq,
                                    frame.dest, len(frame.payload)) + frame.payload
        elif kind == KIND_STEP_DONE:
            body = _STEP_DONE.pack(frame.step, frame.sent_count,
                                   frame.busy_nanos, frame.se_count)
        elif kind == KIND_MIGRATE_ANNOUNCE:
            if frame.src == frame.dst:
                raise FrameEncodeError("migration source equals target")
            body = _ANNOUNCE.pack(frame.step, frame.se, frame.src, frame.dst)
        elif kind == KIND_MIGRATE_DATA:
            if len(frame.state) > MAX_STATE_LEN:
                raise FrameEncodeError(
                    f"state of {len(frame.state)} bytes exceeds {MAX_STATE_LEN}")
            body = _DATA_HEAD.pack(frame.step, frame.se, len(frame.state)) + frame.state
        elif kind == KIND_BYE:
            body = _BYE.pack(frame.step)
        else:
            raise FrameEncodeError(f"unknown frame kind {kind!r}")
    except struct.error as exc:
        raise FrameEncodeError(f"field out of range: {exc}") from exc
    return _PREFIX.pack(1 + len(body), kind) + body


def check_length(length: int) -> None:
    """Validate a length prefix before allocating the body buffer."""
    if length < 1:
        raise BodyFormatError(f"frame length {length} below minimum")
    if length > MAX_FRAME_LEN:
        raise OversizeFrameError(f"frame length {length} exceeds {MAX_FRAME_LEN}")


def decode_frame(data: bytes):
    """Inverse of encode_frame; expects exactly one complete frame."""
    if len(data) < 5:
        raise TruncatedFrameError(f"{len(data)} bytes is too short for any frame")
    length, kind = _PREFIX.unpack_from(data)
    check_length(length)
    if len(data) - 4 != length:
        raise TruncatedFrameError(
            f"length field says {length} bytes, buffer holds {len(data) - 4}")
    return decode_body(kind, data[5:])


def decode_body(kind: int, body: bytes):
    """Decode a frame body given its kind tag."""
    try:
        if kind == KIND_HELLO:
            _expect(body, _HELLO.size)
            return Hello(*_HELLO.unpack(body))
        if kind == KIND_EVENT:
            if len(body) < _EVENT_HEAD.size:
                raise TruncatedFrameError("event header truncated")
            step, sender, seq, dest, plen = _EVENT_HEAD.unpack_from(body)
            if plen > MAX_PAYLOAD_LEN:
                raise OversizeFrameError(f"payload length {plen} exceeds {MAX_PAYLOAD_LEN}")
            payload = body[_EVENT_HEAD.size:]
            if len(payload) != plen:
                raise BodyFormatError(
                    f"payload length field {plen} != actual {len(payload)}")
            return Event(step, sender, seq, dest, payload)
        if kind == KIND_STEP_DONE:
            _expect(body, _STEP_DONE.size)
            return StepDone(*_STEP_DONE.unpack(body))
        if kind == KIND_MIGRATE_ANNOUNCE:
            _expect(body, _ANNOUNCE.size)
            frame = MigrateAnnounce(*_ANNOUNCE.unpack(body))
            if frame.src == frame.dst:
                raise BodyFormatError("migration source equals target")
            return frame
        if kind == KIND_MIGRATE_DATA:
            if len(body) < _DATA_HEAD.size:
                raise TruncatedFrameError("migrate-data header truncated")
            step, se, slen = _DATA_HEAD.unpack_from(body)
            if slen > MAX_STATE_LEN:
                raise OversizeFrameError(f"state length {slen} exceeds {MAX_STATE_LEN}")
            state = body[_DATA_HEAD.size:]
            if len(state) != slen:
                raise BodyFormatError(f"state length field {slen} != actual {len(state)}")
            return MigrateData(step, se, state)
        if kind == KIND_BYE:
            _expect(body, _BYE.size)
            return Bye(*_BYE.unpack(body))
    except struct.error as exc:
        raise TruncatedFrameError(str(exc)) from exc
    raise UnknownKindError(f"unknown frame kind {kind:#x}")


def _expect(body: bytes, size: int) -> None:
    if len(body) != size:
        raise TruncatedFrameError(f"body of {len(body)} bytes, expected {size}")
