import re
import struct
from pathlib import Path

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from adaptsim import frames

DOCS = Path(__file__).resolve().parent.parent / "docs" / "protocol.md"

GOLDEN_FRAMES = {
    "hello": frames.Hello(version=1, lp=2, num_lps=3, seed=0xDEADBEEF),
    "event": frames.Event(step=7, sender=42, seq=0, dest=frames.BROADCAST_DEST,
                          payload=struct.pack(">dd", 100.0, 200.0)),
    "step_done": frames.StepDone(step=7, sent_count=5, busy_nanos=1_000_000,
                                 se_count=1000),
    "migrate_announce": frames.MigrateAnnounce(step=9, se=4, src=0, dst=2),
    "migrate_data": frames.MigrateData(
        step=9, se=4, state=struct.pack(">5d", 1.5, 2.5, 3.5, 4.5, 5.0)),
    "bye": frames.Bye(step=0),
}


def load_golden_vectors():
    text = DOCS.read_text()
    block = re.search(r"```golden-vectors\n(.*?)```", text, re.S).group(1)
    vectors = {}
    lines = [ln for ln in block.splitlines() if ln.strip()]
    for name_line, hex_line in zip(lines[::2], lines[1::2]):
        name = name_line.split(":", 1)[0].strip()
        vectors[name] = bytes.fromhex(hex_line.replace(" ", ""))
    return vectors


def test_golden_vectors_cover_every_kind():
    vectors = load_golden_vectors()
    assert set(vectors) == set(GOLDEN_FRAMES)


@pytest.mark.parametrize("name", sorted(GOLDEN_FRAMES))
def test_golden_vector_decode_and_encode(name):
    vectors = load_golden_vectors()
    raw = vectors[name]
    frame = GOLDEN_FRAMES[name]
    assert frames.decode_frame(raw) == frame
    assert frames.encode_frame(frame) == raw


def test_bye_vector_matches_hand_assembly():
    # length=9 covers kind(1)+step(8)
    assert frames.encode_frame(frames.Bye(step=0)) == bytes.fromhex(
        "00000009 06 0000000000000000".replace(" ", ""))


# -- round-trip property ------------------------------------------------------

u8 = st.integers(0, 0xFF)
u16 = st.integers(0, 0xFFFF)
u32 = st.integers(0, 0xFFFFFFFF)
u64 = st.integers(0, 0xFFFFFFFFFFFFFFFF)
payloads = st.binary(max_size=frames.MAX_PAYLOAD_LEN)

frame_strategy = st.one_of(
    st.builds(frames.Hello, version=u16, lp=u32, num_lps=u32, seed=u64),
    st.builds(frames.Event, step=u64, sender=u64, seq=u32,
              dest=st.one_of(u64, st.just(frames.BROADCAST_DEST)),
              payload=payloads),
    st.builds(frames.StepDone, step=u64, sent_count=u32, busy_nanos=u64,
              se_count=u32),
    st.builds(frames.MigrateAnnounce, step=u64, se=u64, src=u32, dst=u32).filter(
        lambda f: f.src != f.dst),
    st.builds(frames.MigrateData, step=u64, se=u64, state=st.binary(max_size=2048)),
    st.builds(frames.Bye, step=u64),
)


@settings(max_examples=500)
@given(frame_strategy)
def test_roundtrip(frame):
    raw = frames.encode_frame(frame)
    assert frames.decode_frame(raw) == frame
    assert len(raw) == frames.encoded_size(frame)


# -- malformed input ----------------------------------------------------------

def test_truncated_input():
    raw = frames.encode_frame(frames.Bye(step=7))
    for cut in range(len(raw)):
        with pytest.raises(frames.FrameDecodeError):
            frames.decode_frame(raw[:cut])


def test_unknown_kind():
    raw = bytearray(frames.encode_frame(frames.Bye(step=7)))
    raw[4] = 0x7F
    with pytest.raises(frames.UnknownKindError):
        frames.decode_frame(bytes(raw))


def test_oversize_length_rejected_before_allocation():
    header = (2 ** 31).to_bytes(4, "big") + b"\x02"
    with pytest.raises(frames.OversizeFrameError):
        frames.decode_frame(header)
    with pytest.raises(frames.OversizeFrameError):
        frames.check_length(2 ** 31)


def test_trailing_bytes_rejected():
    raw = frames.encode_frame(frames.Bye(step=7)) + b"x"
    with pytest.raises(frames.FrameDecodeError):
        frames.decode_frame(raw)


def test_payload_length_mismatch():
    ev = frames.encode_frame(frames.Event(step=1, sender=2, seq=0, dest=3,
                                          payload=b"abcd"))
    clipped = ev[:-1]
    fixed = (len(clipped) - 4).to_bytes(4, "big") + clipped[4:]
    with pytest.raises(frames.FrameDecodeError):
        frames.decode_frame(fixed)


def test_encode_rejects_oversize_payload():
    with pytest.raises(frames.FrameEncodeError):
        frames.encode_frame(frames.Event(step=0, sender=0, seq=0, dest=0,
                                         payload=b"x" * 1025))


def test_encode_rejects_self_migration():
    with pytest.raises(frames.FrameEncodeError):
        frames.encode_frame(frames.MigrateAnnounce(step=0, se=1, src=2, dst=2))


def test_encode_rejects_out_of_range_fields():
    with pytest.raises(frames.FrameEncodeError):
        frames.encode_frame(frames.StepDone(step=-1, sent_count=0,
                                            busy_nanos=0, se_count=0))


@settings(max_examples=300)
@given(frame_strategy, st.data())
def test_mutation_fuzz_never_crashes(frame, data):
    raw = bytearray(frames.encode_frame(frame))
    n_flips = data.draw(st.integers(1, 8))
    for _ in range(n_flips):
        pos = data.draw(st.integers(0, len(raw) - 1))
        raw[pos] ^= data.draw(st.integers(1, 255))
    try:
        decoded = frames.decode_frame(bytes(raw))
    except frames.FrameDecodeError:
        return
    # Valid-after-mutation frames must re-encode consistently.
    assert frames.decode_frame(frames.encode_frame(decoded)) == decoded
