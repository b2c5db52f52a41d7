import pytest

from adaptsim.config import preset_path
from adaptsim.netprofile import (
    LinkSpec,
    NetProfile,
    ProfileError,
    load_profile,
    parse_profile,
)

SAMPLE = """
[link 0 1]
latency_ms = 10
jitter_ms = 2
bandwidth_mbps = 8

[link 1 0]
latency_ms = 15
bandwidth_mbps = unlimited

[lp 1]
cpu_slowdown = 2.5
"""


def test_parse_basic():
    prof = parse_profile(SAMPLE)
    spec = prof.link(0, 1)
    assert spec.latency_ns == 10_000_000
    assert spec.jitter_ns == 2_000_000
    assert spec.bandwidth_mbps == 8
    assert prof.link(1, 0).bandwidth_mbps is None
    assert prof.slowdown(1) == 2.5
    assert prof.slowdown(0) == 1.0


def test_serialization_delay():
    spec = LinkSpec(bandwidth_mbps=8.0)
    # 1000 bytes = 8000 bits at 8 Mbit/s -> 1 ms
    assert spec.serialization_ns(1000) == 1_000_000
    assert LinkSpec().serialization_ns(10 ** 6) == 0


def test_validate_missing_link():
    prof = parse_profile(SAMPLE)
    prof.validate(2)
    with pytest.raises(ProfileError):
        prof.validate(3)


def test_zero_profile_covers_everything():
    prof = NetProfile.zero(5)
    prof.validate(5)
    assert prof.link(0, 4).latency_ns == 0
    assert prof.slowdown(3) == 1.0


def test_asymmetric_pairs_allowed():
    prof = parse_profile(SAMPLE)
    assert prof.link(0, 1).latency_ns != prof.link(1, 0).latency_ns


@pytest.mark.parametrize("bad", [
    "[link 0 0]\nlatency_ms = 1",
    "[link 0 1]\nlatency_ms = -5",
    "[link 0 1]\nbandwidth_mbps = 0",
    "[lp 0]\ncpu_slowdown = 0.5",
    "[wat 1]\nx = 1",
])
def test_rejects_invalid_sections(bad):
    with pytest.raises(ProfileError):
        parse_profile(bad)


def test_testbed_paper_preset_values():
    # One-way latencies are the measured RTTs halved: the okeanos/linode-US
    # pair measured 218.7 ms RTT, so 109.35 ms one way.
    path = preset_path("testbed-paper")
    assert path is not None
    prof = load_profile(path)
    prof.validate(3)
    assert prof.link(0, 2).latency_ns == 109_350_000
    assert prof.link(0, 1).latency_ns == 184_850_000
    assert prof.link(1, 2).latency_ns == 121_050_000
    assert prof.link(2, 0).latency_ns == 106_500_000
    assert prof.link(0, 2).bandwidth_mbps == 6.47
    assert prof.link(1, 2).bandwidth_mbps == 1.41
    assert [prof.slowdown(i) for i in range(3)] == [1.0, 2.0, 3.0]
