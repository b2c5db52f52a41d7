import math

import numpy as np
import pytest

from adaptsim import core
from adaptsim.manet import (
    ManetPartition,
    ModelConfig,
    choose_broadcasters,
    initial_state,
    pack_ping_payload,
    rwp_step,
    unpack_ping_payload,
)

CFG = ModelConfig(num_mh=100, steps=10)
SEED = 909


def test_exact_arrival_lands_on_waypoint():
    pos, wp, spd = rwp_step(1, (0.0, 0.0), (3.0, 4.0), 5.0, 3, SEED, CFG)
    assert pos == (3.0, 4.0)
    # arrival redraws waypoint and speed from the per-step stream
    stream = core.derive_stream(SEED, 1, core.PURPOSE_WAYPOINT, 3)
    assert wp == (stream.next_float() * CFG.arena_w,
                  stream.next_float() * CFG.arena_h)
    assert spd == CFG.speed_min + stream.next_float() * (CFG.speed_max - CFG.speed_min)


def test_axis_aligned_motion():
    pos, wp, spd = rwp_step(1, (0.0, 0.0), (0.0, 100.0), 5.0, 3, SEED, CFG)
    assert pos == (0.0, 5.0)
    assert wp == (0.0, 100.0)
    assert spd == 5.0


def test_wraparound_shortest_path():
    pos, _, _ = rwp_step(1, (9998.0, 0.0), (4.0, 0.0), 5.0, 3, SEED, CFG)
    assert pos[0] == pytest.approx(3.0)
    assert pos[1] == 0.0


def test_initial_state_inside_arena_and_deterministic():
    a = initial_state(17, SEED, CFG)
    b = initial_state(17, SEED, CFG)
    assert a == b
    (x, y), (wx, wy), spd = a
    assert 0 <= x < CFG.arena_w and 0 <= y < CFG.arena_h
    assert 0 <= wx < CFG.arena_w and 0 <= wy < CFG.arena_h
    assert CFG.speed_min <= spd <= CFG.speed_max


def test_positions_stay_in_arena_over_run():
    part = ManetPartition(ModelConfig(num_mh=500, steps=500), SEED,
                          np.arange(500, dtype=np.uint64), 1, 16)
    for step in range(500):
        part.advance(step)
        assert (part.x >= 0).all() and (part.x < 10000.0).all()
        assert (part.y >= 0).all() and (part.y < 10000.0).all()
        assert (part.speed >= 1.0).all() and (part.speed <= 5.0).all()


def test_broadcasters_certainty():
    assert choose_broadcasters(50, 1.0, 3, SEED).size == 50


def test_broadcasters_binomial_band():
    # mean subset size over 500 steps stays within 3 sigma of N * fraction
    n, fraction = 12000, 0.2
    sizes = [choose_broadcasters(n, fraction, step, SEED).size
             for step in range(500)]
    mean = sum(sizes) / len(sizes)
    sigma = math.sqrt(n * fraction * (1 - fraction))  # ~43.8 per step
    assert abs(mean - n * fraction) < 3 * sigma / math.sqrt(len(sizes))


def test_broadcasters_placement_independent():
    whole = set(choose_broadcasters(100, 0.2, 7, SEED).tolist())
    part_a = ManetPartition(CFG, SEED, np.arange(0, 50, dtype=np.uint64), 2, 16)
    part_b = ManetPartition(CFG, SEED, np.arange(50, 100, dtype=np.uint64), 2, 16)
    ids_a, _, _ = part_a.broadcasters(7)
    ids_b, _, _ = part_b.broadcasters(7)
    assert set(ids_a.tolist()) | set(ids_b.tolist()) == whole


def test_ping_payload_roundtrip():
    payload = pack_ping_payload(123.25, 9876.5)
    assert unpack_ping_payload(payload) == (123.25, 9876.5)
    with pytest.raises(ValueError):
        unpack_ping_payload(payload[:-1])


def test_deliver_range_and_self_exclusion():
    cfg = ModelConfig(num_mh=4, steps=1)
    part = ManetPartition(cfg, SEED, np.arange(4, dtype=np.uint64), 2, 16)
    part.x[:] = [0.0, 100.0, 0.0, 5000.0]
    part.y[:] = [0.0, 200.0, 251.0, 5000.0]
    # sender is entity 0 at (0, 0): entity 1 at distance 223.61 is in range,
    # entity 2 at 251 is not, entity 0 itself is excluded.
    px = np.asarray([0.0])
    py = np.asarray([0.0])
    sid = np.asarray([0], dtype=np.uint64)
    olp = np.asarray([1], dtype=np.uint32)
    local, remote = part.deliver_pings(0, px, py, sid, olp, self_lp=0)
    assert (local, remote) == (0, 1)
    assert part.window_totals()[1, 1] == 1
    assert part.window_totals()[0].sum() == 0
    assert part.window_totals()[2].sum() == 0


def test_deliver_wrapped_distance():
    cfg = ModelConfig(num_mh=2, steps=1)
    part = ManetPartition(cfg, SEED, np.arange(2, dtype=np.uint64), 1, 16)
    part.x[:] = [9990.0, 123.0]
    part.y[:] = [0.0, 9999.0]
    local, remote = part.deliver_pings(
        0, np.asarray([0.0]), np.asarray([0.0]),
        np.asarray([5], dtype=np.uint64), np.asarray([0], dtype=np.uint32),
        self_lp=0)
    # both are within 250 through the boundary
    assert (local, remote) == (2, 0)


def test_density_oracle_one_step():
    # expected receivers per ping ~= (N-1) * pi * r^2 / area
    n = 4000
    cfg = ModelConfig(num_mh=n, steps=1)
    part = ManetPartition(cfg, SEED, np.arange(n, dtype=np.uint64), 1, 16)
    ids, px, py = part.broadcasters(0)
    olp = np.zeros(ids.size, dtype=np.uint32)
    local, remote = part.deliver_pings(0, px, py, ids, olp, self_lp=0)
    per_ping = local / ids.size
    expected = (n - 1) * math.pi * 250.0 ** 2 / 1e8
    assert per_ping == pytest.approx(expected, rel=0.15)


def test_partition_migration_roundtrip():
    part = ManetPartition(CFG, SEED, np.arange(10, dtype=np.uint64), 2, 4)
    part.record_interaction(3, 1, step=2)
    part.mark_migrated(3, 2)
    blob = part.pack_state(3)
    state_before = (part.x[3], part.y[3], part.wx[3], part.wy[3], part.speed[3])
    part.remove_many([3])
    assert part.n == 9
    with pytest.raises(KeyError):
        part.index_of(3)

    other = ManetPartition(CFG, SEED, np.asarray([20, 21], dtype=np.uint64), 2, 4)
    other.install_many([(3, blob)])
    assert other.n == 3
    i = other.index_of(3)
    assert (other.x[i], other.y[i], other.wx[i], other.wy[i], other.speed[i]) \
        == state_before
    assert other.last_migration[i] == 2
    assert other.stats[i, 2, 1] == 1
    assert list(other.ids) == [3, 20, 21]


def test_model_config_validation():
    with pytest.raises(ValueError):
        ModelConfig(num_mh=0).validate()
    with pytest.raises(ValueError):
        ModelConfig(fraction=0.0).validate()
    with pytest.raises(ValueError):
        ModelConfig(speed_min=0.0).validate()
