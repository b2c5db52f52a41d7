import math

import numpy as np
import pytest

from adaptsim.directory import REASON_CLUSTERING, REASON_LOAD, MigrationIntent
from adaptsim.heuristics import (
    HeuristicConfig,
    SpeedView,
    asymmetric_filter,
    distribute_allowance,
    gaia_evaluate,
    gaia_plus_quota,
    load_caps,
    select_load_intents,
    symmetric_caps,
    symmetric_filter,
)
from adaptsim.manet import ManetPartition, ModelConfig


def cfg(**kw):
    base = dict(mode="gaia", window=16, interval=8, theta=0.6,
                migration_factor=8, delta=0.1, cooldown=24, epsilon=0.15,
                quota=0.2, alpha=0.3)
    base.update(kw)
    return HeuristicConfig(**base).validate()


def partition(n=4, num_lps=3, window=16):
    mc = ModelConfig(num_mh=n, steps=10)
    return ManetPartition(mc, seed=1, ids=np.arange(n, dtype=np.uint64),
                          num_lps=num_lps, window=window)


# -- interaction window -------------------------------------------------------

def test_record_interaction_fractions():
    part = partition()
    for _ in range(3):
        part.record_interaction(0, 1, step=5)
    part.record_interaction(0, 0, step=5)
    totals = part.window_totals()
    assert totals[0].tolist() == [1, 3, 0]
    frac = totals[0] / totals[0].sum()
    assert frac[1] == pytest.approx(0.75)
    assert frac[0] == pytest.approx(0.25)


def test_window_eviction_after_w_steps():
    part = partition(window=4)
    part.record_interaction(0, 1, step=0)
    assert part.window_totals()[0, 1] == 1
    # Bucket reuse at step W evicts the step-0 counts.
    part.zero_stats_bucket(4)
    assert part.window_totals()[0, 1] == 0


def test_no_interactions_skips_evaluation():
    part = partition()
    intents = gaia_evaluate(part.ids, part.window_totals(), 0,
                            part.last_migration, 8, cfg())
    assert intents == []


# -- clustering evaluation ----------------------------------------------------

def eval_one(local_frac, ext_frac, total=40, theta=0.7, mf=10, last_mig=None):
    ids = np.asarray([7], dtype=np.uint64)
    totals = np.zeros((1, 3), dtype=np.int64)
    totals[0, 0] = round(total * local_frac)
    totals[0, 1] = round(total * ext_frac)
    last = np.asarray([last_mig if last_mig is not None else -(1 << 40)],
                      dtype=np.int64)
    return gaia_evaluate(ids, totals, 0, last, 40,
                         cfg(theta=theta, migration_factor=mf))


def test_gaia_threshold_logic():
    intents = eval_one(0.2, 0.8)
    assert len(intents) == 1
    it = intents[0]
    assert (it.se, it.src, it.dst, it.reason) == (7, 0, 1, REASON_CLUSTERING)


def test_gaia_tie_stays_put():
    assert eval_one(0.5, 0.5) == []


def test_gaia_cooldown_blocks():
    # migrated 2 steps ago, cooldown 10
    intents = eval_one(0.2, 0.8, last_mig=38)
    assert intents == []
    ids = np.asarray([7], dtype=np.uint64)
    totals = np.asarray([[8, 32, 0]], dtype=np.int64)
    last = np.asarray([38], dtype=np.int64)
    assert gaia_evaluate(ids, totals, 0, last, 40, cfg(cooldown=10)) == []


def test_gaia_migration_factor_guard():
    # 4 interactions in the window stay below MF=10: too quiet to migrate.
    assert eval_one(0.0, 1.0, total=4) == []


def test_gaia_tiebreak_lowest_lp():
    ids = np.asarray([3], dtype=np.uint64)
    totals = np.asarray([[0, 20, 20]], dtype=np.int64)
    intents = gaia_evaluate(ids, totals, 0, np.asarray([-(1 << 40)]), 8,
                            cfg(theta=0.45))
    assert intents[0].dst == 1


def test_gaia_canonical_output_order():
    ids = np.asarray([2, 9, 30], dtype=np.uint64)
    totals = np.asarray([[1, 39, 0], [0, 40, 0], [2, 38, 0]], dtype=np.int64)
    last = np.full(3, -(1 << 40), dtype=np.int64)
    intents = gaia_evaluate(ids, totals, 0, last, 8, cfg())
    assert [it.se for it in intents] == [2, 9, 30]


# -- symmetric filter ---------------------------------------------------------

def intent(se, src, dst, reason=REASON_CLUSTERING):
    return MigrationIntent(se=se, src=src, dst=dst, decided_at=8, reason=reason)


def test_symmetric_caps_paper_scale():
    cap, floor = symmetric_caps(12000, 3, 0.1)
    assert (cap, floor) == (4400, 3600)


def test_symmetric_filter_cap_binding():
    c = cfg()
    approved = symmetric_filter([intent(1, 1, 0)], [4400, 3800, 3800], c, 12000, 3)
    assert approved == []
    approved = symmetric_filter([intent(1, 1, 0)], [4399, 3801, 3800], c, 12000, 3)
    assert len(approved) == 1


def test_symmetric_filter_source_floor():
    c = cfg()
    assert symmetric_filter([intent(1, 1, 0)], [4000, 3600, 4400], c, 12000, 3) == []


def test_symmetric_filter_delta_zero_rejects_everything():
    c = cfg(delta=0.0)
    intents = [intent(0, 0, 1), intent(1, 1, 0), intent(2, 2, 0)]
    assert symmetric_filter(intents, [4000, 4000, 4000], c, 12000, 3) == []


def test_symmetric_filter_cumulative_counts():
    # After one approval fills the target's headroom, later intents drop.
    c = cfg()
    intents = [intent(0, 1, 0), intent(1, 1, 0)]
    approved = symmetric_filter(intents, [4399, 3801, 3800], c, 12000, 3)
    assert [it.se for it in approved] == [0]


def test_symmetric_filter_rationing_across_senders():
    # With 2 potential senders, each may only claim half the headroom.
    c = cfg()
    intents = [intent(i, 1, 0) for i in range(10)]
    approved = symmetric_filter(intents, [4390, 4000, 3610], c, 12000, 3,
                                ration_divisor=2)
    assert len(approved) == 5


# -- speed-aware quota --------------------------------------------------------

def test_quota_arithmetic_example():
    ms = 1_000_000
    view = gaia_plus_quota([100 * ms, 100 * ms, 400 * ms], [4000, 4000, 4000],
                           cfg(epsilon=0.1, quota=0.25))
    assert view.slow_lps == {2}
    assert view.fast_lps == {0, 1}
    # ceil(0.25 * 4000 * (400-200)/400) = 500
    assert view.outbound_allowance[2] == 500
    assert view.target_weights[0] == view.target_weights[1] == pytest.approx(100 * ms)


def test_quota_equal_times_inactive():
    view = gaia_plus_quota([100, 100, 100], [10, 10, 10], cfg())
    assert not view.slow_lps and not view.fast_lps and not view.outbound_allowance


def test_distribute_allowance_largest_remainder():
    shares = distribute_allowance(10, {0: 2.0, 2: 1.0})
    assert shares == {0: 7, 2: 3}
    assert distribute_allowance(1, {1: 1.0, 2: 1.0}) == {1: 1}
    assert distribute_allowance(0, {1: 1.0}) == {}


def test_select_load_intents_by_affinity():
    ids = np.asarray([5, 6, 7], dtype=np.uint64)
    totals = np.asarray([[0, 10, 0], [0, 2, 8], [0, 9, 1]], dtype=np.int64)
    last = np.full(3, -(1 << 40), dtype=np.int64)
    intents = select_load_intents(ids, totals, 0, last, 8, cfg(),
                                  shares={1: 2}, exclude=set())
    assert [it.se for it in intents] == [5, 7]
    assert all(it.reason == REASON_LOAD for it in intents)
    # excluded / cooling-down entities are skipped
    intents = select_load_intents(ids, totals, 0, last, 8, cfg(),
                                  shares={1: 2}, exclude={5})
    assert [it.se for it in intents] == [6, 7]


def test_load_caps_widened():
    cap, floor = load_caps(3000, 3, 0.1)
    assert cap == 1300
    assert floor == 250


def test_asymmetric_filter_blocks_slow_targets():
    c = cfg()
    intents = [intent(0, 0, 2), intent(1, 0, 1)]
    approved = asymmetric_filter(intents, [1000, 1000, 1000], c, 3000, 3,
                                 slow_lps={2})
    assert [it.dst for it in approved] == [1]


# -- speed view ---------------------------------------------------------------

def test_speed_view_detects_cpu_slow_peer():
    v = SpeedView(num_lps=3, self_lp=0, alpha=1.0)
    # peers report busy; peer 2 is 3x slower and its STEP_DONE arrives late
    v.observe_self(100, 10)
    v.observe_peer(1, 100, 10, lag_nanos=0)
    v.observe_peer(2, 300, 10, lag_nanos=200)
    times = v.perceived_step_times()
    assert times[2] > times[1]
    assert times[2] >= 300


def test_speed_view_laggy_lp_detects_itself():
    # All of this LP's incoming links are laggy: the minimum incoming lag is
    # its own attachment and is charged to self.
    v = SpeedView(num_lps=3, self_lp=2, alpha=1.0)
    v.observe_self(100, 10)
    v.observe_peer(0, 100, 10, lag_nanos=500)
    v.observe_peer(1, 100, 10, lag_nanos=500)
    times = v.perceived_step_times()
    assert times[2] == pytest.approx(100 + 0.5 * 500)
    assert times[0] == pytest.approx(100)
    assert times[1] == pytest.approx(100)
    quota = gaia_plus_quota(times, [10, 10, 10], cfg())
    assert 2 in quota.slow_lps
    assert quota.outbound_allowance[2] > 0


def test_speed_view_normal_peer_sees_laggy_one():
    v = SpeedView(num_lps=3, self_lp=0, alpha=1.0)
    v.observe_self(100, 10)
    v.observe_peer(1, 100, 10, lag_nanos=0)
    v.observe_peer(2, 100, 10, lag_nanos=500)
    times = v.perceived_step_times()
    assert times[2] == pytest.approx(100 + 250)
    assert times[0] == pytest.approx(100)


def test_speed_view_ema_smoothing():
    v = SpeedView(num_lps=2, self_lp=0, alpha=0.5)
    v.observe_self(100, 1)
    v.observe_self(200, 1)
    assert v.busy_ema[0] == pytest.approx(150)


def test_config_validation():
    with pytest.raises(ValueError):
        HeuristicConfig(mode="wat").validate()
    with pytest.raises(ValueError):
        HeuristicConfig(theta=1.5).validate()
    with pytest.raises(ValueError):
        HeuristicConfig(quota=0.0).validate()
