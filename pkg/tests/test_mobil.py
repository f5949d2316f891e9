import math

import pytest

from trafficsim.engine import (
    IdmParams,
    MobilParams,
    VehicleView,
    evaluate_change,
    mobil_decide,
)

IDM = IdmParams()
MOBIL = MobilParams()
CAP = math.inf


def _decide(me, cl, cf, tl, tf, rng_draw=0.0, p=MOBIL):
    return mobil_decide(me, cl, cf, tl, tf, p, IDM, rng_draw, s_target=me.s)


def test_no_benefit_means_stay():
    # same leader distance on both lanes: incentive is exactly zero
    me = VehicleView(s=50.0, v=10.0, length=5.0)
    leader = VehicleView(s=80.0, v=10.0, length=5.0)
    assert _decide(me, leader, None, leader, None) == "stay"


def test_blocked_lane_invites_change():
    me = VehicleView(s=50.0, v=10.0, length=5.0)
    crawler = VehicleView(s=60.0, v=0.0, length=5.0)
    assert _decide(me, crawler, None, None, None) == "change"


def test_eval_gate_blocks_everything():
    me = VehicleView(s=50.0, v=10.0, length=5.0)
    crawler = VehicleView(s=60.0, v=0.0, length=5.0)
    assert _decide(me, crawler, None, None, None, rng_draw=MOBIL.eval_prob) == "stay"
    assert _decide(me, crawler, None, None, None, rng_draw=0.99) == "stay"


def test_safety_veto_on_fast_new_follower():
    me = VehicleView(s=50.0, v=3.0, length=5.0)
    crawler = VehicleView(s=58.0, v=0.0, length=5.0)
    # follower closing at 30 m/s two meters behind the insertion point
    racer = VehicleView(s=43.0, v=30.0, length=5.0)
    ok, _ = evaluate_change(me, crawler, None, None, racer, me.s, MOBIL, IDM, CAP, CAP)
    assert not ok
    assert _decide(me, crawler, None, None, racer) == "stay"


def test_nonpositive_insertion_gap_infeasible():
    me = VehicleView(s=50.0, v=10.0, length=5.0)
    overlapping_leader = VehicleView(s=52.0, v=10.0, length=5.0)  # rear at 47 < 50
    ok, incentive = evaluate_change(
        me, None, None, overlapping_leader, None, me.s, MOBIL, IDM, CAP, CAP
    )
    assert not ok
    assert incentive == -math.inf


def test_politeness_weighs_new_follower_harm():
    me = VehicleView(s=50.0, v=14.0, length=5.0)
    slow_leader = VehicleView(s=75.0, v=8.0, length=5.0)
    follower = VehicleView(s=30.0, v=14.0, length=5.0)
    selfish = MobilParams(politeness=0.0, threshold=0.1, b_safe=4.0, eval_prob=0.9)
    polite = MobilParams(politeness=6.0, threshold=0.1, b_safe=4.0, eval_prob=0.9)
    assert _decide(me, slow_leader, None, None, follower, p=selfish) == "change"
    assert _decide(me, slow_leader, None, None, follower, p=polite) == "stay"


def test_released_old_follower_counts_in_favor():
    # changing away frees the old follower stuck behind me
    me = VehicleView(s=50.0, v=6.0, length=5.0)
    old_follower = VehicleView(s=40.0, v=12.0, length=5.0)
    slow_leader = VehicleView(s=70.0, v=5.0, length=5.0)
    _, with_follower = evaluate_change(
        me, slow_leader, old_follower, None, None, me.s, MOBIL, IDM, CAP, CAP
    )
    _, alone = evaluate_change(
        me, slow_leader, None, None, None, me.s, MOBIL, IDM, CAP, CAP
    )
    assert with_follower > alone


def test_overlap_escape_has_infinite_incentive():
    me = VehicleView(s=50.0, v=5.0, length=5.0)
    overlapped = VehicleView(s=52.0, v=5.0, length=5.0)  # gap to leader <= 0
    ok, incentive = evaluate_change(me, overlapped, None, None, None, me.s, MOBIL, IDM, CAP, CAP)
    assert ok
    assert incentive == math.inf


def test_incentive_matches_hand_formula():
    me = VehicleView(s=50.0, v=12.0, length=5.0)
    cur_leader = VehicleView(s=70.0, v=6.0, length=5.0)
    tgt_leader = VehicleView(s=120.0, v=15.0, length=5.0)
    tgt_follower = VehicleView(s=20.0, v=10.0, length=5.0)

    from trafficsim.engine import idm_accel

    def acc(v, leader, front_s):
        if leader is None:
            return idm_accel(v, v, math.inf, IDM, CAP)
        return idm_accel(v, v - leader.v, leader.s - leader.length - front_s, IDM, CAP)

    a_me = acc(me.v, cur_leader, me.s)
    a_me_new = acc(me.v, tgt_leader, me.s)
    a_nf = acc(tgt_follower.v, tgt_leader, tgt_follower.s)
    a_nf_new = idm_accel(
        tgt_follower.v, tgt_follower.v - me.v, me.s - me.length - tgt_follower.s, IDM, CAP
    )
    want = (a_me_new - a_me) + MOBIL.politeness * (a_nf_new - a_nf)

    ok, incentive = evaluate_change(
        me, cur_leader, None, tgt_leader, tgt_follower, me.s, MOBIL, IDM, CAP, CAP
    )
    assert ok
    assert incentive == pytest.approx(want, abs=1e-12)


def test_lane_speed_caps_enter_the_evaluation():
    # target lane has a much lower cap: free-flow gain disappears
    me = VehicleView(s=50.0, v=13.0, length=5.0)
    slowish = VehicleView(s=80.0, v=11.0, length=5.0)
    fast = mobil_decide(me, slowish, None, None, None, MOBIL, IDM, 0.0, s_target=50.0,
                        v_cap_cur=CAP, v_cap_tgt=CAP)
    capped = mobil_decide(me, slowish, None, None, None, MOBIL, IDM, 0.0, s_target=50.0,
                          v_cap_cur=CAP, v_cap_tgt=8.0)
    assert fast == "change"
    assert capped == "stay"
