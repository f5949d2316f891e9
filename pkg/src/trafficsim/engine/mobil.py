"""Randomized MOBIL lane-change decision.

A vehicle first passes a Bernoulli evaluation gate (eval_prob); if it
evaluates, a change requires the safety criterion (the new follower's IDM
deceleration toward the inserted vehicle stays above -b_safe) and the
incentive criterion

    (a~_me - a_me) + politeness * ((a~_nf - a_nf) + (a~_of - a_of)) > threshold

where a is the IDM acceleration in the current configuration and a~ after
the hypothetical change.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .idm import idm_accel
from .params import IdmParams, MobilParams

STAY = "stay"
CHANGE = "change"


@dataclass(frozen=True)
class VehicleView:
    s: float  # front position along its lane, m
    v: float
    length: float


def _gap(leader: VehicleView | None, follower_s: float) -> float:
    if leader is None:
        return math.inf
    return leader.s - leader.length - follower_s


def _accel(me_v: float, leader: VehicleView | None, gap: float,
           idm: IdmParams, v_cap: float) -> float:
    dv = me_v - (0.0 if leader is None else leader.v)
    return idm_accel(me_v, dv, gap, idm, v_cap)


def evaluate_change(
    me: VehicleView,
    cur_leader: VehicleView | None,
    cur_follower: VehicleView | None,
    tgt_leader: VehicleView | None,
    tgt_follower: VehicleView | None,
    s_target: float,
    p: MobilParams,
    idm: IdmParams,
    v_cap_cur: float,
    v_cap_tgt: float,
) -> tuple[bool, float]:
    """(feasible and safe, incentive) for moving me to s_target on the target lane."""
    gap_tgt_leader = _gap(tgt_leader, s_target)
    gap_tgt_follower = (
        math.inf if tgt_follower is None else s_target - me.length - tgt_follower.s
    )
    if gap_tgt_leader <= 0.0 or gap_tgt_follower <= 0.0:
        return False, -math.inf

    gap_cur = _gap(cur_leader, me.s)
    if gap_cur <= 0.0:
        # already overlapping; a lateral escape is allowed if safe
        a_me = -math.inf
    else:
        a_me = _accel(me.v, cur_leader, gap_cur, idm, v_cap_cur)
    a_me_new = _accel(me.v, tgt_leader, gap_tgt_leader, idm, v_cap_tgt)

    a_nf = a_nf_new = 0.0
    if tgt_follower is not None:
        gap_nf_old = _gap(tgt_leader, tgt_follower.s)
        if gap_nf_old <= 0.0:
            return False, -math.inf
        a_nf = _accel(tgt_follower.v, tgt_leader, gap_nf_old, idm, v_cap_tgt)
        me_view = VehicleView(s_target, me.v, me.length)
        a_nf_new = _accel(tgt_follower.v, me_view, gap_tgt_follower, idm, v_cap_tgt)
        if a_nf_new < -p.b_safe:
            return False, -math.inf

    a_of = a_of_new = 0.0
    if cur_follower is not None:
        gap_of_old = me.s - me.length - cur_follower.s
        gap_of_new = _gap(cur_leader, cur_follower.s)
        if gap_of_old > 0.0 and gap_of_new > 0.0:
            a_of = _accel(cur_follower.v, me, gap_of_old, idm, v_cap_cur)
            a_of_new = _accel(cur_follower.v, cur_leader, gap_of_new, idm, v_cap_cur)

    if a_me == -math.inf:
        incentive = math.inf
    else:
        incentive = (a_me_new - a_me) + p.politeness * (
            (a_nf_new - a_nf) + (a_of_new - a_of)
        )
    return True, incentive


def mobil_decide(
    me: VehicleView,
    cur_leader: VehicleView | None,
    cur_follower: VehicleView | None,
    tgt_leader: VehicleView | None,
    tgt_follower: VehicleView | None,
    p: MobilParams,
    idm: IdmParams,
    rng_draw: float,
    s_target: float | None = None,
    v_cap_cur: float = math.inf,
    v_cap_tgt: float = math.inf,
) -> str:
    """Single-target decision: change iff the gate, safety and incentive all pass."""
    if rng_draw >= p.eval_prob:
        return STAY
    ok, incentive = evaluate_change(
        me,
        cur_leader,
        cur_follower,
        tgt_leader,
        tgt_follower,
        me.s if s_target is None else s_target,
        p,
        idm,
        v_cap_cur,
        v_cap_tgt,
    )
    return CHANGE if ok and incentive > p.threshold else STAY
