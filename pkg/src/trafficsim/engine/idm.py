"""Intelligent Driver Model acceleration law.

    a = a_max * [1 - (v / v0_eff)^delta - (s* / gap)^2]
    s* = s0 + max(0, v*T + v*dv / (2*sqrt(a_max*b)))

with v0_eff = min(v0, lane speed cap) and dv = own speed minus leader speed.
Exact identities: a(0, 0, inf) = a_max and a(v0_eff, any dv, inf) = 0.
"""

from __future__ import annotations

import math

from .params import IdmParams


def idm_accel(v: float, delta_v: float, gap: float, p: IdmParams, v_cap: float) -> float:
    """Acceleration for a vehicle at speed v with the given leader gap.

    gap must be positive; pass math.inf when there is no leader in range.
    """
    if gap <= 0.0:
        raise ValueError(f"idm_accel requires gap > 0, got {gap}")
    v0_eff = min(p.v0, v_cap)
    free = (v / v0_eff) ** p.delta
    if math.isinf(gap):
        interaction = 0.0
    else:
        s_star = p.s0 + max(0.0, v * p.T + v * delta_v / (2.0 * math.sqrt(p.a_max * p.b)))
        interaction = (s_star / gap) ** 2
    return p.a_max * (1.0 - free - interaction)


def equilibrium_gap(v: float, p: IdmParams, v_cap: float) -> float:
    """Closed-form steady-state gap: a = 0 at speed v with delta_v = 0."""
    v0_eff = min(p.v0, v_cap)
    return (p.s0 + v * p.T) / math.sqrt(1.0 - (v / v0_eff) ** p.delta)
