"""Self-triggered scheduling: predicted violation times and the next update instant."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

from .barriers import BarrierParams

INF = math.inf
TAU_EPS = 1e-12
# tolerance on t / T_d before flooring onto the grid
GRID_EPS = 1e-9


def _trim(coeffs: Sequence[float]) -> list[float]:
    c = [float(q) for q in coeffs]
    scale = max((abs(q) for q in c), default=0.0)
    if scale == 0.0:
        return []
    while c and abs(c[0]) <= 1e-14 * scale:
        c.pop(0)
    return c


def _real_roots(c: list[float]) -> list[float]:
    deg = len(c) - 1
    if deg <= 0:
        return []
    if deg == 1:
        return [-c[1] / c[0]]
    if deg == 2:
        a, b, k = c
        disc = b * b - 4.0 * a * k
        if disc < 0.0:
            return []
        q = -0.5 * (b + math.copysign(math.sqrt(disc), b))
        if q == 0.0:
            return [0.0, 0.0]
        return [q / a, k / q]

    a, b, k, d = c
    p2, p1, p0 = b / a, k / a, d / a
    shift = p2 / 3.0
    p = p1 - p2 * p2 / 3.0
    q = 2.0 * p2**3 / 27.0 - p2 * p1 / 3.0 + p0
    disc = (q / 2.0) ** 2 + (p / 3.0) ** 3
    if disc > 0.0:
        w = -q / 2.0 - math.copysign(math.sqrt(disc), q)
        s = math.copysign(abs(w) ** (1.0 / 3.0), w)
        y = s - p / (3.0 * s) if s != 0.0 else 0.0
        return [y - shift]
    if p == 0.0:
        return [-shift] * 3
    r = 2.0 * math.sqrt(-p / 3.0)
    arg = max(-1.0, min(1.0, 3.0 * q / (p * r)))
    phi = math.acos(arg) / 3.0
    return [r * math.cos(phi - 2.0 * math.pi * m / 3.0) - shift for m in range(3)]


def _polish(c: list[float], x: float) -> float:
    def f(t):
        val = der = 0.0
        for q in c:
            der = der * t + val
            val = val * t + q
        return val, der

    fx, dfx = f(x)
    for _ in range(3):
        if dfx == 0.0 or fx == 0.0:
            break
        x_new = x - fx / dfx
        f_new, d_new = f(x_new)
        if abs(f_new) >= abs(fx):
            break
        x, fx, dfx = x_new, f_new, d_new
    return x


def least_positive_root(coeffs: Sequence[float], tau_eps: float = TAU_EPS) -> Optional[float]:
    """Smallest real root greater than ``tau_eps`` of a polynomial of degree <= 3.

    ``coeffs`` are ordered from the highest power down, as in ``numpy.roots``.
    Vanishing leading coefficients reduce the degree.
    """
    c = _trim(coeffs)
    if len(c) > 4:
        raise ValueError("degree at most 3")
    roots = [_polish(c, r) for r in _real_roots(c)]
    positive = [r for r in roots if r > tau_eps]
    return min(positive) if positive else None


def _first_violation(coeffs: Sequence[float]) -> float:
    """Elapsed time until the polynomial constraint value first drops below zero."""
    c = _trim(coeffs)
    if not c:
        return INF
    c0 = c[-1]
    scale = max(abs(q) for q in c)
    if c0 < -1e-12 * scale:
        return 0.0
    if abs(c0) <= 1e-12 * scale:
        # tangent now: immediate violation if the first non-zero term is negative
        for q in reversed(c[:-1]):
            if abs(q) > 1e-12 * scale:
                if q < 0.0:
                    return 0.0
                break
    tau = least_positive_root(c)
    return INF if tau is None else tau


def next_violation_speed_max(t_k: float, v: float, u: float, p: BarrierParams) -> float:
    if u <= 0.0:
        return INF
    return t_k + max(0.0, (-u + p.v_max - v) / u)


def next_violation_speed_min(t_k: float, v: float, u: float, p: BarrierParams) -> float:
    if u >= 0.0:
        return INF
    return t_k + max(0.0, (-u + p.v_min - v) / u)


def rear_end_coeffs(ego, ip, C3: float, p: BarrierParams) -> list[float]:
    """``C_3`` along the interval as a polynomial in elapsed time (highest power first)."""
    du = ip[1] - ego[1]
    dv = ip[0] - ego[0]
    return [0.5 * du, du + dv - p.psi * ego[1], C3]


def merge_coeffs(ego, j, C4: float, p: BarrierParams) -> list[float]:
    x, v, u = ego
    du = j[1] - u
    dv = j[0] - v
    k = p.k
    return [
        -0.5 * k * u * u,
        0.5 * du - 1.5 * k * u * u - 1.5 * k * v * u,
        du - 3.0 * k * v * u + dv - k * v * v - k * u * x,
        C4,
    ]


def next_violation_rear_end(t_k: float, ego, ip, C3: float, p: BarrierParams) -> float:
    """``ego`` and ``ip`` are ``(v, u)`` pairs."""
    return t_k + _first_violation(rear_end_coeffs(ego, ip, C3, p))


def next_violation_merge(t_k: float, ego, j, C4: float, p: BarrierParams) -> float:
    """``ego`` is ``(x, v, u)``, ``j`` is ``(v, u)``."""
    return t_k + _first_violation(merge_coeffs(ego, j, C4, p))


@dataclass(frozen=True)
class TriggerOutcome:
    t1: float
    t2: float
    t3: float
    t4: float
    t_min: float
    t_next: float
    next_tick: int
    reason: str


def to_tick(t: float, T_d: float) -> int:
    return int(math.floor(t / T_d + GRID_EPS))


_CANDIDATE_REASONS = ("speed_max", "speed_min", "rear_end", "merge")


def next_update_time(t_k: float, candidates: Sequence[float], neighbor_nexts: Sequence[Optional[float]],
                     p: BarrierParams, T_max: float) -> TriggerOutcome:
    t1, t2, t3, t4 = candidates
    cap = t_k + T_max
    t_min, reason = cap, "t_max_cap"
    for name, t in zip(_CANDIDATE_REASONS, candidates):
        if t < t_min:
            t_min, reason = t, name
    nexts = [t for t in neighbor_nexts if t is not None]
    nb_min = min(nexts, default=INF)
    if t_min <= nb_min:
        t_next = t_min
    else:
        t_next, reason = nb_min + p.T_d, "neighbor_follow"
    k_now = int(round(t_k / p.T_d))
    tick = max(to_tick(t_next, p.T_d), k_now + 1)
    return TriggerOutcome(t1, t2, t3, t4, t_min, tick * p.T_d, tick, reason)
