"""Exact solver for the two-variable CBF-CLF quadratic program.

The objective is ``0.5 (u - u_star)^2 + rho delta^2``.  Rows without a
``delta`` term cut the admissible ``u`` down to an interval; rows with a
negative ``delta`` coefficient only put lower bounds on ``delta``.  For a
fixed ``u`` the best relaxation is therefore ``max(0, max_k g_k(u))`` and the
problem collapses to minimising a convex piecewise quadratic in ``u``, which
is done exactly by visiting every breakpoint segment.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

FEAS_TOL = 1e-9


class QpInfeasible(RuntimeError):
    """No ``(u, delta)`` satisfies every row inside the control bounds."""


class ConstraintRow(NamedTuple):
    coeff_u: float
    coeff_delta: float
    rhs: float
    kind: str


@dataclass(frozen=True)
class QpProblem:
    u_star: float
    rho: float
    rows: list = field(default_factory=list)
    u_lo: float = float("-inf")
    u_hi: float = float("inf")

    def objective(self, u: float, delta: float) -> float:
        return 0.5 * (u - self.u_star) ** 2 + self.rho * delta * delta


@dataclass(frozen=True)
class QpSolution:
    u: float
    delta: float
    objective: float
    active_set: tuple = ()


def _interval(p: QpProblem):
    lo, hi = p.u_lo, p.u_hi
    lifts = []
    for row in p.rows:
        cu, cd, rhs = row.coeff_u, row.coeff_delta, row.rhs
        if cd < 0.0:
            # delta >= (cu u - rhs) / |cd|
            lifts.append((cu / -cd, -rhs / -cd))
        elif cd > 0.0:
            raise ValueError(f"row {row.kind!r}: positive delta coefficient unsupported")
        elif cu > 0.0:
            hi = min(hi, rhs / cu)
        elif cu < 0.0:
            lo = max(lo, rhs / cu)
        elif rhs < -FEAS_TOL:
            raise QpInfeasible(f"row {row.kind!r} is violated for every u")
    return lo, hi, lifts


def _lift(lifts, u):
    return max((s * u + r for s, r in lifts), default=0.0)


def solve(p: QpProblem) -> QpSolution:
    if p.rho <= 0.0:
        raise ValueError("rho must be positive")
    lo, hi, lifts = _interval(p)
    if lo > hi:
        if lo - hi > FEAS_TOL * max(1.0, abs(lo)):
            raise QpInfeasible(f"admissible control interval is empty: [{lo}, {hi}]")
        lo = hi = 0.5 * (lo + hi)

    # breakpoints of max(0, g_1, ..., g_m) inside (lo, hi)
    cuts = {lo, hi}
    for i, (s, r) in enumerate(lifts):
        if s != 0.0:
            cuts.add(-r / s)
        for s2, r2 in lifts[i + 1:]:
            if s != s2:
                cuts.add((r2 - r) / (s - s2))
    pts = sorted(c for c in cuts if lo <= c <= hi)

    best = None
    for a, b in zip(pts[:-1], pts[1:]) if len(pts) > 1 else [(lo, hi)]:
        mid = 0.5 * (a + b)
        # active lift on this segment, if any
        s, r = 0.0, 0.0
        g = 0.0
        for s_k, r_k in lifts:
            val = s_k * mid + r_k
            if val > g:
                g, s, r = val, s_k, r_k
        u = (p.u_star - 2.0 * p.rho * s * r) / (1.0 + 2.0 * p.rho * s * s)
        u = min(max(u, a), b)
        delta = max(0.0, _lift(lifts, u))
        obj = p.objective(u, delta)
        if best is None or obj < best[2] - 1e-15 or (obj <= best[2] + 1e-15 and abs(u) < abs(best[0])):
            best = (u, delta, obj)

    u, delta, obj = best
    active = tuple(
        row.kind for row in p.rows
        if abs(row.rhs - row.coeff_u * u - row.coeff_delta * delta) <= FEAS_TOL * max(1.0, abs(row.rhs))
    )
    return QpSolution(u=u, delta=delta, objective=obj, active_set=active)
