"""Independent reference computations used to cross-check the production code.

None of these share code paths with the modules they check: the shooting
oracle never touches the Newton system, the QP oracle never enumerates
breakpoints, the trigger oracle propagates states instead of using the
polynomial coefficients, and the cubic oracle uses companion-matrix
eigenvalues.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from . import qp, triggers
from .barriers import BarrierParams, Neighbor, NeighborView, build_qp, constraint_values
from .dynamics import CavState, MAIN
from .profile import solve_unconstrained

ORACLES = ("shooting", "qp_grid", "bisection", "cubic_eig")
TOLERANCES = {"shooting": 1e-4, "qp_grid": 1e-6, "bisection": 1e-6, "cubic_eig": 1e-8}


# -- unconstrained optimum ---------------------------------------------------

def shooting_cost(T, x0: float, v0: float, L: float, beta: float):
    """Cost of the best fixed-duration trajectory, for one or many durations ``T``.

    For a fixed duration with free terminal speed the control is affine and
    vanishes at the end, so ``x(T) = L`` alone fixes it (inner linear solve).
    """
    T = np.asarray(T, dtype=float)
    D = L - x0
    # [T^3/6, T^2/2; T, 1] [a, b]^T = [D - v0 T, 0]
    det = T**3 / 6.0 - T**3 / 2.0
    a = (D - v0 * T) / det
    b = -a * T
    energy = 0.5 * (a * a * T**3 / 3.0 + a * b * T**2 + b * b * T)
    return beta * T + energy


def shooting_exit_time(x0: float, v0: float, L: float, beta: float,
                       n: int = 2001, tol: float = 1e-7) -> float:
    """Duration minimising the total cost, by a dense grid and repeated zoom."""
    D = L - x0
    lo, hi = 1e-3 * D / v0, 2.0 * D / v0
    while True:
        grid = np.linspace(lo, hi, n)
        cost = shooting_cost(grid, x0, v0, L, beta)
        i = int(np.argmin(cost))
        step = grid[1] - grid[0]
        if step <= tol:
            return float(grid[i])
        lo, hi = max(grid[max(i - 2, 0)], 1e-9), grid[min(i + 2, n - 1)]


def random_profile_case(rng: np.random.Generator):
    L = 400.0
    x0 = float(rng.uniform(0.0, 0.5 * L))
    v0 = float(rng.uniform(10.0, 25.0))
    beta = float(rng.uniform(0.1, 10.0))
    return x0, v0, L, beta


def check_shooting(rng) -> float:
    x0, v0, L, beta = random_profile_case(rng)
    prof = solve_unconstrained(x0, v0, 0.0, L, beta)
    return abs(prof.duration - shooting_exit_time(x0, v0, L, beta))


# -- quadratic program -------------------------------------------------------

def _row_arrays(problem: qp.QpProblem):
    hard = [(r.coeff_u, r.rhs) for r in problem.rows if r.coeff_delta == 0.0]
    soft = [(r.coeff_u, r.coeff_delta, r.rhs) for r in problem.rows if r.coeff_delta != 0.0]
    return hard, soft


def _feasible(hard, u, tol=1e-12):
    u = np.asarray(u, dtype=float)
    ok = np.ones_like(u, dtype=bool)
    for cu, rhs in hard:
        ok &= cu * u <= rhs + tol
    return ok


def _best_delta(soft, u):
    u = np.asarray(u, dtype=float)
    d = np.zeros_like(u)
    for cu, cd, rhs in soft:
        d = np.maximum(d, (rhs - cu * u) / cd)
    return d


def _edge(pred: Callable[[float], bool], inside: float, outside: float, iters: int = 80) -> float:
    for _ in range(iters):
        mid = 0.5 * (inside + outside)
        if pred(mid):
            inside = mid
        else:
            outside = mid
    return inside


def qp_grid_solve(problem: qp.QpProblem, step: float = 1e-4) -> Optional[tuple[float, float]]:
    """(u, objective) by dense grid search with analytic delta, or None if infeasible."""
    hard, soft = _row_arrays(problem)
    lo, hi = problem.u_lo, problem.u_hi
    n = max(2, int(math.ceil((hi - lo) / step)) + 1)
    grid = np.linspace(lo, hi, n)
    ok = _feasible(hard, grid)
    if not ok.any():
        return None
    idx = np.flatnonzero(ok)
    pred = lambda u: bool(_feasible(hard, [u])[0])  # noqa: E731
    a = grid[idx[0]] if idx[0] == 0 else _edge(pred, grid[idx[0]], grid[idx[0] - 1])
    b = grid[idx[-1]] if idx[-1] == n - 1 else _edge(pred, grid[idx[-1]], grid[idx[-1] + 1])

    def obj(u):
        u = np.asarray(u, dtype=float)
        d = _best_delta(soft, u)
        return 0.5 * (u - problem.u_star) ** 2 + problem.rho * d * d

    pts = np.concatenate([[a], grid[ok], [b]])
    vals = obj(pts)
    i = int(np.argmin(vals))
    best_u, best = float(pts[i]), float(vals[i])
    # golden-section refinement inside the neighbouring grid cells (objective is convex)
    left, right = max(a, best_u - step), min(b, best_u + step)
    g = 0.5 * (math.sqrt(5.0) - 1.0)
    for _ in range(200):
        if right - left <= 1e-15 * max(1.0, abs(left)):
            break
        m1, m2 = right - g * (right - left), left + g * (right - left)
        f1, f2 = obj([m1, m2])
        if f1 <= f2:
            right = m2
        else:
            left = m1
    u_ref = 0.5 * (left + right)
    f_ref = float(obj([u_ref])[0])
    if f_ref < best:
        best_u, best = u_ref, f_ref
    return best_u, best


def random_qp(rng: np.random.Generator, p: BarrierParams = BarrierParams()) -> qp.QpProblem:
    """Feasible problem shaped like the controller's: CLF rows plus affine cuts."""
    u_feas = rng.uniform(p.u_min, p.u_max)
    rows = []
    for _ in range(int(rng.integers(1, 3))):
        e = rng.normal(0.0, 3.0)
        rows.append(qp.ConstraintRow(e, -rng.uniform(0.5, 2.0), rng.normal(0.0, 10.0), "clf"))
    for _ in range(int(rng.integers(0, 5))):
        cu = rng.normal(0.0, 2.0)
        slack = rng.exponential(1.0)
        rows.append(qp.ConstraintRow(cu, 0.0, cu * u_feas + slack, "cut"))
    u_star = rng.uniform(2 * p.u_min, 2 * p.u_max)
    return qp.QpProblem(u_star=u_star, rho=float(rng.uniform(0.1, 10.0)), rows=rows,
                        u_lo=p.u_min, u_hi=p.u_max)


def check_qp(rng) -> float:
    prob = random_qp(rng)
    sol = qp.solve(prob)
    ref = qp_grid_solve(prob)
    return abs(sol.objective - ref[1])


# -- trigger times -----------------------------------------------------------

def _path(x, v, u, tau):
    return x + v * tau + 0.5 * u * tau * tau, v + u * tau


def constraint_along(kind: str, ego, nb: NeighborView, u: float, p: BarrierParams, tau):
    """Original constraint ``kind`` along an interval with every control held constant."""
    tau = np.asarray(tau, dtype=float)
    x, v = _path(ego.x, ego.v, u, tau)
    if kind == "speed_max":
        return -u + p.v_max - v
    if kind == "speed_min":
        return u + v - p.v_min
    if kind == "rear_end":
        xo, vo = _path(nb.ip.x, nb.ip.v, nb.ip.u, tau)
        return vo - v - p.psi * u + (xo - x - p.psi * v - p.l)
    if kind == "merge":
        xo, vo = _path(nb.j.x, nb.j.v, nb.j.u, tau)
        k = p.k
        return vo - v - k * v * v - k * x * u + (xo - x - k * x * v - p.l)
    raise ValueError(f"unknown constraint {kind!r}")


def first_violation_bisection(f: Callable, horizon: float, step: float = 1e-3,
                              tol: float = 1e-12) -> float:
    """First time ``f`` drops below zero on ``[0, horizon]``, or inf."""
    n = int(math.ceil(horizon / step))
    grid = np.linspace(0.0, n * step, n + 1)
    vals = f(grid)
    bad = np.flatnonzero(vals < 0.0)
    if bad.size == 0:
        return math.inf
    i = int(bad[0])
    if i == 0:
        return 0.0
    lo, hi = grid[i - 1], grid[i]
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if f(np.array([mid]))[0] < 0.0:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def analytic_violation(kind: str, ego, nb: NeighborView, u: float, p: BarrierParams) -> float:
    """Elapsed time to violation from the scheduler's closed-form expressions."""
    C = constraint_values(ego, nb, p, u)[kind]
    if kind == "speed_max":
        return triggers.next_violation_speed_max(0.0, ego.v, u, p)
    if kind == "speed_min":
        return triggers.next_violation_speed_min(0.0, ego.v, u, p)
    if kind == "rear_end":
        return triggers.next_violation_rear_end(0.0, (ego.v, u), (nb.ip.v, nb.ip.u), C, p)
    return triggers.next_violation_merge(0.0, (ego.x, ego.v, u), (nb.j.v, nb.j.u), C, p)


TRIGGER_KINDS = ("speed_max", "speed_min", "rear_end", "merge")


def random_trigger_case(rng: np.random.Generator, kind: str, p: BarrierParams = BarrierParams()):
    """Random state and control with the chosen original constraint satisfied now."""
    while True:
        x = rng.uniform(0.0, p.L)
        v = rng.uniform(p.v_min, p.v_max)
        u = rng.uniform(p.u_min, p.u_max)
        ego = CavState(0, MAIN, x, v, u, 0.0, 0.0, 0.0)
        ip = j = None
        if kind == "rear_end":
            ip = Neighbor(x + p.psi * v + p.l + rng.uniform(0.0, 60.0),
                          rng.uniform(p.v_min, p.v_max), rng.uniform(p.u_min, p.u_max))
        if kind == "merge":
            j = Neighbor(x + p.k * x * v + p.l + rng.uniform(0.0, 60.0),
                         rng.uniform(p.v_min, p.v_max), rng.uniform(p.u_min, p.u_max))
        nb = NeighborView(ip, j)
        if constraint_values(ego, nb, p, u)[kind] >= 0.0:
            return ego, nb, u


def trigger_deviation(kind: str, ego, nb, u, p: BarrierParams, horizon: float = 60.0) -> float:
    ref = first_violation_bisection(lambda t: constraint_along(kind, ego, nb, u, p, t), horizon)
    got = analytic_violation(kind, ego, nb, u, p)
    if got > horizon and math.isinf(ref):
        return 0.0
    if math.isinf(got) or math.isinf(ref):
        return math.inf
    return abs(got - ref)


def check_bisection(rng) -> float:
    kind = TRIGGER_KINDS[int(rng.integers(len(TRIGGER_KINDS)))]
    return trigger_deviation(kind, *random_trigger_case(rng, kind), BarrierParams())


# -- polynomial roots --------------------------------------------------------

def cubic_eig_root(coeffs, tau_eps: float = triggers.TAU_EPS, imag_tol: float = 1e-7) -> Optional[float]:
    """Least positive real root from the eigenvalues of the companion matrix."""
    c = np.trim_zeros(np.asarray(coeffs, dtype=float), "f")
    if c.size < 2:
        return None
    roots = np.roots(c)
    real = [r.real for r in roots if abs(r.imag) <= imag_tol * max(1.0, abs(r))]
    pos = [r for r in real if r > tau_eps]
    return min(pos) if pos else None


def check_cubic(rng) -> float:
    coeffs = rng.normal(size=4)
    got = triggers.least_positive_root(coeffs)
    ref = cubic_eig_root(coeffs)
    if got is None and ref is None:
        return 0.0
    if got is None or ref is None:
        return math.inf
    return abs(got - ref) / max(1.0, abs(ref))


# -- interval guarantee ------------------------------------------------------

def random_feasible_state(rng: np.random.Generator, p: BarrierParams = BarrierParams(), rho: float = 1.0):
    """Random ego/neighbour configuration whose tightened QP is feasible, with its solution."""
    while True:
        x = rng.uniform(0.0, p.L)
        v = rng.uniform(p.v_min, p.v_max)
        ego = CavState(0, MAIN, x, v, 0.0, 0.0, 0.0, 0.0)
        ip = j = None
        if rng.random() < 0.7:
            ip = Neighbor(x + p.psi * v + p.l + rng.exponential(10.0),
                          rng.uniform(p.v_min, p.v_max), rng.uniform(p.u_min, p.u_max))
        if rng.random() < 0.7:
            j = Neighbor(x + p.k * x * v + p.l + rng.exponential(10.0),
                         rng.uniform(p.v_min, p.v_max), rng.uniform(p.u_min, p.u_max))
        nb = NeighborView(ip, j)
        ref = (rng.uniform(p.u_min, p.u_max), rng.uniform(p.v_min, p.v_max))
        try:
            sol = qp.solve(build_qp(ego, nb, ref, p, rho, tighten=True))
        except qp.QpInfeasible:
            continue
        return ego, nb, sol.u


def interval_min(ego, nb: NeighborView, u: float, p: BarrierParams, step: float = 1e-3) -> float:
    """Smallest original constraint value on a grid over one minimum inter-event interval."""
    tau = np.linspace(0.0, p.T_d, int(round(p.T_d / step)) + 1)
    kinds = ["speed_max", "speed_min"]
    if nb.ip is not None:
        kinds.append("rear_end")
    if nb.j is not None:
        kinds.append("merge")
    return min(float(constraint_along(k, ego, nb, u, p, tau).min()) for k in kinds)


def worst_rear_end_drift(ego, nb: NeighborView, p: BarrierParams, n: int = 100) -> float:
    """Largest drop of the rear-end constraint over the interval, by grid maximisation.

    Ego and predecessor accelerations range over ``[u_min, u_max]`` and
    ``[-|u_ip|, |u_ip|]``; the ``-psi u`` term is common to both ends and cancels.
    """
    U_ego, U_ip = np.meshgrid(np.linspace(p.u_min, p.u_max, n),
                              np.linspace(-abs(nb.ip.u), abs(nb.ip.u), n))
    now = nb.ip.v - ego.v + (nb.ip.x - ego.x - p.psi * ego.v - p.l)
    worst = 0.0
    for tau in np.linspace(0.0, p.T_d, 11):
        x, v = _path(ego.x, ego.v, U_ego, tau)
        xo, vo = _path(nb.ip.x, nb.ip.v, U_ip, tau)
        later = vo - v + (xo - x - p.psi * v - p.l)
        worst = max(worst, float((now - later).max()))
    return worst


# -- driver ------------------------------------------------------------------

_CHECKS = {
    "shooting": check_shooting,
    "qp_grid": check_qp,
    "bisection": check_bisection,
    "cubic_eig": check_cubic,
}


@dataclass(frozen=True)
class OracleReport:
    which: str
    cases: int
    max_deviation: float
    tolerance: float
    failures: int

    @property
    def passed(self) -> bool:
        return self.failures == 0


def run_oracle(which: str, cases: int, seed: int = 0) -> OracleReport:
    if which not in _CHECKS:
        raise ValueError(f"unknown oracle {which!r}; choose from {ORACLES}")
    rng = np.random.default_rng(seed)
    tol = TOLERANCES[which]
    worst, fails = 0.0, 0
    for _ in range(cases):
        dev = _CHECKS[which](rng)
        worst = max(worst, dev)
        fails += not dev <= tol
    return OracleReport(which, cases, worst, tol, fails)

