"""Barrier functions, interval margins and QP assembly for one CAV.

All class-K functions are the identity, so every constraint reads
``Lf h + Lg h u + h >= margin``.  Rows are normalised to
``coeff_u * u + coeff_delta * delta <= rhs``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Optional

from .qp import ConstraintRow, QpProblem


@dataclass(frozen=True)
class BarrierParams:
    psi: float = 1.8
    l: float = 0.0
    L: float = 400.0
    v_min: float = 0.0
    v_max: float = 30.0
    u_min: float = -0.6 * 9.81
    u_max: float = 0.5 * 9.81
    c3: float = 10.0
    T_d: float = 0.05

    def __post_init__(self):
        if not self.u_min < 0.0 < self.u_max:
            raise ValueError("need u_min < 0 < u_max")
        if not self.v_min < self.v_max:
            raise ValueError("need v_min < v_max")
        if self.psi <= 0.0 or self.T_d <= 0.0 or self.L <= 0.0:
            raise ValueError("psi, T_d and L must be positive")

    @property
    def u_M(self) -> float:
        # magnitude bound; see ledger for why this is not max(u_min, u_max)
        return max(abs(self.u_min), abs(self.u_max))

    @property
    def k(self) -> float:
        """Slope of the linear merging weight ``psi * x / L``."""
        return self.psi / self.L


class Neighbor(NamedTuple):
    x: float
    v: float
    u: float


@dataclass(frozen=True)
class NeighborView:
    ip: Optional[Neighbor] = None
    j: Optional[Neighbor] = None


class Barriers(NamedTuple):
    h1: float
    h2: float
    h3: Optional[float]
    h4: Optional[float]


class Margins(NamedTuple):
    nu1: float
    nu2: float
    nu3: float
    nu4: float


def eval_barriers(ego, nb: NeighborView, p: BarrierParams) -> Barriers:
    x, v = ego.x, ego.v
    h3 = None if nb.ip is None else nb.ip.x - x - p.psi * v - p.l
    h4 = None if nb.j is None else nb.j.x - x - p.k * x * v - p.l
    return Barriers(p.v_max - v, v - p.v_min, h3, h4)


def margins(ego, nb: NeighborView, p: BarrierParams, horizon: Optional[float] = None) -> Margins:
    """Worst-case drift of each CBF constraint over ``horizon`` seconds.

    A constraint satisfied with this much slack at the trigger instant stays
    satisfied for the whole interval, whatever admissible control the ego
    applies and with neighbours holding their recorded controls.
    """
    T = p.T_d if horizon is None else horizon
    uM, psi, k = p.u_M, p.psi, p.k
    x, v = abs(ego.x), abs(ego.v)
    nu1 = nu2 = uM * T
    nu3 = nu4 = 0.0
    if nb.ip is not None:
        u_ip = abs(nb.ip.u)
        dv = abs(nb.ip.v - ego.v)
        nu3 = (u_ip + (1.0 + psi) * uM + dv) * T + 0.5 * T * T * (u_ip + uM)
    if nb.j is not None:
        u_j, v_j = abs(nb.j.u), abs(nb.j.v)
        nu4 = (
            (u_j + (3 * k * v + k * x + 1.0) * uM + v_j + v + k * v * v) * T
            + (1.5 * k * uM * uM + 0.5 * u_j + 0.5 * uM + 1.5 * k * v * uM) * T * T
            + 0.5 * k * uM * uM * T**3
        )
    return Margins(nu1, nu2, nu3, nu4)


def constraint_values(ego, nb: NeighborView, p: BarrierParams, u: float) -> dict:
    """Original (untightened) CBF constraint values ``C_k(t, u)``."""
    h = eval_barriers(ego, nb, p)
    out = {"speed_max": -u + h.h1, "speed_min": u + h.h2}
    if nb.ip is not None:
        out["rear_end"] = nb.ip.v - ego.v - p.psi * u + h.h3
    if nb.j is not None:
        out["merge"] = nb.j.v - ego.v - p.k * ego.v**2 - p.k * ego.x * u + h.h4
    return out


def build_qp(ego, nb: NeighborView, ref: tuple[float, float], p: BarrierParams,
             rho: float, tighten: bool) -> QpProblem:
    u_star, v_star = ref
    h = eval_barriers(ego, nb, p)
    nu = margins(ego, nb, p) if tighten else Margins(0.0, 0.0, 0.0, 0.0)
    e = ego.v - v_star
    rows = [
        ConstraintRow(e, -1.0, -p.c3 * e * e, "clf"),
        ConstraintRow(1.0, 0.0, h.h1 - nu.nu1, "speed_max"),
        ConstraintRow(-1.0, 0.0, h.h2 - nu.nu2, "speed_min"),
    ]
    if nb.ip is not None:
        rows.append(ConstraintRow(p.psi, 0.0, nb.ip.v - ego.v + h.h3 - nu.nu3, "rear_end"))
    if nb.j is not None:
        rhs = nb.j.v - ego.v - p.k * ego.v**2 + h.h4 - nu.nu4
        rows.append(ConstraintRow(p.k * ego.x, 0.0, rhs, "merge"))
    rows.append(ConstraintRow(-1.0, 0.0, -p.u_min, "u_bound_lo"))
    rows.append(ConstraintRow(1.0, 0.0, p.u_max, "u_bound_hi"))
    return QpProblem(u_star=u_star, rho=rho, rows=rows, u_lo=p.u_min, u_hi=p.u_max)
