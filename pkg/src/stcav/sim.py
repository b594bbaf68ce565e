"""Discrete-event merging simulation on the ``T_d`` time grid."""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field
from typing import NamedTuple, Optional

import numpy as np

from .barriers import Neighbor, NeighborView, build_qp, constraint_values
from .config import ScenarioConfig
from .coordinator import Coordinator
from .dynamics import LANES, MAIN, kinematics
from .profile import OptimalProfile, ref_at, solve_unconstrained
from .qp import QpInfeasible, solve
from .triggers import (
    INF,
    next_update_time,
    next_violation_merge,
    next_violation_rear_end,
    next_violation_speed_max,
    next_violation_speed_min,
)

log = logging.getLogger(__name__)

SAFETY_TOL = 1e-6
# give up this long after the last arrival if CAVs are still in the zone
DRAIN_LIMIT = 1000.0


class Ego(NamedTuple):
    x: float
    v: float


def gen_arrivals(cfg: ScenarioConfig, lane: str) -> list[tuple[float, float]]:
    """Seeded Poisson arrival stream ``[(t0, v0), ...]`` for one lane.

    Arrival times are rounded up to the ``T_d`` grid.  The stream depends only
    on the seed, rate, speed range and horizon, never on the control scheme.
    """
    rate = cfg.arrival_rate.get(lane, 0.0)
    if rate <= 0.0:
        return []
    rng = np.random.default_rng([cfg.seed, LANES.index(lane)])
    lo, hi = cfg.v0_range
    out = []
    t = 0.0
    while True:
        t += rng.exponential(1.0 / rate)
        v0 = float(rng.uniform(lo, hi))
        if t > cfg.duration:
            break
        tick = math.ceil(t / cfg.T_d - 1e-9)
        out.append((tick * cfg.T_d, v0))
        if cfg.max_cavs is not None and len(out) >= cfg.max_cavs:
            break
    return out


def arrival_schedule(cfg: ScenarioConfig) -> list[tuple[float, str, float]]:
    """Both lanes merged by time (main lane first on ties), capped at ``max_cavs``."""
    merged = [(t, lane, v0) for lane in LANES for t, v0 in gen_arrivals(cfg, lane)]
    merged.sort(key=lambda a: (a[0], a[1] != MAIN))
    if cfg.max_cavs is not None:
        merged = merged[: cfg.max_cavs]
    return merged


def fuel_rate(v: float, u: float, omega, r) -> float:
    w0, w1, w2, w3 = omega
    r0, r1, r2 = r
    cruise = w0 + v * (w1 + v * (w2 + v * w3))
    return cruise + (r0 + v * (r1 + v * r2)) * max(u, 0.0)


@dataclass
class Vehicle:
    id: int
    lane: str
    t0: float
    v0: float
    profile: OptimalProfile
    x: float = 0.0
    v: float = 0.0
    u: float = 0.0
    next_tick: int = 0
    reason: str = "arrival"
    triggers: list = field(default_factory=list)
    energy: float = 0.0
    fuel: float = 0.0
    t_exit: Optional[float] = None
    infeasible: int = 0
    entry_delay: float = 0.0


@dataclass
class RunMetrics:
    scheme: str
    alpha: float
    T_max: float
    seed: int
    n_arrivals: int = 0
    n_completed: int = 0
    avg_travel_time: float = float("nan")
    avg_energy: float = float("nan")
    avg_fuel: float = float("nan")
    total_communications: int = 0
    min_trigger_gap: Optional[float] = None
    infeasible_events: int = 0
    delayed_entries: int = 0
    truncated: bool = False
    violations: list = field(default_factory=list)
    per_cav: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class RunResult:
    metrics: RunMetrics
    trace: list
    coordinator: Coordinator


TRACE_COLUMNS = ("t", "id", "lane", "x", "v", "u", "h1", "h2", "h3", "h4", "trigger_flag", "reason")


class Simulation:
    def __init__(self, cfg: ScenarioConfig, trace: bool = False, coordinator_trace: bool = False):
        self.cfg = cfg
        self.p = cfg.barrier
        self.T_d = cfg.T_d
        self.record_trace = trace
        self.coord = Coordinator(cfg.T_d, self.p.L, trace=coordinator_trace)
        self.vehicles: dict[int, Vehicle] = {}
        self.active: list[int] = []
        self.departed: Optional[int] = None
        self.trace: list = []
        self.violations: list = []
        self.exit_order: list[int] = []
        self.self_triggered = cfg.scheme == "self_triggered"
        self.tighten = cfg.scheme != "time_triggered"
        self.beta = cfg.beta

    # -- arrivals -------------------------------------------------------
    def _entry_ok(self, lane: str, v0: float, t: float) -> bool:
        p = self.p
        chain = ([self.departed] if self.departed is not None else []) + self.coord.order
        if not chain:
            return True
        tail = self.coord.lane_tail(lane)
        ip = j = None
        if tail is not None:
            ip = self._neighbor_state(tail)
            if ip.x < p.psi * v0 + p.l:
                return False
        pred = chain[-1]
        if self.vehicles[pred].lane != lane:
            j = self._neighbor_state(pred)
        qp = build_qp(Ego(0.0, v0), NeighborView(ip, j), (0.0, v0), p, self.cfg.rho, tighten=True)
        try:
            solve(qp)
        except QpInfeasible:
            return False
        return True

    def _neighbor_state(self, id: int) -> Neighbor:
        veh = self.vehicles[id]
        return Neighbor(veh.x, veh.v, veh.u)

    def _admit(self, t: float, tick: int, lane: str, t_sched: float, v0: float):
        vid = len(self.vehicles)
        profile = solve_unconstrained(0.0, v0, t, self.p.L, self.beta)
        veh = Vehicle(id=vid, lane=lane, t0=t, v0=v0, profile=profile, x=0.0, v=v0,
                      next_tick=tick, entry_delay=t - t_sched)
        self.vehicles[vid] = veh
        self.active.append(vid)
        self.coord.register_arrival(vid, lane, t, 0.0, v0)

    # -- control --------------------------------------------------------
    def _fallback_u(self, v: float) -> float:
        # hardest braking that does not undershoot v_min within one interval
        return min(0.0, max(self.p.u_min, (self.p.v_min - v) / self.T_d))

    def _decide(self, veh: Vehicle, tick: int):
        p, cfg = self.p, self.cfg
        t = tick * self.T_d
        hood = self.coord.neighbors(veh.id, t)
        view = hood.view
        simultaneous = self.self_triggered and any(
            nx is not None and round(nx / self.T_d) == tick for nx in (hood.ip_next, hood.j_next)
        )
        qp_view = view
        if simultaneous:
            # neighbours re-plan at this very instant: assume their worst-case control
            qp_view = NeighborView(
                None if view.ip is None else view.ip._replace(u=p.u_M),
                None if view.j is None else view.j._replace(u=p.u_M),
            )
        ego = Ego(veh.x, veh.v)
        if cfg.resolve_profile and veh.x < p.L and tick * self.T_d > veh.t0:
            try:
                veh.profile = solve_unconstrained(veh.x, max(veh.v, 1e-3), t, p.L, self.beta)
            except (ValueError, RuntimeError):
                pass
        ref = ref_at(veh.profile, t)
        infeasible = False
        try:
            u = solve(build_qp(ego, qp_view, ref, p, cfg.rho, self.tighten)).u
        except QpInfeasible:
            u = self._fallback_u(veh.v)
            infeasible = True

        if not self.self_triggered:
            return u, tick + cfg.ticks_per_sample, "sampled", infeasible
        if infeasible:
            return u, tick + 1, "infeasible", infeasible
        if simultaneous:
            return u, tick + 1, "simultaneous", infeasible

        C = constraint_values(ego, view, p, u)
        t1 = next_violation_speed_max(t, veh.v, u, p)
        t2 = next_violation_speed_min(t, veh.v, u, p)
        t3 = t4 = INF
        if view.ip is not None:
            t3 = next_violation_rear_end(t, (veh.v, u), (view.ip.v, view.ip.u), C["rear_end"], p)
        if view.j is not None:
            t4 = next_violation_merge(t, (veh.x, veh.v, u), (view.j.v, view.j.u), C["merge"], p)
        out = next_update_time(t, (t1, t2, t3, t4), (hood.ip_next, hood.j_next), p, cfg.T_max)
        return u, out.next_tick, out.reason, infeasible

    # -- checks and bookkeeping -----------------------------------------
    def _violation(self, kind, t, id, value):
        self.violations.append({"kind": kind, "t": t, "id": id, "value": value})

    def _check_tick(self, t: float, triggered: set):
        p = self.p
        for vid in self.active:
            veh = self.vehicles[vid]
            if not p.v_min - SAFETY_TOL <= veh.v <= p.v_max + SAFETY_TOL:
                self._violation("speed", t, vid, veh.v)
            if not p.u_min - 1e-12 <= veh.u <= p.u_max + 1e-12:
                self._violation("control", t, vid, veh.u)
            ip_id, j_id = self.coord.resolve(vid)
            h3 = h4 = None
            if ip_id is not None:
                ip = self.vehicles[ip_id]
                h3 = ip.x - veh.x - p.psi * veh.v - p.l
                if h3 < -SAFETY_TOL:
                    self._violation("rear_end", t, vid, h3)
            if self.record_trace:
                if j_id is not None:
                    j = self.vehicles[j_id]
                    h4 = j.x - veh.x - p.k * veh.x * veh.v - p.l
                self.trace.append((
                    t, vid, veh.lane, veh.x, veh.v, veh.u, p.v_max - veh.v, veh.v - p.v_min,
                    h3, h4, int(vid in triggered), veh.reason if vid in triggered else "",
                ))

    def _integrate(self, veh: Vehicle, dt: float):
        cfg = self.cfg
        x1, v1 = kinematics(veh.x, veh.v, veh.u, dt)
        veh.energy += 0.5 * veh.u * veh.u * dt
        veh.fuel += 0.5 * dt * (fuel_rate(veh.v, veh.u, cfg.omega, cfg.r)
                                + fuel_rate(v1, veh.u, cfg.omega, cfg.r))
        return x1, v1

    def _crossing_time(self, veh: Vehicle, dt: float) -> float:
        # smallest tau in (0, dt] with x + v tau + u tau^2 / 2 = L
        gap = self.p.L - veh.x
        a, b = 0.5 * veh.u, veh.v
        if abs(a) < 1e-15:
            tau = gap / b
        else:
            disc = max(b * b + 4.0 * a * gap, 0.0)
            q = -0.5 * (b + math.copysign(math.sqrt(disc), b))
            roots = [r for r in (q / a if a else INF, -gap / q if q else INF) if 0.0 <= r <= dt + 1e-12]
            tau = min(roots) if roots else dt
        return min(max(tau, 0.0), dt)

    def _step_motion(self, t: float):
        p, dt = self.p, self.T_d
        crossings = []
        for vid in self.active:
            veh = self.vehicles[vid]
            x1, _ = kinematics(veh.x, veh.v, veh.u, dt)
            if veh.t_exit is None and x1 >= p.L:
                crossings.append(vid)
        for vid in crossings:
            veh = self.vehicles[vid]
            tau = self._crossing_time(veh, dt)
            pred_id = self.coord.fifo_predecessor(vid)
            if pred_id is not None:
                pred = self.vehicles[pred_id]
                x_pred, _ = kinematics(pred.x, pred.v, pred.u, tau)
                _, v_c = kinematics(veh.x, veh.v, veh.u, tau)
                z = x_pred - p.L
                slack = z - p.psi * v_c - p.l
                if slack < -SAFETY_TOL:
                    kind = "merge" if pred.lane != veh.lane else "rear_end_exit"
                    self._violation(kind, t + tau, vid, slack)
            # metrics up to the merging point, motion for the full step below
            self._integrate(veh, tau)
            veh.t_exit = t + tau

        for vid in self.active:
            veh = self.vehicles[vid]
            if veh.t_exit is None:
                veh.x, veh.v = self._integrate(veh, dt)
            else:
                veh.x, veh.v = kinematics(veh.x, veh.v, veh.u, dt)
        if self.departed is not None:
            d = self.vehicles[self.departed]
            d.x, d.v = kinematics(d.x, d.v, d.u, dt)

    def _retire_crossed(self, t: float):
        crossed = [vid for vid in self.coord.order if self.vehicles[vid].t_exit is not None]
        for vid in crossed:
            if self.coord.order[0] != vid:
                self._violation("fifo_order", t, vid, self.coord.order.index(vid))
            self.coord.retire(vid, t)
            veh = self.vehicles[vid]
            veh.u = 0.0
            self.active.remove(vid)
            self.departed = vid
            self.exit_order.append(vid)

    # -- main loop ------------------------------------------------------
    def run(self) -> RunResult:
        cfg, T_d = self.cfg, self.T_d
        schedule = arrival_schedule(cfg)
        pending = {lane: [a for a in schedule if a[1] == lane] for lane in LANES}
        last_arrival = max((a[0] for a in schedule), default=0.0)
        max_tick = int(math.ceil((last_arrival + DRAIN_LIMIT) / T_d))
        tick = 0
        truncated = False
        while True:
            t = tick * T_d
            self._retire_crossed(t)
            for lane in LANES:
                queue = pending[lane]
                if queue and queue[0][0] <= t + 1e-9 and self._entry_ok(lane, queue[0][2], t):
                    t_sched, _, v0 = queue.pop(0)
                    self._admit(t, tick, lane, t_sched, v0)

            due = [vid for vid in self.coord.order if self.vehicles[vid].next_tick == tick]
            decisions = [(vid, self._decide(self.vehicles[vid], tick)) for vid in due]
            for vid, (u, next_tick, reason, infeasible) in decisions:
                veh = self.vehicles[vid]
                veh.u = u
                veh.triggers.append(tick)
                veh.next_tick = next_tick
                veh.infeasible += infeasible
                self.coord.publish(vid, t, veh.x, veh.v, u, next_tick * T_d)
                if infeasible:
                    log.debug("infeasible QP for CAV %d at t=%.2f", vid, t)
            # reason column reports why this trigger happened
            triggered = set(due)
            self._check_tick(t, triggered)
            for vid, (_, _, reason, _) in decisions:
                self.vehicles[vid].reason = reason

            if not self.active and not any(pending.values()):
                break
            if tick >= max_tick:
                truncated = True
                log.warning("run truncated at t=%.1f with %d CAVs still active", t, len(self.active))
                break
            self._step_motion(t)
            tick += 1

        return RunResult(self._metrics(schedule, truncated), self.trace, self.coord)

    def _metrics(self, schedule, truncated) -> RunMetrics:
        cfg = self.cfg
        m = RunMetrics(scheme=cfg.scheme, alpha=cfg.alpha, T_max=cfg.T_max, seed=cfg.seed,
                       n_arrivals=len(schedule), truncated=truncated)
        done = [v for v in self.vehicles.values() if v.t_exit is not None and v.id not in self.active]
        gaps = []
        for veh in done:
            comms = len(veh.triggers)
            gaps.extend(np.diff(veh.triggers).tolist())
            m.per_cav.append({
                "id": veh.id, "lane": veh.lane, "t0": veh.t0, "v0": veh.v0, "t_exit": veh.t_exit,
                "travel_time": veh.t_exit - veh.t0, "energy": veh.energy, "fuel": veh.fuel,
                "communications": comms, "infeasible": veh.infeasible,
                "entry_delay": veh.entry_delay,
            })
            m.total_communications += comms
            m.infeasible_events += veh.infeasible
            m.delayed_entries += veh.entry_delay > 1e-9
        m.n_completed = len(done)
        if done:
            m.avg_travel_time = float(np.mean([c["travel_time"] for c in m.per_cav]))
            m.avg_energy = float(np.mean([c["energy"] for c in m.per_cav]))
            m.avg_fuel = float(np.mean([c["fuel"] for c in m.per_cav]))
        if gaps:
            m.min_trigger_gap = min(gaps) * cfg.T_d
            if min(gaps) < 1:
                self._violation("inter_event", None, None, min(gaps) * cfg.T_d)
        m.violations = list(self.violations)
        return m


def run(cfg: ScenarioConfig, trace: bool = False, coordinator_trace: bool = False) -> RunResult:
    return Simulation(cfg, trace=trace, coordinator_trace=coordinator_trace).run()
