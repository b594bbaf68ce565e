"""Coordinator-side record store, FIFO sequencing and neighbour resolution.

The coordinator only relays information; it never computes a control.
"""

from __future__ import annotations

import json
import math
import threading
from dataclasses import asdict, dataclass, replace
from typing import Optional

from .barriers import Neighbor, NeighborView
from .dynamics import LANES, MAIN, extrapolate


class CoordinatorError(RuntimeError):
    pass


class DuplicateId(CoordinatorError):
    pass


class UnknownId(CoordinatorError):
    pass


class TimeRegression(CoordinatorError):
    pass


class PrematureExit(CoordinatorError):
    pass


class OffGrid(CoordinatorError):
    pass


@dataclass(frozen=True)
class CoordinatorRecord:
    id: int
    lane: str
    t_last: float
    t_next: float
    x_last: float
    v_last: float
    u_last: float
    departed: bool = False


@dataclass(frozen=True)
class Neighborhood:
    view: NeighborView
    ip_id: Optional[int] = None
    j_id: Optional[int] = None
    ip_next: Optional[float] = None
    j_next: Optional[float] = None


class Coordinator:
    """In-process store of the latest record of every CAV in the control zone.

    The most recently departed CAV stays visible as the FIFO predecessor of
    the current head until the next CAV leaves, so that the head keeps a
    merging (or rear-end) partner all the way to the merging point.
    """

    def __init__(self, T_d: float, L: float, trace: bool = False):
        self.T_d = T_d
        self.L = L
        self._records: dict[int, CoordinatorRecord] = {}
        self._order: list[int] = []
        self._arrival: dict[int, float] = {}
        self._departed: Optional[int] = None
        self._lock = threading.RLock()
        self.events: Optional[list] = [] if trace else None

    def _on_grid(self, t: float) -> bool:
        if math.isinf(t):
            return True
        n = t / self.T_d
        return abs(n - round(n)) <= 1e-6

    def _log(self, t, id, kind, rec):
        if self.events is not None:
            fields = asdict(rec)
            fields.pop("id")
            self.events.append({"t": t, "id": id, "kind": kind, "fields": fields})

    @property
    def order(self) -> list[int]:
        with self._lock:
            return list(self._order)

    @property
    def departed(self) -> Optional[int]:
        return self._departed

    def record(self, id: int) -> CoordinatorRecord:
        with self._lock:
            try:
                return self._records[id]
            except KeyError:
                raise UnknownId(id) from None

    def register_arrival(self, id: int, lane: str, t0: float, x0: float, v0: float) -> None:
        if lane not in LANES:
            raise ValueError(f"unknown lane {lane!r}")
        with self._lock:
            if id in self._records:
                raise DuplicateId(id)
            if not self._on_grid(t0):
                raise OffGrid(f"arrival time {t0} is off the T_d grid")
            rec = CoordinatorRecord(id, lane, t0, t0, x0, v0, 0.0)
            self._records[id] = rec
            self._arrival[id] = t0
            self._order.append(id)
            # simultaneous arrivals: main lane first, then by id
            self._order.sort(key=lambda i: (self._arrival[i], self._records[i].lane != MAIN, i))
            self._log(t0, id, "arrival", rec)

    def publish(self, id: int, t_k: float, x: float, v: float, u: float, t_next: float) -> None:
        with self._lock:
            rec = self.record(id)
            if rec.departed:
                raise UnknownId(f"CAV {id} has left the control zone")
            if t_k < rec.t_last - 1e-9:
                raise TimeRegression(f"CAV {id}: publish at {t_k} before last update {rec.t_last}")
            if not (self._on_grid(t_k) and self._on_grid(t_next)):
                raise OffGrid(f"CAV {id}: times ({t_k}, {t_next}) must lie on the T_d grid")
            if t_next < t_k:
                raise TimeRegression(f"CAV {id}: next update {t_next} precedes {t_k}")
            rec = replace(rec, t_last=t_k, t_next=t_next, x_last=x, v_last=v, u_last=u)
            self._records[id] = rec
            self._log(t_k, id, "publish", rec)

    def _chain(self) -> list[int]:
        return ([self._departed] if self._departed is not None else []) + self._order

    def fifo_predecessor(self, id: int) -> Optional[int]:
        with self._lock:
            chain = self._chain()
            if id not in chain:
                raise UnknownId(id)
            i = chain.index(id)
            return chain[i - 1] if i > 0 else None

    def resolve(self, id: int) -> tuple[Optional[int], Optional[int]]:
        """Ids of the same-lane predecessor and the merging-conflict CAV."""
        with self._lock:
            chain = self._chain()
            if id not in self._order:
                raise UnknownId(id)
            i = chain.index(id)
            lane = self._records[id].lane
            ip = next((c for c in reversed(chain[:i]) if self._records[c].lane == lane), None)
            j = chain[i - 1] if i > 0 and self._records[chain[i - 1]].lane != lane else None
            return ip, j

    def lane_tail(self, lane: str) -> Optional[int]:
        with self._lock:
            return next((c for c in reversed(self._chain()) if self._records[c].lane == lane), None)

    def _neighbor(self, id, t):
        rec = self._records[id]
        x, v = extrapolate(rec, t)
        return Neighbor(x, v, rec.u_last), (None if math.isinf(rec.t_next) else rec.t_next)

    def neighbors(self, id: int, t: float) -> Neighborhood:
        with self._lock:
            ip_id, j_id = self.resolve(id)
            ip = j = ip_next = j_next = None
            if ip_id is not None:
                ip, ip_next = self._neighbor(ip_id, t)
            if j_id is not None:
                j, j_next = self._neighbor(j_id, t)
            return Neighborhood(NeighborView(ip, j), ip_id, j_id, ip_next, j_next)

    def retire(self, id: int, t_exit: float) -> None:
        with self._lock:
            rec = self.record(id)
            if rec.departed or id not in self._order:
                raise UnknownId(f"CAV {id} is not active")
            x, v = extrapolate(rec, t_exit)
            if x < self.L - 1e-6:
                raise PrematureExit(f"CAV {id} at x={x} < L={self.L} at t={t_exit}")
            self._order.remove(id)
            if self._departed is not None:
                self._records.pop(self._departed, None)
            # past the merging point the CAV cruises at its exit speed
            rec = replace(rec, t_last=t_exit, t_next=math.inf, x_last=x, v_last=v,
                          u_last=0.0, departed=True)
            self._records[id] = rec
            self._departed = id
            self._log(t_exit, id, "retire", rec)

    def dump_trace(self, path) -> None:
        with open(path, "w") as fh:
            for ev in self.events or []:
                fh.write(json.dumps(ev, sort_keys=True, default=str) + "\n")
