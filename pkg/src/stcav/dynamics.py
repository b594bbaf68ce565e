"""Double-integrator propagation for CAVs under piecewise-constant control."""

from __future__ import annotations

from dataclasses import dataclass, replace

MAIN = "main"
RAMP = "ramp"
LANES = (MAIN, RAMP)


class StaleRecord(RuntimeError):
    """A coordinator record was queried past its owner's next update time."""


@dataclass(frozen=True)
class CavState:
    id: int
    lane: str
    x: float
    v: float
    u: float = 0.0
    t0: float = 0.0
    last_update: float = 0.0
    next_update: float = 0.0


def kinematics(x: float, v: float, u: float, dt: float) -> tuple[float, float]:
    """Closed-form position and speed after holding ``u`` for ``dt`` seconds."""
    return x + v * dt + 0.5 * u * dt * dt, v + u * dt


def propagate(state: CavState, dt: float) -> CavState:
    if dt < 0:
        raise ValueError(f"dt must be non-negative, got {dt}")
    x, v = kinematics(state.x, state.v, state.u, dt)
    return replace(state, x=x, v=v)


def extrapolate(record, t: float, tol: float = 1e-9) -> tuple[float, float]:
    """Position and speed of a record's owner at time ``t``.

    The owner holds ``record.u_last`` from ``record.t_last`` until
    ``record.t_next``, so the record is only valid on that window.
    """
    if t > record.t_next + tol:
        raise StaleRecord(
            f"record of CAV {record.id} valid until {record.t_next}, queried at {t}"
        )
    if t < record.t_last - tol:
        raise ValueError(f"query time {t} precedes record time {record.t_last}")
    dt = t - record.t_last
    return kinematics(record.x_last, record.v_last, record.u_last, dt)
