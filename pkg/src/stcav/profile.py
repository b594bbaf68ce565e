"""Unconstrained time/energy optimal reference for a single CAV.

Minimising ``beta * (tf - t0) + int 0.5 u^2`` with free terminal speed and
free exit time gives an affine control ``u*(t) = a t + b``.  The five
unknowns ``(a, b, c, d, tf)`` are fixed by the boundary conditions at
arrival, the exit position, ``u*(tf) = 0`` and the free-time condition
``beta + a v*(tf) = 0``.

Coefficients are expressed in elapsed time since arrival, ``tau = t - t0``.
Absolute-time coefficients become badly conditioned once ``t0`` is a few
hundred seconds into a run.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq


class NoConvergence(RuntimeError):
    pass


class InfeasibleProfile(ValueError):
    pass


@dataclass(frozen=True)
class OptimalProfile:
    a: float
    b: float
    c: float
    d: float
    tf: float
    t0: float
    beta: float
    L: float

    @property
    def duration(self) -> float:
        return self.tf - self.t0

    def elapsed(self, t: float) -> float:
        return t - self.t0

    def u(self, tau: float) -> float:
        return self.a * tau + self.b

    def v(self, tau: float) -> float:
        return (0.5 * self.a * tau + self.b) * tau + self.c

    def x(self, tau: float) -> float:
        return ((self.a * tau / 6.0 + 0.5 * self.b) * tau + self.c) * tau + self.d


def residuals(z, x0: float, v0: float, L: float, beta: float) -> np.ndarray:
    a, b, c, d, T = z
    vT = (0.5 * a * T + b) * T + c
    return np.array([
        c - v0,
        d - x0,
        ((a * T / 6.0 + 0.5 * b) * T + c) * T + d - L,
        a * T + b,
        beta + a * vT,
    ])


def _jacobian(z) -> np.ndarray:
    a, b, c, d, T = z
    vT = (0.5 * a * T + b) * T + c
    return np.array([
        [0.0, 0.0, 1.0, 0.0, 0.0],
        [0.0, 0.0, 0.0, 1.0, 0.0],
        [T**3 / 6.0, 0.5 * T**2, T, 1.0, vT],
        [T, 1.0, 0.0, 0.0, a],
        [vT + 0.5 * a * T**2, a * T, a, 0.0, a * (a * T + b)],
    ])


def _newton(x0, v0, L, beta, max_iter=60, tol=1e-11):
    T = (L - x0) / v0
    # free-time condition evaluated at the arrival speed
    a = -max(beta, 1e-3) / v0
    z = np.array([a, -a * T, v0, x0, T])
    r = residuals(z, x0, v0, L, beta)
    norm = np.linalg.norm(r)
    for _ in range(max_iter):
        if norm <= tol:
            return z
        try:
            step = np.linalg.solve(_jacobian(z), -r)
        except np.linalg.LinAlgError:
            return None
        lam = 1.0
        while lam > 1e-10:
            trial = z + lam * step
            if trial[4] > 0:
                r_trial = residuals(trial, x0, v0, L, beta)
                n_trial = np.linalg.norm(r_trial)
                if n_trial < (1.0 - 1e-4 * lam) * norm:
                    break
            lam *= 0.5
        else:
            return None
        z, r, norm = trial, r_trial, n_trial
    return z if norm <= 1e-9 else None


def _coeffs_for_duration(x0, v0, L, T):
    # x(T) = L and u(T) = 0 with the arrival state fixed.
    a = -3.0 * ((L - x0) - v0 * T) / T**3
    return np.array([a, -a * T, v0, x0, T])


def _bisect(x0, v0, L, beta):
    def g(T):
        return residuals(_coeffs_for_duration(x0, v0, L, T), x0, v0, L, beta)[4]

    hi = (L - x0) / v0
    if beta == 0.0:
        return _coeffs_for_duration(x0, v0, L, hi)
    lo = hi
    while g(lo) > 0:
        lo *= 0.5
        if lo < 1e-12:
            raise NoConvergence("could not bracket the exit time")
    T = brentq(g, lo, hi, xtol=1e-14, rtol=4 * np.finfo(float).eps, maxiter=500)
    return _coeffs_for_duration(x0, v0, L, T)


def solve_unconstrained(x0: float, v0: float, t0: float, L: float, beta: float) -> OptimalProfile:
    """Solve for the unconstrained optimum of a CAV entering at ``(x0, v0)`` at ``t0``."""
    if not 0.0 <= x0 < L:
        raise ValueError(f"x0={x0} must lie in [0, {L})")
    if v0 <= 0.0:
        raise ValueError(f"v0 must be positive, got {v0}")
    if beta < 0.0:
        raise ValueError(f"beta must be non-negative, got {beta}")

    z = _newton(x0, v0, L, beta)
    if z is None:
        z = _bisect(x0, v0, L, beta)
    if np.linalg.norm(residuals(z, x0, v0, L, beta)) > 1e-9:
        raise NoConvergence(f"residual too large for x0={x0}, v0={v0}, beta={beta}")

    a, b, c, d, T = (float(q) for q in z)
    profile = OptimalProfile(a=a, b=b, c=c, d=d, tf=t0 + T, t0=t0, beta=beta, L=L)
    if _min_speed(profile) <= 0.0:
        raise InfeasibleProfile("reference speed reaches zero inside the control zone")
    return profile


def _min_speed(p: OptimalProfile) -> float:
    T = p.duration
    candidates = [p.v(0.0), p.v(T)]
    if p.a != 0.0:
        tau = -p.b / p.a
        if 0.0 < tau < T:
            candidates.append(p.v(tau))
    return min(candidates)


def ref_at(profile: OptimalProfile, t: float) -> tuple[float, float]:
    """Reference acceleration and speed at absolute time ``t``.

    Past the exit time the reference holds ``u* = 0`` at the exit speed.
    """
    tau = profile.elapsed(t)
    if tau < -1e-9:
        raise ValueError(f"t={t} precedes arrival time {profile.t0}")
    tau = max(tau, 0.0)
    T = profile.duration
    if tau > T:
        return 0.0, profile.v(T)
    return profile.u(tau), profile.v(tau)


def position_at(profile: OptimalProfile, t: float) -> float:
    tau = profile.elapsed(t)
    T = profile.duration
    if tau > T:
        return profile.x(T) + profile.v(T) * (tau - T)
    return profile.x(tau)


def profile_cost(profile: OptimalProfile) -> float:
    T = profile.duration
    # u = a (tau - T) on [0, T]
    return profile.beta * T + profile.a**2 * T**3 / 6.0


def beta_from_alpha(alpha: float, u_min: float, u_max: float) -> float:
    if not 0.0 <= alpha < 1.0:
        raise ValueError(f"alpha must lie in [0, 1), got {alpha}")
    return alpha * max(u_max**2, u_min**2) / (2.0 * (1.0 - alpha))
