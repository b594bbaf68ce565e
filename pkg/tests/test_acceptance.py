"""Acceptance criteria 1-10, one test each.

Each test records a one-line PASS/FAIL verdict; the lines are printed as they
happen and again in a block at the end of the session.
"""

import math
import time

import numpy as np
import pytest

from stcav import qp
from stcav.barriers import BarrierParams
from stcav.config import default_config
from stcav.oracles import (
    TRIGGER_KINDS,
    interval_min,
    qp_grid_solve,
    random_feasible_state,
    random_profile_case,
    random_qp,
    random_trigger_case,
    shooting_exit_time,
    trigger_deviation,
)
from stcav.profile import residuals, solve_unconstrained
from stcav.sim import run

# pinned tolerances
SEEDS = (0, 1, 2, 3, 4)
ALPHAS = (0.1, 0.25)
T_MAXES = (0.5, 1.0, 1.5, 2.0)
N_CAVS = 24
MIN_COMPLETED = 20
COMM_RATIO_MAX = 0.35
CELL_SECONDS_MAX = 120.0
ENERGY_NOISE = 0.05
MOD_TRAVEL_REL = 0.02
MOD_ENERGY_REL = 0.10
PARITY_TRAVEL_REL = 0.05
SAFETY_TOL = 1e-6
SAFETY_KINDS = ("rear_end", "merge", "rear_end_exit")
N_INTERVAL = 10_000
INTERVAL_GRID = 1e-3
N_TRIGGER = 10_000
TRIGGER_TOL = 1e-6
N_PROFILE = 50
TF_TOL = 1e-4
RESIDUAL_TOL = 1e-9
N_QP = 10_000
QP_GAP = 1e-6

VERDICTS: list[str] = []


def verdict(n: int, ok: bool, detail: str) -> None:
    line = f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
    VERDICTS.append(line)
    print(line)


@pytest.fixture(scope="module")
def runs():
    """Every scenario run used by criteria 1-6, keyed by (seed, alpha, scheme, T_max)."""
    out = {}
    for seed in SEEDS:
        for alpha in ALPHAS:
            cells = [("time_triggered", 0.5), ("time_triggered_modified", 0.5)]
            cells += [("self_triggered", tm) for tm in T_MAXES]
            for scheme, tm in cells:
                cfg = default_config(scheme=scheme, alpha=alpha, seed=seed, T_max=tm,
                                     arrivals={"max_cavs": N_CAVS})
                t0 = time.perf_counter()
                m = run(cfg).metrics
                out[(seed, alpha, scheme, tm)] = (m, time.perf_counter() - t0)
    return out


def _rel(a, b):
    return abs(a - b) / abs(b)


def test_criterion_01_communication_reduction(runs):
    worst, slowest, fewest = 0.0, 0.0, N_CAVS
    for seed in SEEDS:
        for alpha in ALPHAS:
            st, t_st = runs[(seed, alpha, "self_triggered", 0.5)]
            tt, t_tt = runs[(seed, alpha, "time_triggered", 0.5)]
            worst = max(worst, st.total_communications / tt.total_communications)
            slowest = max(slowest, t_st, t_tt)
            fewest = min(fewest, st.n_completed, tt.n_completed)
    ok = worst <= COMM_RATIO_MAX and slowest <= CELL_SECONDS_MAX and fewest >= MIN_COMPLETED
    verdict(1, ok, f"max self/time comm ratio {worst:.3f} (<= {COMM_RATIO_MAX}), "
                   f"min completed {fewest}, slowest cell {slowest:.1f} s")
    assert ok


def test_criterion_02_monotone_in_T_max(runs):
    bad = []
    for seed in SEEDS:
        for alpha in ALPHAS:
            ms = [runs[(seed, alpha, "self_triggered", tm)][0] for tm in T_MAXES]
            comms = [m.total_communications for m in ms]
            energy = [m.avg_energy for m in ms]
            comm_ok = all(b <= a for a, b in zip(comms, comms[1:]))
            energy_ok = all(b >= a * (1 - ENERGY_NOISE) for a, b in zip(energy, energy[1:]))
            if not (comm_ok and energy_ok):
                bad.append(f"seed {seed} alpha {alpha}: comms {comms}, "
                           f"energy {[round(e, 3) for e in energy]}")
    verdict(2, not bad, f"{len(bad)} of {len(SEEDS) * len(ALPHAS)} (seed, alpha) sequences "
                        f"break monotonicity" + ("; " + " | ".join(bad) if bad else ""))
    assert not bad


def test_criterion_03_modified_near_equivalence(runs):
    worst_t = worst_e = 0.0
    for seed in SEEDS:
        tt = runs[(seed, 0.25, "time_triggered", 0.5)][0]
        tm = runs[(seed, 0.25, "time_triggered_modified", 0.5)][0]
        worst_t = max(worst_t, _rel(tm.avg_travel_time, tt.avg_travel_time))
        worst_e = max(worst_e, _rel(tm.avg_energy, tt.avg_energy))
    ok = worst_t <= MOD_TRAVEL_REL and worst_e <= MOD_ENERGY_REL
    verdict(3, ok, f"max travel-time gap {100 * worst_t:.2f}% (<= {100 * MOD_TRAVEL_REL:g}%), "
                   f"max energy gap {100 * worst_e:.2f}% (<= {100 * MOD_ENERGY_REL:g}%)")
    assert ok


def test_criterion_04_travel_time_parity(runs):
    worst = 0.0
    for seed in SEEDS:
        for alpha in ALPHAS:
            st = runs[(seed, alpha, "self_triggered", 0.5)][0]
            tt = runs[(seed, alpha, "time_triggered", 0.5)][0]
            worst = max(worst, _rel(st.avg_travel_time, tt.avg_travel_time))
    ok = worst <= PARITY_TRAVEL_REL
    verdict(4, ok, f"max self vs time travel-time gap {100 * worst:.2f}% (<= {100 * PARITY_TRAVEL_REL:g}%)")
    assert ok


def test_criterion_05_minimum_inter_event(runs):
    T_d = default_config().T_d
    gaps = []
    for seed in SEEDS:
        for alpha in ALPHAS:
            for scheme in ("self_triggered", "time_triggered"):
                gaps.append(runs[(seed, alpha, scheme, 0.5)][0].min_trigger_gap)
    ok = all(g is not None and g >= T_d for g in gaps)
    verdict(5, ok, f"min trigger gap {min(gaps):g} s (>= T_d = {T_d:g} s)")
    assert ok


def test_criterion_06_safety_invariants(runs):
    by_scheme = {}
    worst = 0.0
    for (seed, alpha, scheme, tm), (m, _) in runs.items():
        hits = [v for v in m.violations if v["kind"] in SAFETY_KINDS and v["value"] < -SAFETY_TOL]
        if hits:
            by_scheme[scheme] = by_scheme.get(scheme, 0) + len(hits)
            worst = min(worst, min(v["value"] for v in hits))
    detail = ", ".join(f"{k}: {n}" for k, n in sorted(by_scheme.items())) or "none"
    verdict(6, not by_scheme, f"violations by scheme: {detail}; worst slack {worst:.3e} m "
                              f"(tolerance {SAFETY_TOL:g} m)")
    assert not by_scheme


def test_criterion_07_interval_guarantee():
    p = BarrierParams()
    rng = np.random.default_rng(7)
    worst, fails = math.inf, 0
    for _ in range(N_INTERVAL):
        ego, nb, u = random_feasible_state(rng, p)
        val = interval_min(ego, nb, u, p, step=INTERVAL_GRID)
        worst = min(worst, val)
        fails += val < -SAFETY_TOL
    verdict(7, fails == 0, f"{N_INTERVAL - fails}/{N_INTERVAL} states keep every constraint "
                           f">= -{SAFETY_TOL:g} over T_d; worst {worst:.3e}")
    assert fails == 0


def test_criterion_08_trigger_oracle_equivalence():
    p = BarrierParams()
    rng = np.random.default_rng(8)
    parts, total_fail = [], 0
    for kind in TRIGGER_KINDS:
        worst, fails = 0.0, 0
        for _ in range(N_TRIGGER):
            dev = trigger_deviation(kind, *random_trigger_case(rng, kind, p), p)
            worst = max(worst, dev)
            fails += not dev <= TRIGGER_TOL
        total_fail += fails
        parts.append(f"{kind} max {worst:.1e} ({fails} fail)")
    verdict(8, total_fail == 0, f"{N_TRIGGER} instances per constraint, tol {TRIGGER_TOL:g} s: "
                                + ", ".join(parts))
    assert total_fail == 0


def test_criterion_09_unconstrained_optimum():
    rng = np.random.default_rng(9)
    worst_dt = worst_res = 0.0
    for _ in range(N_PROFILE):
        x0, v0, L, beta = random_profile_case(rng)
        prof = solve_unconstrained(x0, v0, 0.0, L, beta)
        z = [prof.a, prof.b, prof.c, prof.d, prof.duration]
        worst_res = max(worst_res, float(np.linalg.norm(residuals(z, x0, v0, L, beta))))
        worst_dt = max(worst_dt, abs(prof.duration - shooting_exit_time(x0, v0, L, beta)))
    ok = worst_dt <= TF_TOL and worst_res <= RESIDUAL_TOL
    verdict(9, ok, f"{N_PROFILE} triples: max |dtf| {worst_dt:.2e} s (<= {TF_TOL:g}), "
                   f"max residual {worst_res:.2e} (<= {RESIDUAL_TOL:g})")
    assert ok


def test_criterion_10_qp_solver():
    rng = np.random.default_rng(10)
    worst, fails, nondet = 0.0, 0, 0
    for _ in range(N_QP):
        prob = random_qp(rng)
        a, b = qp.solve(prob), qp.solve(prob)
        nondet += a != b
        gap = abs(a.objective - qp_grid_solve(prob)[1])
        worst = max(worst, gap)
        fails += not gap <= QP_GAP
    ok = fails == 0 and nondet == 0
    verdict(10, ok, f"{N_QP} problems: max objective gap {worst:.2e} (<= {QP_GAP:g}), "
                    f"{nondet} non-deterministic")
    assert ok
