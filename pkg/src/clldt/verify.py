"""Invariant checks across all modules, run by the ``verify`` subcommand."""

from __future__ import annotations

import time
import warnings
from dataclasses import asdict, dataclass

import numpy as np

from .core import DEFAULT_TOLERANCES, DecayWarning, Potential, SpatialGrid
from .darboux import (
    DarbouxSeed,
    apply_dt,
    dt_coefficients,
    inverse_seed,
    map_scattering_data,
    new_jost,
    removal_seed,
)
from .evolution import (
    evolve_reflection,
    run_evolution,
    soliton_solution,
    time_dependent_removal_seed,
)
from .jost import solve_jost
from .scattering import find_eigenvalues, newton_zero, scattering_curve, wronskian_a

SIGMA = np.array([[0, 1], [-1, 0]])
SECH_LAM1_GUESS = 0.40 + 0.45j
SOLITON_LAM1 = 0.8 + 0.6j
BOX = (0.1, 2.0, 0.1, 2.0)


@dataclass(frozen=True)
class CheckResult:
    name: str
    residual: float
    tolerance: float
    passed: bool
    seconds: float


def random_smooth_potential(grid: SpatialGrid, seed: int) -> Potential:
    """Sum of three modulated Gaussians with random centres, widths, amplitudes and phases."""
    rng = np.random.default_rng(seed)
    x = grid.x
    q = np.zeros_like(x, dtype=complex)
    for _ in range(3):
        amp = rng.uniform(0.1, 0.6) * np.exp(2j * np.pi * rng.uniform())
        c = rng.uniform(-4, 4)
        w = rng.uniform(0.7, 1.5)
        k = rng.uniform(-1.5, 1.5)
        q += amp * np.exp(-((x - c) / w) ** 2 + 1j * k * x)
    return Potential(grid, q)


def sech_potential(grid: SpatialGrid) -> Potential:
    """2 sqrt(2) sech(2x): a sech-shaped potential with exactly one eigenvalue."""
    return Potential.from_function(grid, lambda x: 2 * np.sqrt(2) / np.cosh(2 * x))


def _vacuum(grid):
    c = scattering_curve(Potential.zeros(grid), np.linspace(0.1, 3.0, 64))
    return max(np.max(np.abs(c.a - 1)), np.max(np.abs(c.b)))


def _unitarity(grid):
    worst = 0.0
    for s in range(3):
        c = scattering_curve(random_smooth_potential(grid, s), np.linspace(0.1, 2.5, 32))
        worst = max(worst, float(np.max(c.detS_residual)))
    return worst


def _symmetry(grid):
    worst = 0.0
    pot = random_smooth_potential(grid, 0)
    lam = 1 + 1j
    for side in ("minus", "plus"):
        psi = solve_jost(pot, lam, side).matrix()
        img = -SIGMA @ np.conj(solve_jost(pot, np.conj(lam), side).matrix()) @ SIGMA
        scale = np.maximum(1.0, np.abs(psi))
        worst = max(worst, float(np.max(np.abs(psi - img) / scale)))
        p1 = solve_jost(pot, lam, side).column_1.as_array()
        p2 = solve_jost(pot, -lam, side).column_1.as_array()
        worst = max(worst, float(np.max(np.abs(p1 - np.array([p2[0], -p2[1]])) / np.maximum(1, np.abs(p1)))))
    return worst


def _unit_c(grid):
    rng = np.random.default_rng(4)
    worst = 0.0
    for _ in range(100):
        lam1 = complex(rng.uniform(0.1, 2), rng.uniform(0.1, 2))
        f = rng.normal(size=grid.n_points) + 1j * rng.normal(size=grid.n_points)
        g = rng.normal(size=grid.n_points) + 1j * rng.normal(size=grid.n_points)
        seed = DarbouxSeed.from_arrays(grid, lam1, f, g, "inverse-formula")
        worst = max(worst, float(np.max(np.abs(np.abs(dt_coefficients(seed).C) - 1))))
    return worst


def _round_trip(grid):
    pot = sech_potential(grid)
    lam1 = newton_zero(pot, SECH_LAM1_GUESS)[0]
    seed = removal_seed(pot, lam1)
    back = apply_dt(apply_dt(pot, seed), inverse_seed(seed))
    return float(np.max(np.abs(back.q - pot.q)))


def _scattering_map(grid):
    pot = sech_potential(grid)
    lam1 = newton_zero(pot, SECH_LAM1_GUESS)[0]
    q1 = apply_dt(pot, removal_seed(pot, lam1))
    lams = np.linspace(0.1, 2.5, 32)
    c0, c1 = scattering_curve(pot, lams), scattering_curve(q1, lams)
    pred = map_scattering_data(c0, lam1, "remove")
    return float(max(np.max(np.abs(pred.a - c1.a)), np.max(np.abs(c1.b - c0.b))))


def _bookkeeping(grid):
    sol = soliton_solution(SOLITON_LAM1, 1, 1, 0.0, grid)
    recs = find_eigenvalues(sol, BOX)
    if len(recs) != 1:
        return float("inf")
    err = abs(recs[0].lam.value - SOLITON_LAM1)
    z0 = apply_dt(sol, removal_seed(sol, recs[0].lam.value))
    if find_eigenvalues(z0, BOX):
        return float("inf")
    return float(err)


def _rings(grid):
    pot = sech_potential(grid)
    lam1 = newton_zero(pot, SECH_LAM1_GUESS)[0]
    seed = removal_seed(pot, lam1)
    sups = []
    for eps in (1e-2, 1e-3, 1e-4):
        th = np.linspace(0, 2 * np.pi, 8, endpoint=False)
        sups.append(max(new_jost(pot, seed, lam1 + eps * np.exp(1j * t), "minus").column_1.sup_norm()
                        for t in th))
    return float(max(sups) / min(sups))


def _reflection_law(grid):
    x = grid.x
    q0 = Potential(grid, soliton_solution(SOLITON_LAM1, 1, 1, 0.0, grid).q
                   + 0.05 * np.exp(-((x - 3) ** 2) + 0.5j * x))
    lams = np.linspace(0.2, 1.5, 32)
    c0 = scattering_curve(q0, lams)
    T = 0.2
    final = run_evolution(q0, T, 5e-4, snap_every=10**9).final
    c1 = scattering_curve(final, lams)
    return float(np.max(np.abs(c1.l - evolve_reflection(lams, c0.l, T))))


def _soliton_dynamics(grid):
    sol = soliton_solution(SOLITON_LAM1, 1, 1, 0.0, grid)
    tr = run_evolution(sol, 0.25, 5e-4, snap_every=10**9)
    return float(np.max(np.abs(tr.final.q - soliton_solution(SOLITON_LAM1, 1, 1, 0.25, grid).q)))


def _mass(grid):
    sol = soliton_solution(SOLITON_LAM1, 1, 1, 0.0, grid)
    return run_evolution(sol, 0.25, 5e-4, snap_every=50).mass_drift


def _commutation(grid):
    pot = sech_potential(grid)
    lam1 = newton_zero(pot, SECH_LAM1_GUESS)[0]
    T = 0.25
    path_a = run_evolution(apply_dt(pot, removal_seed(pot, lam1)), T, 5e-4, snap_every=10**9).final
    evolved = run_evolution(pot, T, 5e-4, snap_every=10**9).final
    lam_t = newton_zero(evolved, lam1)[0]
    path_b = apply_dt(evolved, time_dependent_removal_seed(evolved, lam_t, T))
    return float(np.max(np.abs(path_a.q - path_b.q)))


def _x_independence(grid):
    pot = random_smooth_potential(grid, 1)
    lams = np.concatenate([np.linspace(0.2, 2, 8), 1j * np.linspace(0.2, 1.5, 4)])
    a_end = scattering_curve(pot, lams).a
    a_mid = wronskian_a(pot, lams)
    return float(np.max(np.abs(a_end - a_mid)))


CHECKS = (
    ("vacuum_identity", _vacuum, 1e-10),
    ("unitarity", _unitarity, DEFAULT_TOLERANCES.detS_tol),
    ("symmetry_and_parity", _symmetry, 1e-8),
    ("x_independence", _x_independence, 1e-7),
    ("unit_modulus_C", _unit_c, 1e-12),
    ("dt_round_trip", _round_trip, 1e-6),
    ("scattering_map", _scattering_map, 1e-6),
    ("eigenvalue_bookkeeping", _bookkeeping, 1e-4),
    ("removable_singularities", _rings, 10.0),
    ("reflection_evolution", _reflection_law, 1e-3),
    ("soliton_dynamics", _soliton_dynamics, 1e-3),
    ("mass_conservation", _mass, 1e-8),
    ("commutation_square", _commutation, 1e-3),
)


def run_checks(grid: SpatialGrid | None = None, names=None) -> list:
    """Run the invariant suite; ``names`` restricts it to a subset."""
    grid = grid or SpatialGrid()
    results = []
    for name, func, tol in CHECKS:
        if names and name not in names:
            continue
        start = time.perf_counter()
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", DecayWarning)
            residual = func(grid)
        results.append(CheckResult(name, residual, tol, bool(residual <= tol),
                                   time.perf_counter() - start))
    return results


def report(results) -> dict:
    return {"passed": all(r.passed for r in results), "checks": [asdict(r) for r in results]}
