"""Time dynamics: reflection evolution, time-dependent seeds, solitons and a PDE integrator.

The integrator solves q_t = i q_xx - |q|^2 q_x on the periodic extension of
the grid with Fourier differentiation and classical RK4.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import (
    DEFAULT_TOLERANCES,
    CFLError,
    EigenSearchError,
    IntegrationBlowUp,
    Potential,
    SpatialGrid,
    ValidationError,
    as_spectral_point,
)
from .darboux import DarbouxSeed, apply_dt, removal_seed, vacuum_seed
from .jost import DEFAULT_SUBSTEPS
from .scattering import det_s, find_eigenvalues, newton_zero, scattering_data

RK4_IMAG_LIMIT = 2.8  # RK4 stability interval on the imaginary axis is |z| <= 2*sqrt(2)
DEFAULT_SAFETY = 0.9


def reflection_phase(lam, t) -> np.ndarray:
    """Factor e^{4i lam^4 t} carrying l(0, lam) to l(t, lam).

    This sign follows from the time part of the Lax pair, whose vacuum limit
    is -2i lam^4 sigma_3: b(t) = b(0) e^{4i lam^4 t} while a is conserved.
    """
    lam = np.asarray(lam, dtype=complex)
    return np.exp(4j * lam**4 * t)


def evolve_reflection(lam, l0, t) -> np.ndarray:
    """Reflection coefficient at time t from its initial samples on the continuous spectrum."""
    lam = np.asarray(lam, dtype=complex)
    off_axis = (np.abs(lam.real) > 1e-12 * np.abs(lam)) & (np.abs(lam.imag) > 1e-12 * np.abs(lam))
    if np.any(off_axis):
        raise ValidationError("reflection samples must lie on the real or imaginary axis")
    return np.asarray(l0) * reflection_phase(lam, t)


def time_dependent_seed(lam1, c1, c2, t: float, grid: SpatialGrid) -> DarbouxSeed:
    """Vacuum seed (c1 e^{-i(lam1^2 x + 2 lam1^4 t)}, c2 e^{i(lam1^2 x + 2 lam1^4 t)})."""
    sp = as_spectral_point(lam1)
    if sp.quadrant != "C_I":
        raise ValidationError(f"lam1 must lie in the first quadrant, got {sp.value}")
    lam1 = sp.value
    phase = lam1**2 * grid.x + 2 * lam1**4 * t
    f = c1 * np.exp(-1j * phase)
    g = c2 * np.exp(1j * phase)
    return DarbouxSeed.from_arrays(grid, lam1, f, g, "vacuum-explicit", (complex(c1), complex(c2)))


def soliton_solution(lam1, c1, c2, t: float, grid: SpatialGrid, tol=DEFAULT_TOLERANCES) -> Potential:
    """One-soliton at time t: the transformation of the zero potential by the time-dependent seed."""
    return apply_dt(Potential.zeros(grid), time_dependent_seed(lam1, c1, c2, t, grid), tol)


def soliton_velocity(lam1) -> float:
    """Speed of the soliton envelope, -2 Im(lam1^4) / Im(lam1^2)."""
    lam1 = complex(lam1)
    return -2.0 * (lam1**4).imag / (lam1**2).imag


def time_dependent_removal_seed(pot: Potential, lam1, t: float, tol=DEFAULT_TOLERANCES,
                                substeps: int = DEFAULT_SUBSTEPS) -> DarbouxSeed:
    """phi_minus(t, x, lam1) e^{-i(lam1^2 x + 2 lam1^4 t)} for a potential frozen at time t.

    The time factor is a constant, so it changes the seed but not the map.
    """
    seed = removal_seed(pot, lam1, "minus", tol, substeps)
    return seed.scaled(np.exp(-2j * complex(lam1) ** 4 * t))


def remove_all(pot: Potential, box, t: float = 0.0, tol=DEFAULT_TOLERANCES,
               substeps: int = DEFAULT_SUBSTEPS):
    """Strip every eigenvalue in ``box`` one at a time; returns (Z_0 potential, removed eigenvalues).

    Step s removes the s-th eigenvalue, located afresh on the current potential.
    """
    removed = []
    current = pot
    recs = find_eigenvalues(current, box, tol, substeps)
    while recs:
        lam = recs[0].lam.value
        current = apply_dt(current, time_dependent_removal_seed(current, lam, t, tol, substeps), tol)
        removed.append(lam)
        left = find_eigenvalues(current, box, tol, substeps)
        if len(left) != len(recs) - 1:
            raise EigenSearchError(f"removing {lam} left {len(left)} of {len(recs)} eigenvalues", lam=lam)
        recs = left
    return current, removed


def stable_dt(pot: Potential, safety: float = DEFAULT_SAFETY) -> float:
    """Largest step accepted by :func:`pde_step` for this field."""
    kmax = pot.grid.k_max
    qmax = pot.sup_norm()
    return safety * RK4_IMAG_LIMIT / (kmax**2 + qmax**2 * kmax)


def _dealias_mask(grid: SpatialGrid) -> np.ndarray:
    k = np.abs(grid.wavenumbers)
    return k <= (2.0 / 3.0) * grid.k_max


def _rhs(q, k, mask):
    qh = np.fft.fft(q)
    qx = np.fft.ifft(1j * k * qh)
    qxx = np.fft.ifft(-(k * k) * qh)
    nl = -np.abs(q) ** 2 * qx
    if mask is not None:
        nl = np.fft.ifft(np.fft.fft(nl) * mask)
    return 1j * qxx + nl


def _rk4(q, dt, k, mask):
    k1 = _rhs(q, k, mask)
    k2 = _rhs(q + 0.5 * dt * k1, k, mask)
    k3 = _rhs(q + 0.5 * dt * k2, k, mask)
    k4 = _rhs(q + dt * k3, k, mask)
    return q + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)


def pde_step(pot: Potential, dt: float, dealias: bool = True, safety: float = DEFAULT_SAFETY,
             step_index: int = 0) -> Potential:
    """One RK4 step of the Chen-Lee-Liu equation with Fourier derivatives."""
    if not pot.reduced:
        raise ValidationError("the integrator evolves reduced potentials only")
    if not dt > 0:
        raise ValidationError(f"time step must be positive, got {dt}")
    limit = stable_dt(pot, safety)
    if dt > limit:
        raise CFLError(f"time step {dt:.3e} exceeds the stability bound {limit:.3e}", dt=dt, bound=limit)
    grid = pot.grid
    q = _rk4(np.asarray(pot.q), dt, grid.wavenumbers, _dealias_mask(grid) if dealias else None)
    if not np.all(np.isfinite(q)):
        raise IntegrationBlowUp(f"non-finite field after step {step_index}", step=step_index)
    return Potential(grid, q)


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Snapshots of an evolution run with per-snapshot diagnostics.

    ``detS_probe`` is the largest det-S residual over the probe parameters;
    ``eigen_drift`` the largest distance of the tracked eigenvalues from
    their initial positions. Both are NaN when not requested.
    """

    dt: float
    times: np.ndarray
    snapshots: tuple
    mass: np.ndarray
    sup_norm: np.ndarray
    detS_probe: np.ndarray
    eigen_drift: np.ndarray
    eigenvalues: tuple = ()
    blew_up_at: int | None = None
    notes: tuple = field(default=())

    @property
    def mass_drift(self) -> float:
        return float(np.max(np.abs(self.mass - self.mass[0])) / self.mass[0]) if self.mass[0] > 0 else 0.0

    @property
    def final(self) -> Potential:
        return self.snapshots[-1]

    def csv_columns(self):
        header = ["t", "mass", "sup_norm", "detS_probe", "eigen_drift"]
        return header, [self.times, self.mass, self.sup_norm, self.detS_probe, self.eigen_drift]


def _diagnostics(pot, probes, tracked, substeps):
    det = float("nan")
    if len(probes):
        a, b = scattering_data(pot, probes, substeps)
        det = float(np.max(np.abs(det_s(probes, a, b) - 1.0)))
    new = []
    for lam in tracked:
        new.append(newton_zero(pot, lam, substeps)[0])
    return det, new


def run_evolution(q0: Potential, T: float, dt: float, snap_every: int = 1, probe_lambdas=(),
                  track_eigenvalues=(), dealias: bool = True, safety: float = DEFAULT_SAFETY,
                  substeps: int = DEFAULT_SUBSTEPS, tol=DEFAULT_TOLERANCES) -> Trajectory:
    """Integrate to time T with a uniform step no larger than ``dt``.

    Stops early on blow-up and returns the partial trajectory.
    """
    if not (T >= 0 and dt > 0 and snap_every >= 1):
        raise ValidationError("need T >= 0, dt > 0 and snap_every >= 1")
    nsteps = max(1, math.ceil(T / dt - 1e-9)) if T > 0 else 0
    step = T / nsteps if nsteps else dt
    q0.check_decay(tol.decay_tol)
    probes = np.asarray(probe_lambdas, dtype=complex)
    tracked0 = [complex(v) for v in track_eigenvalues]
    tracked = list(tracked0)
    times, snaps, mass, sup, dets, drift, eigs = [], [], [], [], [], [], []

    def record(t, pot):
        nonlocal tracked
        det, tracked = _diagnostics(pot, probes, tracked, substeps)
        times.append(t)
        snaps.append(pot)
        mass.append(pot.mass())
        sup.append(pot.sup_norm())
        dets.append(det)
        drift.append(max((abs(a - b) for a, b in zip(tracked, tracked0)), default=float("nan")))
        eigs.append(tuple(tracked))

    pot = q0
    record(0.0, pot)
    blew = None
    for n in range(1, nsteps + 1):
        try:
            pot = pde_step(pot, step, dealias, safety, step_index=n)
        except IntegrationBlowUp:
            blew = n
            break
        if n % snap_every == 0 or n == nsteps:
            record(n * step, pot)
    return Trajectory(step, np.array(times), tuple(snaps), np.array(mass), np.array(sup),
                      np.array(dets), np.array(drift), tuple(eigs), blew)
