"""Normalized Jost solutions of the gauge-transformed spectral problem.

The columns of psi satisfy

    psi_x = -i lam^2 [sigma_3, psi] + U(x) psi,
    U = [[ (i/4) q r,  lam q ], [ -lam r, -(i/4) q r ]],

with psi -> I at the normalization end. Each column is marched with an
integrating-factor (Lawson) RK4 scheme: the commutator term only rotates the
off-diagonal component, so it is absorbed exactly into a scalar exponential.
The potential is evaluated between grid samples by band-limited (Fourier)
interpolation, which lets the march take several substeps per grid cell.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit
from scipy.signal import resample

from .core import (
    DEFAULT_TOLERANCES,
    ComplexVec2Field,
    IntegrationBlowUp,
    NotAnEigenvalueError,
    Potential,
    SpectralPoint,
    ValidationError,
    as_spectral_point,
)

DEFAULT_SUBSTEPS = 8
SIDES = ("minus", "plus")


@njit(cache=True, nogil=True)
def _lawson_rk4(qf, rf, lams, h, sub, column, backward):
    """March one Jost column for every lam; returns coarse samples and blow-up index.

    qf, rf hold the potential at spacing h/2 over [x_0, x_n]. Output index j
    of the second axis corresponds to the coarse point x_j, j = 0..n.
    """
    nfine = qf.shape[0]
    nsteps = (nfine - 1) // 2
    ncoarse = nsteps // sub + 1
    nl = lams.shape[0]
    out = np.zeros((nl, ncoarse, 2), dtype=np.complex128)
    blow = np.full(nl, -1, dtype=np.int64)
    H = -h if backward else h
    for j in range(nl):
        lam = lams[j]
        l2 = lam * lam
        if column == 1:
            mu1 = 0.0j
            mu2 = 2j * l2
            u1 = 1.0 + 0.0j
            u2 = 0.0j
        else:
            mu1 = -2j * l2
            mu2 = 0.0j
            u1 = 0.0j
            u2 = 1.0 + 0.0j
        eh1 = np.exp(mu1 * H * 0.5)
        eh2 = np.exp(mu2 * H * 0.5)
        ef1 = eh1 * eh1
        ef2 = eh2 * eh2
        ih1 = 1.0 / eh1
        ih2 = 1.0 / eh2
        if backward:
            idx = nfine - 1
            cidx = ncoarse - 1
            step = -1
        else:
            idx = 0
            cidx = 0
            step = 1
        out[j, cidx, 0] = u1
        out[j, cidx, 1] = u2
        for s in range(nsteps):
            qa = qf[idx]
            ra = rf[idx]
            qb = qf[idx + step]
            rb = rf[idx + step]
            qc = qf[idx + 2 * step]
            rc = rf[idx + 2 * step]
            da = 0.25j * qa * ra
            db = 0.25j * qb * rb
            dc = 0.25j * qc * rc
            # stage 1 at s = 0
            k11 = da * u1 + lam * qa * u2
            k12 = -lam * ra * u1 - da * u2
            # stage 2 at s = H/2
            w1 = eh1 * (u1 + 0.5 * H * k11)
            w2 = eh2 * (u2 + 0.5 * H * k12)
            k21 = ih1 * (db * w1 + lam * qb * w2)
            k22 = ih2 * (-lam * rb * w1 - db * w2)
            # stage 3 at s = H/2
            w1 = eh1 * (u1 + 0.5 * H * k21)
            w2 = eh2 * (u2 + 0.5 * H * k22)
            k31 = ih1 * (db * w1 + lam * qb * w2)
            k32 = ih2 * (-lam * rb * w1 - db * w2)
            # stage 4 at s = H
            w1 = ef1 * (u1 + H * k31)
            w2 = ef2 * (u2 + H * k32)
            k41 = (dc * w1 + lam * qc * w2) / ef1
            k42 = (-lam * rc * w1 - dc * w2) / ef2
            u1 = ef1 * (u1 + H / 6.0 * (k11 + 2.0 * k21 + 2.0 * k31 + k41))
            u2 = ef2 * (u2 + H / 6.0 * (k12 + 2.0 * k22 + 2.0 * k32 + k42))
            idx += 2 * step
            if (s + 1) % sub == 0:
                cidx += step
                out[j, cidx, 0] = u1
                out[j, cidx, 1] = u2
            if not (np.isfinite(u1.real) and np.isfinite(u1.imag)
                    and np.isfinite(u2.real) and np.isfinite(u2.imag)):
                blow[j] = idx
                break
    return out, blow


def fine_samples(pot: Potential, substeps: int):
    """Potential on the half-substep lattice of [x_0, x_n], using the periodic extension."""
    n = pot.grid.n_points
    m = 2 * n * substeps
    if np.all(pot.q == 0) and np.all(pot.r == 0):
        z = np.zeros(m + 1, dtype=complex)
        return z, z
    qf = resample(pot.q, m)
    rf = np.conj(qf) if pot.reduced else resample(pot.r, m)
    return np.append(qf, qf[0]), np.append(rf, rf[0])


def march_columns(pot: Potential, lams, side: str, column: int, substeps: int = DEFAULT_SUBSTEPS):
    """Vectorized march of one Jost column.

    Returns an array of shape (len(lams), n + 1, 2) sampled at x_0 .. x_n
    (x_n = L is the periodic image of x_0). Raises :class:`IntegrationBlowUp`
    if any march overflows.
    """
    if side not in SIDES:
        raise ValidationError(f"side must be 'minus' or 'plus', got {side!r}")
    if column not in (1, 2):
        raise ValidationError(f"column must be 1 or 2, got {column!r}")
    lams = np.atleast_1d(np.asarray(lams, dtype=np.complex128))
    if np.any(lams == 0):
        raise ValidationError("spectral parameter must be nonzero")
    substeps = int(substeps)
    if substeps < 1:
        raise ValidationError("substeps must be >= 1")
    qf, rf = fine_samples(pot, substeps)
    h = pot.grid.spacing / substeps
    out, blow = _lawson_rk4(qf, rf, lams, h, substeps, column, side == "plus")
    bad = np.flatnonzero(blow >= 0)
    if bad.size:
        j = int(bad[0])
        x_fail = -pot.grid.half_width + int(blow[j]) * h / 2
        raise IntegrationBlowUp(
            f"Jost integration overflowed at x = {x_fail:.6g} for lambda = {lams[j]}",
            x=x_fail, lam=complex(lams[j]),
        )
    return out


def analytic_columns(lam: complex, side: str):
    """Which columns of psi_{side} are analytic (hence bounded) at lam.

    On the continuous spectrum every column is bounded.
    """
    l2 = complex(lam) ** 2
    if abs(l2.imag) <= 1e-12 * abs(l2):
        return (True, True)
    upper = l2.imag > 0
    if side == "minus":
        return (upper, not upper)
    return (not upper, upper)


@dataclass(frozen=True, eq=False)
class JostPair:
    """Both columns of psi_minus or psi_plus at one spectral parameter.

    ``end_values`` holds psi at the far end of the march (x = L for the
    minus side, x = -L for the plus side) as a 2x2 array. ``trusted`` flags
    the columns analytic in the half-plane containing lam.
    """

    lam: SpectralPoint
    side: str
    column_1: ComplexVec2Field
    column_2: ComplexVec2Field
    residual: float
    end_values: np.ndarray
    trusted: tuple

    def matrix(self) -> np.ndarray:
        """psi as an array of shape (n, 2, 2)."""
        return np.stack(
            [np.stack([self.column_1.component_1, self.column_2.component_1], axis=-1),
             np.stack([self.column_1.component_2, self.column_2.component_2], axis=-1)],
            axis=-2,
        )


def solve_jost(pot: Potential, lam, side: str, substeps: int = DEFAULT_SUBSTEPS,
               tol=DEFAULT_TOLERANCES) -> JostPair:
    """Jost matrix psi_minus (marched left to right) or psi_plus (right to left)."""
    sp = as_spectral_point(lam)
    pot.check_decay(tol.decay_tol)
    cols, coarse = [], []
    for column in (1, 2):
        cols.append(march_columns(pot, [sp.value], side, column, substeps)[0])
        sub_c = substeps // 2 if substeps >= 2 else substeps * 2
        coarse.append(march_columns(pot, [sp.value], side, column, sub_c)[0])
    trusted = analytic_columns(sp.value, side)
    residual = 0.0
    for ok, fine, rough in zip(trusted, cols, coarse):
        if not ok:
            continue
        scale = np.maximum(1.0, np.abs(fine))
        residual = max(residual, float(np.max(np.abs(fine - rough) / scale)) / 15.0)
    grid = pot.grid
    fields = [c[:-1] for c in cols]
    far = -1 if side == "minus" else 0
    end = np.array([[cols[0][far, 0], cols[1][far, 0]], [cols[0][far, 1], cols[1][far, 1]]])
    c1 = ComplexVec2Field(grid, fields[0][:, 0], fields[0][:, 1])
    c2 = ComplexVec2Field(grid, fields[1][:, 0], fields[1][:, 1])
    end.setflags(write=False)
    return JostPair(sp, side, c1, c2, residual, end, trusted)


def column_at(pot: Potential, lam, side: str, column: int, substeps: int = DEFAULT_SUBSTEPS):
    """One Jost column on the grid samples x_0 .. x_{n-1}, shape (2, n)."""
    return march_columns(pot, [complex(lam)], side, column, substeps)[0, :-1].T


def lax_residual(pot: Potential, lam: complex, column, which: int) -> float:
    """Max pointwise residual of Jost column ``which`` (1 or 2) against the spatial Lax equation.

    The derivative is a sixth-order central difference on the interior
    samples, so the result includes that truncation error.
    """
    lam = complex(lam)
    u1, u2 = np.asarray(column[0]), np.asarray(column[1])
    h = pot.grid.spacing
    c = np.array([-1.0, 9.0, -45.0, 0.0, 45.0, -9.0, 1.0]) / (60.0 * h)

    def deriv(u):
        return sum(ck * u[k:len(u) - 6 + k] for k, ck in enumerate(c) if ck)

    q, r = pot.q[3:-3], pot.r[3:-3]
    v1, v2 = u1[3:-3], u2[3:-3]
    d = 0.25j * q * r
    rhs1 = d * v1 + lam * q * v2
    rhs2 = -lam * r * v1 - d * v2
    if which == 1:
        rhs2 = rhs2 + 2j * lam * lam * v2
    else:
        rhs1 = rhs1 - 2j * lam * lam * v1
    return float(max(np.max(np.abs(deriv(u1) - rhs1)), np.max(np.abs(deriv(u2) - rhs2))))


def scattering_a_at(pot: Potential, lams, substeps: int = DEFAULT_SUBSTEPS) -> np.ndarray:
    """a(lam) = first component of phi_minus at x = L, vectorized."""
    return march_columns(pot, lams, "minus", 1, substeps)[:, -1, 0]


def bound_state_pair(pot: Potential, lam1, substeps: int = DEFAULT_SUBSTEPS):
    """phi_minus(lam1) e^{-i lam1^2 x} and phi_plus-column-2(lam1) e^{i lam1^2 x}, each shape (2, n)."""
    lam1 = complex(lam1)
    x = pot.grid.x
    u = column_at(pot, lam1, "minus", 1, substeps) * np.exp(-1j * lam1**2 * x)
    v = column_at(pot, lam1, "plus", 2, substeps) * np.exp(1j * lam1**2 * x)
    return u, v


def overlap_mask(u, v, rel: float = 1e-3):
    """Samples where both representations of a bound state are numerically reliable.

    Each column picks up an exponentially growing error away from its own
    normalization end; the geometric mean of the two magnitudes peaks where
    both are accurate.
    """
    p = np.sqrt(np.hypot(np.abs(u[0]), np.abs(u[1])) * np.hypot(np.abs(v[0]), np.abs(v[1])))
    return p >= rel * np.max(p)


def jost_at_eigenvalue_ratio(pot: Potential, lam1, tol=DEFAULT_TOLERANCES,
                             substeps: int = DEFAULT_SUBSTEPS, return_residual: bool = False):
    """Norming constant gamma with phi_minus e^{-i lam1^2 x} = gamma phi_plus e^{i lam1^2 x}."""
    sp = as_spectral_point(lam1)
    if sp.quadrant != "C_I":
        raise ValidationError(f"eigenvalue must lie in the first quadrant, got {sp.value}")
    a1 = scattering_a_at(pot, [sp.value], substeps)[0]
    if abs(a1) > tol.eigen_tol:
        raise NotAnEigenvalueError(
            f"not an eigenvalue: |a({sp.value})| = {abs(a1):.3e} exceeds {tol.eigen_tol:.1e}",
            lam=sp.value, a_abs=abs(a1),
        )
    u, v = bound_state_pair(pot, sp.value, substeps)
    mask = overlap_mask(u, v)
    um, vm = u[:, mask].ravel(), v[:, mask].ravel()
    gamma = complex(np.vdot(vm, um) / np.vdot(vm, vm))
    residual = float(np.max(np.abs(um - gamma * vm)) / np.max(np.abs(um)))
    if gamma == 0 or residual > 1e-3:
        raise NotAnEigenvalueError(
            f"Jost columns at {sp.value} are not proportional (relative residual {residual:.3e})",
            lam=sp.value, residual=residual,
        )
    return (gamma, residual) if return_residual else gamma
