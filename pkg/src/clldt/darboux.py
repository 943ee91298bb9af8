"""Reduced two-fold Darboux transformation, its inverse, and induced maps.

For a vector solution Phi = (f, g) of the spectral problem at lam1 the
potential map is

    q1 = C q - 2i D,   C = m(lam1_bar) / m(lam1),
    D = (lam1^2 - lam1_bar^2) f conj(g) / m(lam1),

with m(lam) = lam |f|^2 + conj(lam) |g|^2. C and D only depend on the
direction of Phi at each point, so seeds are normalized pointwise before use.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import (
    DEFAULT_TOLERANCES,
    ComplexVec2Field,
    DegenerateSeedError,
    NotAnEigenvalueError,
    Potential,
    SingularRingError,
    SpatialGrid,
    SpectralPoint,
    ValidationError,
    as_spectral_point,
)
from .jost import (
    DEFAULT_SUBSTEPS,
    JostPair,
    bound_state_pair,
    column_at,
    overlap_mask,
    scattering_a_at,
    solve_jost,
)
from .scattering import ScatteringCurve

PROVENANCES = ("vacuum-explicit", "jost-minus", "jost-plus", "jost-conj", "inverse-formula", "add-general")


def bilinear_m(lam, f, g):
    """m_lam(f, g) = lam f_1 conj(g_1) + conj(lam) f_2 conj(g_2); f, g have leading axis of length 2."""
    lam = complex(lam)
    f = np.asarray(f)
    g = np.asarray(g)
    return lam * f[0] * np.conj(g[0]) + np.conj(lam) * f[1] * np.conj(g[1])


@dataclass(frozen=True, eq=False)
class DarbouxSeed:
    """Vector solution Phi = (f, g) at lam1 that parameterizes the transformation."""

    lam1: SpectralPoint
    phi: ComplexVec2Field
    provenance: str
    constants: tuple | None = None

    def __post_init__(self):
        object.__setattr__(self, "lam1", as_spectral_point(self.lam1))
        if self.lam1.on_continuous_spectrum:
            raise ValidationError(f"seed parameter {self.lam1.value} lies on the continuous spectrum")
        if self.provenance not in PROVENANCES:
            raise ValidationError(f"unknown seed provenance {self.provenance!r}")

    @classmethod
    def from_arrays(cls, grid: SpatialGrid, lam1, f, g, provenance: str, constants=None):
        return cls(as_spectral_point(lam1), ComplexVec2Field(grid, f, g), provenance, constants)

    @property
    def grid(self) -> SpatialGrid:
        return self.phi.grid

    @property
    def f(self) -> np.ndarray:
        return self.phi.component_1

    @property
    def g(self) -> np.ndarray:
        return self.phi.component_2

    def scaled(self, c) -> "DarbouxSeed":
        consts = None if self.constants is None else tuple(c * v for v in self.constants)
        return DarbouxSeed(self.lam1, self.phi.scaled(c), self.provenance, consts)


def _normalized(f, g):
    scale = np.maximum(np.abs(f), np.abs(g))
    with np.errstate(divide="ignore", invalid="ignore"):
        return f / scale, g / scale, scale


@dataclass(frozen=True, eq=False)
class DTCoefficients:
    """Pointwise C, D, A fields plus the continuous square root of C."""

    lam1: complex
    C: np.ndarray
    D: np.ndarray
    A: np.ndarray
    root_C: np.ndarray
    end_dominance: tuple

    def __post_init__(self):
        for name in ("C", "D", "A", "root_C"):
            getattr(self, name).setflags(write=False)


def dt_coefficients(seed: DarbouxSeed, tol=DEFAULT_TOLERANCES) -> DTCoefficients:
    """C = m(conj lam1)/m(lam1), D = A/m(lam1), A = (lam1^2 - conj(lam1)^2) f conj(g).

    ``root_C`` is e^{i theta/2} with theta the phase of C unwrapped along x and
    theta(-L) in (-pi, pi]. Since C = conj(m)/m it equals +-conj(m)/|m|, with
    the sign fixed at the left end.
    """
    lam1 = seed.lam1.value
    fn, gn, scale = _normalized(seed.f, seed.g)
    if np.any(scale == 0) or not np.all(np.isfinite(scale)):
        raise DegenerateSeedError("seed vanishes (or is not finite) at some grid sample")
    mn = bilinear_m(lam1, (fn, gn), (fn, gn))
    weight = np.abs(fn) ** 2 + np.abs(gn) ** 2
    bad = np.abs(mn) < tol.m_floor * weight
    if np.any(bad):
        k = int(np.flatnonzero(bad)[0])
        raise DegenerateSeedError(
            f"degenerate seed: |m_lam1| below floor at x = {seed.grid.x[k]:.6g}", x=float(seed.grid.x[k])
        )
    mbar = np.conj(mn)
    C = mbar / mn
    delta = lam1**2 - np.conj(lam1) ** 2
    D = delta * fn * np.conj(gn) / mn
    A = delta * seed.f * np.conj(seed.g)
    unit = mbar / np.abs(mn)
    theta0 = np.angle(C[0])
    if theta0 <= -np.pi:
        theta0 += 2 * np.pi
    anchor = np.exp(0.5j * theta0)
    sign = 1.0 if abs(anchor - unit[0]) <= abs(anchor + unit[0]) else -1.0
    root = sign * unit
    ends = tuple("e1" if abs(fn[k]) >= abs(gn[k]) else "e2" for k in (0, -1))
    return DTCoefficients(lam1, C, D, A, root, ends)


def apply_dt(pot: Potential, seed: DarbouxSeed, tol=DEFAULT_TOLERANCES) -> Potential:
    """q1 = C q - 2i D for a potential under the reduction r = conj(q)."""
    if not pot.reduced:
        raise ValidationError("apply_dt needs a reduced potential; use general_two_fold_dt for independent r")
    if pot.grid != seed.grid:
        raise ValidationError("seed and potential live on different grids")
    co = dt_coefficients(seed, tol)
    return Potential(pot.grid, co.C * pot.q - 2j * co.D)


def general_two_fold_dt(pot: Potential, phi1, phi2, lam1, lam2, tol=DEFAULT_TOLERANCES) -> Potential:
    """Two-fold transformation of the coupled (q, r) system with independent seeds.

    Returns a potential carrying both q1 and r1; ``phi1``/``phi2`` are
    ComplexVec2Field or arrays of shape (2, n).
    """
    lam1, lam2 = complex(lam1), complex(lam2)
    p1 = phi1.as_array() if isinstance(phi1, ComplexVec2Field) else np.asarray(phi1, dtype=complex)
    p2 = phi2.as_array() if isinstance(phi2, ComplexVec2Field) else np.asarray(phi2, dtype=complex)
    f1, g1, s1 = _normalized(p1[0], p1[1])
    f2, g2, s2 = _normalized(p2[0], p2[1])
    if np.any(s1 == 0) or np.any(s2 == 0):
        raise DegenerateSeedError("a seed vanishes at some grid sample")
    d2 = lam1 * f1 * g2 - lam2 * f2 * g1
    a2 = lam1 * g1 * f2 - lam2 * g2 * f1
    floor = tol.m_floor * (abs(lam1) + abs(lam2))
    if np.any(np.abs(d2) < floor) or np.any(np.abs(a2) < floor):
        raise DegenerateSeedError("vanishing denominator in the two-fold transformation "
                                  "(equal parameters with proportional seeds?)")
    delta = lam1**2 - lam2**2
    b1 = -delta * f1 * f2
    c1 = -delta * g1 * g2
    q1 = a2 / d2 * pot.q + 2j * b1 / d2
    r1 = d2 / a2 * pot.r + 2j * c1 / a2
    return Potential(pot.grid, q1, r1)


def singular_points(lam1) -> tuple:
    lam1 = complex(lam1)
    return (lam1, -lam1, lam1.conjugate(), -lam1.conjugate())


def _check_ring(lam, lam1, eps):
    for s in singular_points(lam1):
        if abs(lam - s) < eps:
            raise SingularRingError(f"lambda = {lam} lies within {eps:.1e} of the singular point {s}",
                                    lam=lam, singular=s)


def _t_factor(co: DTCoefficients, lam1: complex, lam: complex) -> np.ndarray:
    """Unnormalized matrix T(lam) as an (n, 2, 2) field; det T = (lam^2-lam1^2)(lam^2-conj(lam1)^2)."""
    c = co.root_C
    cb = np.conj(c)
    a1 = abs(lam1) ** 2
    l2 = lam * lam
    T = np.empty(c.shape + (2, 2), dtype=complex)
    T[:, 0, 0] = c * l2 - a1 * cb
    T[:, 0, 1] = -co.D * cb * lam
    T[:, 1, 0] = np.conj(co.D) * c * lam
    T[:, 1, 1] = cb * l2 - a1 * c
    return T


def darboux_matrix(seed: DarbouxSeed, lam, tol=DEFAULT_TOLERANCES, coefficients=None) -> np.ndarray:
    """Boundary-normalized Darboux matrix field, shape (n, 2, 2).

    T = (lam1/conj(lam1))^{1/2} / (lam^2 - lam1^2) *
        [[c lam^2 - |lam1|^2 conj(c), -D conj(c) lam],
         [conj(D) c lam,             conj(c) lam^2 - |lam1|^2 c]],
    with c the continuous square root of C. For a seed that tends to e1 at
    the left end this matrix tends to diag(1, .) there.
    """
    lam = complex(lam)
    lam1 = seed.lam1.value
    _check_ring(lam, lam1, tol.sing_eps)
    co = coefficients if coefficients is not None else dt_coefficients(seed, tol)
    pref = (lam1 / abs(lam1)) / (lam * lam - lam1 * lam1)
    return pref * _t_factor(co, lam1, lam)


def _limit_diagonal(co: DTCoefficients, lam1: complex, lam: complex, end: int) -> np.ndarray:
    """Diagonal of T(lam) in the limit at one grid end, using the exact limit of C there."""
    k = 0 if end == 0 else -1
    dominant = co.end_dominance[0 if end == 0 else 1]
    exact = np.conj(lam1) / abs(lam1) if dominant == "e1" else lam1 / abs(lam1)
    c = exact if abs(exact - co.root_C[k]) <= abs(exact + co.root_C[k]) else -exact
    a1 = abs(lam1) ** 2
    l2 = lam * lam
    return np.array([c * l2 - a1 * np.conj(c), np.conj(c) * l2 - a1 * c])


def transform_jost(jost: JostPair, seed: DarbouxSeed, tol=DEFAULT_TOLERANCES, coefficients=None) -> JostPair:
    """Jost functions of the transformed potential, T(lam) psi normalized at the jost's own end.

    Every Jost-type seed at lam1 or conj(lam1) yields the same C and D, hence
    the same T; each new column is divided by the limit of the matching
    diagonal entry of T at its normalization end.
    """
    lam = jost.lam.value
    lam1 = seed.lam1.value
    _check_ring(lam, lam1, tol.sing_eps)
    co = coefficients if coefficients is not None else dt_coefficients(seed, tol)
    T = _t_factor(co, lam1, lam)
    diag = _limit_diagonal(co, lam1, lam, 0 if jost.side == "minus" else 1)
    psi = jost.matrix()
    new = np.einsum("nij,njk->nik", T, psi)
    new[:, :, 0] /= diag[0]
    new[:, :, 1] /= diag[1]
    grid = jost.column_1.grid
    c1 = ComplexVec2Field(grid, new[:, 0, 0], new[:, 1, 0])
    c2 = ComplexVec2Field(grid, new[:, 0, 1], new[:, 1, 1])
    far = -1 if jost.side == "minus" else 0
    end = new[far].copy()
    end.setflags(write=False)
    growth = float(np.max(np.abs(T)) / np.min(np.abs(diag)))
    return JostPair(jost.lam, jost.side, c1, c2, jost.residual * growth, end, jost.trusted)


def regularized_parameter(lam, lam1, eps) -> complex:
    """Move lam radially onto the eps-ring around the nearest singular point if it is inside it."""
    lam = complex(lam)
    for s in singular_points(lam1):
        d = lam - s
        if abs(d) < eps:
            return s + eps * (d / abs(d) if d != 0 else 1.0)
    return lam


def new_jost(pot: Potential, seed: DarbouxSeed, lam, side: str, regularize: bool = False,
             tol=DEFAULT_TOLERANCES, substeps: int = DEFAULT_SUBSTEPS) -> JostPair:
    """solve_jost on the old potential followed by transform_jost."""
    lam = complex(lam)
    if regularize:
        # stay just outside the ring so the direct formula applies
        lam = regularized_parameter(lam, seed.lam1.value, tol.sing_eps * (1 + 1e-9))
    return transform_jost(solve_jost(pot, lam, side, substeps, tol), seed, tol)


def inverse_dt_seed(seed: DarbouxSeed) -> ComplexVec2Field:
    """Seed of the left inverse: f~ = conj(g)(1/m - 1/conj(m)), g~ = conj(f)(1/conj(m) - 1/m).

    Here m = m_lam1(Phi, Phi) and conj(m) = m_{conj lam1}(Phi, Phi).
    """
    f, g = seed.f, seed.g
    m = bilinear_m(seed.lam1.value, (f, g), (f, g))
    if np.any(m == 0):
        raise DegenerateSeedError("m_lam1 vanishes; the inverse seed is undefined")
    k = 1.0 / m - 1.0 / np.conj(m)
    return ComplexVec2Field(seed.grid, np.conj(g) * k, -np.conj(f) * k)


def inverse_seed(seed: DarbouxSeed) -> DarbouxSeed:
    """:func:`inverse_dt_seed` wrapped as a seed at the same lam1."""
    return DarbouxSeed(seed.lam1, inverse_dt_seed(seed), "inverse-formula")


def inverse_coefficients(lam1, gamma, a1_at_lam1):
    """Constants (s1, s2) with Phi~ = s1 e^{-i lam1^2 x} phi_minus + s2 e^{i lam1^2 x} phi_plus.

    The two constants come from matching the boundary limits of the Lax
    solution conj-swapped from the removal seed; their ratio is -1/gamma.
    """
    lam1 = complex(lam1)
    k = 1.0 / np.conj(lam1) - 1.0 / lam1
    return -k / (gamma * a1_at_lam1), k / a1_at_lam1


def inverse_seed_from_new_jost(new_minus: JostPair, new_plus: JostPair, lam1, gamma, a1_at_lam1,
                               tol=DEFAULT_TOLERANCES) -> ComplexVec2Field:
    """Inverse seed assembled from the Jost functions of the transformed potential at lam1."""
    lam1 = complex(lam1)
    if gamma == 0:
        raise ValidationError("norming constant gamma must be nonzero")
    if abs(a1_at_lam1) < tol.eigen_tol:
        raise NotAnEigenvalueError(
            f"|a1(lam1)| = {abs(a1_at_lam1):.3e} is below eigen_tol; lam1 is still an eigenvalue"
        )
    s1, s2 = inverse_coefficients(lam1, gamma, a1_at_lam1)
    grid = new_minus.column_1.grid
    x = grid.x
    left = new_minus.column_1.as_array() * np.exp(-1j * lam1**2 * x)
    right = new_plus.column_2.as_array() * np.exp(1j * lam1**2 * x)
    phi = s1 * left + s2 * right
    return ComplexVec2Field(grid, phi[0], phi[1])


def vacuum_seed(grid: SpatialGrid, lam1, c1=1.0, c2=1.0) -> DarbouxSeed:
    """Exponential seed (c1 e^{-i lam1^2 x}, c2 e^{i lam1^2 x}) of the zero potential."""
    lam1 = complex(lam1)
    phase = lam1**2 * grid.x
    f = c1 * np.exp(-1j * phase)
    g = c2 * np.exp(1j * phase)
    return DarbouxSeed.from_arrays(grid, lam1, f, g, "vacuum-explicit", (complex(c1), complex(c2)))


def splice(left, right):
    """Join two proportional representations of one bound state.

    ``left`` is reliable towards x = -L and ``right`` towards x = +L; each
    carries an exponentially growing error on the opposite side. The ratio
    is fitted where both are reliable and the switch happens at the peak of
    ``left`` inside that region. Returns (spliced field, ratio left/right).
    """
    mask = overlap_mask(left, right)
    lm, rm = left[:, mask].ravel(), right[:, mask].ravel()
    ratio = complex(np.vdot(rm, lm) / np.vdot(rm, rm))
    p = np.where(mask, np.hypot(np.abs(left[0]), np.abs(left[1])), 0.0)
    k = int(np.argmax(p))
    idx = np.arange(left.shape[1])
    return np.where(idx <= k, left, ratio * right), ratio


SEED_KINDS = ("minus", "plus", "conj-plus", "conj-minus",
              "minus-raw", "plus-raw", "conj-plus-raw", "conj-minus-raw")


def removal_seed(pot: Potential, lam1, kind: str = "minus", tol=DEFAULT_TOLERANCES,
                 substeps: int = DEFAULT_SUBSTEPS) -> DarbouxSeed:
    """Jost seed at an eigenvalue lam1 in one of four equivalent forms.

      * "minus": phi_minus(lam1) e^{-i lam1^2 x}
      * "plus": phi_plus(lam1) e^{i lam1^2 x} (second column)
      * "conj-plus": first column of psi_plus at conj(lam1) times e^{-i conj(lam1)^2 x}
      * "conj-minus": second column of psi_minus at conj(lam1) times e^{i conj(lam1)^2 x}

    A Jost column is accurate only until its growing error overtakes the
    decaying bound state, so by default the named column is continued on its
    far side by the proportional column from the other end (see
    :func:`splice`). The "-raw" variants skip the continuation.
    """
    if kind not in SEED_KINDS:
        raise ValidationError(f"unknown seed kind {kind!r}")
    lam1 = complex(lam1)
    grid = pot.grid
    a1 = scattering_a_at(pot, [lam1], substeps)[0]
    if abs(a1) > tol.eigen_tol:
        raise NotAnEigenvalueError(f"not an eigenvalue: |a({lam1})| = {abs(a1):.3e}", lam=lam1)
    base = kind.removesuffix("-raw")
    if base in ("minus", "plus"):
        lam, prov = lam1, "jost-" + base
        left, right = bound_state_pair(pot, lam1, substeps)
        primary = left if base == "minus" else right
    else:
        lam, prov = np.conj(lam1), "jost-conj"
        x = grid.x
        left = column_at(pot, lam, "minus", 2, substeps) * np.exp(1j * lam**2 * x)
        right = column_at(pot, lam, "plus", 1, substeps) * np.exp(-1j * lam**2 * x)
        primary = left if base == "conj-minus" else right
    if kind.endswith("-raw"):
        phi = primary
    else:
        phi, ratio = splice(left, right)
        if primary is right:
            phi = phi / ratio
    return DarbouxSeed.from_arrays(grid, lam, phi[0], phi[1], prov)


def addition_seed(pot: Potential, lam1, alpha1, substeps: int = DEFAULT_SUBSTEPS) -> DarbouxSeed:
    """e^{-i lam1^2 x} phi_minus(lam1) + alpha1 e^{i lam1^2 x} phi_plus(lam1) on any background."""
    lam1 = complex(lam1)
    if not as_spectral_point(lam1).quadrant == "C_I":
        raise ValidationError(f"added eigenvalue must lie in the first quadrant, got {lam1}")
    u, v = bound_state_pair(pot, lam1, substeps)
    phi = u + complex(alpha1) * v
    return DarbouxSeed.from_arrays(pot.grid, lam1, phi[0], phi[1], "add-general", (1.0, complex(alpha1)))


def scattering_factor(lam, lam1, direction: str) -> np.ndarray:
    """Rational factor multiplying a under removal (or its inverse under addition)."""
    lam = np.asarray(lam, dtype=complex)
    lam1 = complex(lam1)
    lb = np.conj(lam1)
    l2 = lam * lam
    if direction == "remove":
        return (lam1 / lb) * (l2 - lb**2) / (l2 - lam1**2)
    if direction == "add":
        return (lb / lam1) * (l2 - lam1**2) / (l2 - lb**2)
    raise ValidationError(f"direction must be 'remove' or 'add', got {direction!r}")


def map_scattering_data(curve: ScatteringCurve, lam1, direction: str) -> ScatteringCurve:
    """Scattering data after removing (or adding) the eigenvalue lam1; b is unchanged."""
    lam1 = as_spectral_point(lam1)
    if lam1.quadrant != "C_I":
        raise ValidationError(f"lam1 must lie in the first quadrant, got {lam1.value}")
    a1 = curve.a * scattering_factor(curve.lam, lam1.value, direction)
    return ScatteringCurve.from_coefficients(curve.lam, a1, curve.b)
