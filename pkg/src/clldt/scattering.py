"""Scattering coefficients, reflection coefficient and eigenvalue location."""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .core import (
    DEFAULT_TOLERANCES,
    EigenSearchError,
    NonSimpleZeroError,
    Potential,
    ResonanceError,
    SpectralPoint,
    ValidationError,
    as_spectral_point,
    quadrant_of,
)
from .jost import DEFAULT_SUBSTEPS, jost_at_eigenvalue_ratio, march_columns, scattering_a_at

NEWTON_STEP = 1e-5
NEWTON_TARGET = 1e-9
CLUSTER_TOL = 1e-6


class ResonanceWarning(UserWarning):
    """A contour sample sits too close to a zero of a."""


def _check_lams(lams, need_b):
    lams = np.atleast_1d(np.asarray(lams, dtype=np.complex128))
    for lam in lams:
        if lam == 0:
            raise ValidationError("spectral parameter must be nonzero")
        quad = quadrant_of(lam)
        if need_b and quad != "continuous":
            raise ValidationError(f"b is only defined on the continuous spectrum, got lambda = {lam}",
                                  lam=complex(lam))
        if quad in ("C_II", "C_IV"):
            raise ValidationError(f"a is not analytic at lambda = {lam} (second/fourth quadrant)",
                                  lam=complex(lam))
    return lams


def scattering_data(pot: Potential, lams, substeps: int = DEFAULT_SUBSTEPS, need_b: bool = True):
    """Vectorized a(lam), b(lam) read off phi_minus at x = L."""
    lams = _check_lams(lams, need_b)
    col = march_columns(pot, lams, "minus", 1, substeps)[:, -1, :]
    L = pot.grid.half_width
    a = col[:, 0]
    b = np.exp(-2j * lams**2 * L) * col[:, 1]
    return a, b


def scattering_coefficients(pot: Potential, lam, substeps: int = DEFAULT_SUBSTEPS, need_b: bool = True,
                            tol=DEFAULT_TOLERANCES):
    """(a, b) at one spectral parameter; b is NaN when ``need_b`` is False."""
    sp = as_spectral_point(lam)
    pot.check_decay(tol.decay_tol)
    a, b = scattering_data(pot, [sp.value], substeps, need_b)
    return complex(a[0]), (complex(b[0]) if need_b else complex("nan"))


def wronskian_a(pot: Potential, lams, index: int | None = None, substeps: int = DEFAULT_SUBSTEPS):
    """a as det(phi_minus, phi_plus column 2) at grid sample ``index`` (default x = 0)."""
    lams = np.atleast_1d(np.asarray(lams, dtype=np.complex128))
    k = pot.grid.center_index if index is None else index
    left = march_columns(pot, lams, "minus", 1, substeps)[:, k, :]
    right = march_columns(pot, lams, "plus", 2, substeps)[:, k, :]
    return left[:, 0] * right[:, 1] - left[:, 1] * right[:, 0]


def det_s(lams, a, b):
    """a conj(a(conj lam)) + b conj(b(conj lam)) on the continuous spectrum.

    Under the reduction the entries at conj(lam) follow from parity: on the
    real axis conj(lam) = lam, on the imaginary axis conj(lam) = -lam where a
    is even and b is odd.
    """
    lams = np.asarray(lams)
    sign = np.where(np.abs(lams.imag) <= 1e-12, 1.0, -1.0)
    return np.abs(a) ** 2 + sign * np.abs(b) ** 2


@dataclass(frozen=True, eq=False)
class ScatteringCurve:
    lam: np.ndarray
    a: np.ndarray
    b: np.ndarray
    l: np.ndarray
    detS_residual: np.ndarray

    def __post_init__(self):
        for name in ("lam", "a", "b", "l", "detS_residual"):
            arr = np.array(getattr(self, name), copy=True)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if np.any(self.lam == 0):
            raise ValidationError("contour contains lambda = 0")

    @classmethod
    def from_coefficients(cls, lam, a, b) -> "ScatteringCurve":
        lam, a, b = (np.asarray(v, dtype=np.complex128) for v in (lam, a, b))
        with np.errstate(divide="ignore", invalid="ignore"):
            l = b / a
        return cls(lam, a, b, l, np.abs(det_s(lam, a, b) - 1.0))

    def csv_columns(self):
        header = ["lambda_re", "lambda_im", "a_re", "a_im", "b_re", "b_im", "l_re", "l_im", "detS_residual"]
        cols = [self.lam.real, self.lam.imag, self.a.real, self.a.imag, self.b.real, self.b.imag,
                self.l.real, self.l.imag, self.detS_residual]
        return header, cols


def parse_contour(spec) -> np.ndarray:
    """Contour samples from an array or from text like ``"real:0.1:3:64,imag:0.2:2:16"``."""
    if not isinstance(spec, str):
        lams = np.atleast_1d(np.asarray(spec, dtype=np.complex128))
    else:
        parts = []
        for seg in spec.split(","):
            fields = seg.strip().split(":")
            if len(fields) != 4 or fields[0] not in ("real", "imag"):
                raise ValidationError(f"contour segment must be axis:start:stop:count, got {seg!r}")
            try:
                start, stop, count = float(fields[1]), float(fields[2]), int(fields[3])
            except ValueError as exc:
                raise ValidationError(f"bad number in contour segment {seg!r}") from exc
            pts = np.linspace(start, stop, count)
            parts.append(pts if fields[0] == "real" else 1j * pts)
        lams = np.concatenate(parts).astype(np.complex128)
    bad = [lam for lam in lams if quadrant_of(lam) != "continuous" or lam == 0]
    if bad:
        raise ValidationError(f"contour samples must lie on the real or imaginary axis and avoid 0: {bad[:3]}")
    return lams


def scattering_curve(pot: Potential, contour, substeps: int = DEFAULT_SUBSTEPS, threads: int = 1,
                     tol=DEFAULT_TOLERANCES) -> ScatteringCurve:
    """a, b, l and det-S residuals on a contour in the continuous spectrum."""
    lams = parse_contour(contour)
    pot.check_decay(tol.decay_tol)
    if threads > 1 and lams.size > 1:
        chunks = np.array_split(lams, min(threads, lams.size))
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(lambda c: scattering_data(pot, c, substeps), chunks))
        a = np.concatenate([r[0] for r in results])
        b = np.concatenate([r[1] for r in results])
    else:
        a, b = scattering_data(pot, lams, substeps)
    return ScatteringCurve.from_coefficients(lams, a, b)


@dataclass(frozen=True)
class ReflectionSamples:
    lam: np.ndarray
    l: np.ndarray
    dropped: tuple


def reflection_coefficient(curve: ScatteringCurve, tol=DEFAULT_TOLERANCES) -> ReflectionSamples:
    """l = b / a, dropping (and reporting) samples with |a| at or below resonance_tol."""
    keep = np.abs(curve.a) > tol.resonance_tol
    dropped = tuple(complex(v) for v in curve.lam[~keep])
    if dropped:
        warnings.warn(f"dropped {len(dropped)} near-resonance samples: {list(dropped)[:5]}",
                      ResonanceWarning, stacklevel=2)
    return ReflectionSamples(curve.lam[keep], curve.b[keep] / curve.a[keep], dropped)


@dataclass(frozen=True)
class EigenvalueRecord:
    lam: SpectralPoint
    a_abs: float
    a_prime: complex
    gamma: complex
    simple: bool

    def __post_init__(self):
        if self.lam.quadrant != "C_I":
            raise ValidationError(f"eigenvalue {self.lam.value} is not in the first quadrant")

    def to_dict(self):
        return {
            "lambda": [self.lam.value.real, self.lam.value.imag],
            "a_abs": self.a_abs,
            "a_prime": [self.a_prime.real, self.a_prime.imag],
            "gamma": [self.gamma.real, self.gamma.imag],
            "simple": self.simple,
        }


@dataclass(frozen=True)
class Box:
    re_min: float
    re_max: float
    im_min: float
    im_max: float

    def __post_init__(self):
        if not (self.re_max > self.re_min and self.im_max > self.im_min):
            raise ValidationError(f"empty search box {self}")

    @classmethod
    def parse(cls, spec) -> "Box":
        if isinstance(spec, Box):
            return spec
        if isinstance(spec, str):
            try:
                spec = [float(v) for v in spec.replace(":", ",").split(",")]
            except ValueError as exc:
                raise ValidationError(f"bad number in box {spec!r}") from exc
        if len(spec) != 4:
            raise ValidationError("box needs four numbers: re_min, re_max, im_min, im_max")
        return cls(*map(float, spec))

    def boundary(self, per_edge: int) -> np.ndarray:
        t = np.arange(per_edge) / per_edge
        x0, x1, y0, y1 = self.re_min, self.re_max, self.im_min, self.im_max
        return np.concatenate([
            x0 + (x1 - x0) * t + 1j * y0,
            x1 + 1j * (y0 + (y1 - y0) * t),
            x1 - (x1 - x0) * t + 1j * y1,
            x0 + 1j * (y1 - (y1 - y0) * t),
        ])

    def contains(self, lam, slack=0.0) -> bool:
        return (self.re_min - slack <= lam.real <= self.re_max + slack
                and self.im_min - slack <= lam.imag <= self.im_max + slack)

    def split(self):
        # split slightly off-centre so that symmetric zero patterns do not land on edges
        xm = self.re_min + 0.5137 * (self.re_max - self.re_min)
        ym = self.im_min + 0.4861 * (self.im_max - self.im_min)
        return [Box(self.re_min, xm, self.im_min, ym), Box(xm, self.re_max, self.im_min, ym),
                Box(self.re_min, xm, ym, self.im_max), Box(xm, self.re_max, ym, self.im_max)]

    @property
    def size(self) -> float:
        return max(self.re_max - self.re_min, self.im_max - self.im_min)


def winding_number(pot: Potential, box: Box, per_edge: int = 64, max_doublings: int = 7,
                   substeps: int = DEFAULT_SUBSTEPS) -> int:
    """Number of zeros of a inside ``box`` by the argument principle."""
    previous = None
    for _ in range(max_doublings + 1):
        pts = box.boundary(per_edge)
        a = scattering_a_at(pot, pts, substeps)
        if np.min(np.abs(a)) == 0.0:
            raise EigenSearchError(f"a vanishes on the boundary of {box}")
        ratio = np.append(a[1:], a[:1]) / a
        dphi = np.angle(ratio)
        w = float(np.sum(dphi) / (2 * math.pi))
        resolved = np.max(np.abs(dphi)) < math.pi / 2
        if resolved and abs(w - round(w)) < 0.1 and previous is not None and round(previous) == round(w):
            return int(round(w))
        previous = w if resolved else None
        per_edge *= 2
    raise EigenSearchError(f"winding number around {box} did not stabilize (last value {previous})")


def newton_zero(pot: Potential, lam0: complex, substeps: int = DEFAULT_SUBSTEPS,
                step: float = NEWTON_STEP, target: float = NEWTON_TARGET, max_iter: int = 60,
                region=None):
    """Newton iteration on a with a central-difference derivative; returns (lam, a, a').

    With ``region`` given, iterates that would leave a neighbourhood of it end
    the iteration early (the caller then sees |a| above target).
    """
    lam = complex(lam0)
    a0, ap, am = scattering_a_at(pot, [lam, lam + step, lam - step], substeps)
    for _ in range(max_iter):
        deriv = (ap - am) / (2 * step)
        if deriv == 0:
            break
        delta = a0 / deriv
        trial = lam - delta
        if region is not None and not region.contains(trial, slack=0.5 * region.size):
            break
        lam = trial
        a0, ap, am = scattering_a_at(pot, [lam, lam + step, lam - step], substeps)
        if abs(a0) <= target and abs(delta) <= 1e-13 * max(1.0, abs(lam)):
            break
    return lam, complex(a0), complex((ap - am) / (2 * step))


def _locate(pot, box, count, substeps, depth=0):
    if count == 0:
        return []
    if count == 1:
        lam, a0, _ = newton_zero(pot, complex(0.5 * (box.re_min + box.re_max), 0.5 * (box.im_min + box.im_max)),
                                 substeps, region=box)
        if abs(a0) <= NEWTON_TARGET and box.contains(lam, slack=1e-8):
            return [lam]
    if box.size < CLUSTER_TOL:
        raise NonSimpleZeroError(f"{count} zeros of a clustered within {box.size:.1e} near "
                                 f"{box.re_min}+{box.im_min}i")
    found = []
    children = box.split()
    counts = [winding_number(pot, child, per_edge=32, substeps=substeps) for child in children]
    if sum(counts) != count:
        raise EigenSearchError(f"winding counts of sub-boxes {counts} do not add up to {count}")
    for child, c in zip(children, counts):
        found.extend(_locate(pot, child, c, substeps, depth + 1))
    return found


def find_eigenvalues(pot: Potential, box, tol=DEFAULT_TOLERANCES,
                     substeps: int = DEFAULT_SUBSTEPS) -> list:
    """Zeros of a inside a first-quadrant box, Newton-refined, sorted by (Re, Im)."""
    box = Box.parse(box)
    if box.re_min < tol.margin_min or box.im_min < tol.margin_min:
        raise ValidationError(f"box {box} must keep a margin of {tol.margin_min} from the axes")
    pot.check_decay(tol.decay_tol)
    count = winding_number(pot, box, substeps=substeps)
    zeros = _locate(pot, box, count, substeps)
    zeros.sort(key=lambda z: (z.real, z.imag))
    for z1, z2 in zip(zeros, zeros[1:]):
        if abs(z1 - z2) < CLUSTER_TOL:
            raise NonSimpleZeroError(f"Newton iterates converged within {CLUSTER_TOL} at {z1}")
    if len(zeros) != count:
        raise EigenSearchError(f"argument principle counts {count} zeros, Newton found {len(zeros)}")
    records = []
    for lam in zeros:
        lam, a0, aprime = newton_zero(pot, lam, substeps)
        simple = abs(aprime) > tol.simple_tol
        if not simple:
            raise NonSimpleZeroError(f"|a'| = {abs(aprime):.2e} at {lam} is below simple_tol")
        gamma = jost_at_eigenvalue_ratio(pot, lam, tol, substeps)
        records.append(EigenvalueRecord(SpectralPoint(lam), abs(a0), aprime, gamma, simple))
    return records


def z_class(pot: Potential, box, tol=DEFAULT_TOLERANCES, substeps: int = DEFAULT_SUBSTEPS) -> int:
    """N such that the potential is in Z_N relative to ``box``."""
    return len(find_eigenvalues(pot, box, tol, substeps))
