"""Grid, field containers, tolerances and file I/O shared by the other modules."""

from __future__ import annotations

import csv
import json
import math
import warnings
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np

QUADRANT_TOL = 1e-12


class CLLError(Exception):
    """Base class for library errors; ``kind`` is the machine-readable tag."""

    kind = "error"

    def __init__(self, message, **details):
        super().__init__(message)
        self.details = details

    def to_dict(self):
        out = {"kind": self.kind, "message": str(self)}
        for key, val in self.details.items():
            out[key] = _jsonable(val)
        return out


class ParseError(CLLError):
    kind = "parse"


class ValidationError(CLLError):
    kind = "validation"


class IntegrationBlowUp(CLLError):
    kind = "blowup"


class DegenerateSeedError(CLLError):
    kind = "degenerate-seed"


class NotAnEigenvalueError(CLLError):
    kind = "not-an-eigenvalue"


class EigenSearchError(CLLError):
    kind = "eigen-search"


class NonSimpleZeroError(EigenSearchError):
    kind = "non-simple-zero"


class SingularRingError(CLLError):
    kind = "singular-ring"


class ResonanceError(CLLError):
    kind = "resonance"


class CFLError(CLLError):
    kind = "cfl"


class DecayWarning(UserWarning):
    """Potential is not small at the grid ends."""


def _jsonable(val):
    if isinstance(val, complex):
        return [val.real, val.imag]
    if isinstance(val, np.generic):
        return _jsonable(val.item())
    if isinstance(val, np.ndarray):
        return [_jsonable(v) for v in val.tolist()]
    return val


@dataclass(frozen=True)
class Tolerances:
    """Numerical thresholds used across the library."""

    bc_tol: float = 1e-8
    eigen_tol: float = 1e-6
    detS_tol: float = 1e-6
    sing_eps: float = 1e-6
    m_floor: float = 1e-12
    decay_tol: float = 1e-10
    margin_min: float = 0.05
    simple_tol: float = 1e-6
    resonance_tol: float = 1e-6

    def __post_init__(self):
        for name, val in self.__dict__.items():
            if not (isinstance(val, (int, float)) and val > 0 and math.isfinite(val)):
                raise ValidationError(f"tolerance {name} must be a positive number, got {val!r}")


DEFAULT_TOLERANCES = Tolerances()


def _frozen(arr):
    arr = np.array(arr, dtype=np.complex128, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class SpatialGrid:
    """Uniform periodic lattice x_k = -L + k h on [-L, L), h = 2L / n."""

    half_width: float = 30.0
    n_points: int = 1024

    def __post_init__(self):
        if not (self.half_width > 0 and math.isfinite(self.half_width)):
            raise ValidationError(f"half_width must be positive, got {self.half_width!r}")
        if int(self.n_points) != self.n_points or self.n_points < 16 or self.n_points % 2:
            raise ValidationError(f"n_points must be an even integer >= 16, got {self.n_points!r}")
        object.__setattr__(self, "n_points", int(self.n_points))
        object.__setattr__(self, "half_width", float(self.half_width))

    @property
    def spacing(self) -> float:
        return 2.0 * self.half_width / self.n_points

    @cached_property
    def x(self) -> np.ndarray:
        x = -self.half_width + self.spacing * np.arange(self.n_points)
        x.setflags(write=False)
        return x

    @cached_property
    def wavenumbers(self) -> np.ndarray:
        k = 2.0 * np.pi * np.fft.fftfreq(self.n_points, d=self.spacing)
        k.setflags(write=False)
        return k

    @property
    def k_max(self) -> float:
        return math.pi / self.spacing

    @property
    def center_index(self) -> int:
        """Index of the sample at x = 0."""
        return self.n_points // 2


@dataclass(frozen=True, eq=False)
class Potential:
    """Complex field q (and its partner r) on a grid.

    With ``reduced`` set, r is the exact complex conjugate of q.
    """

    grid: SpatialGrid
    q: np.ndarray
    r: np.ndarray | None = None
    notes: tuple = ()

    def __post_init__(self):
        q = _frozen(self.q)
        if q.shape != (self.grid.n_points,):
            raise ValidationError(f"q has shape {q.shape}, expected ({self.grid.n_points},)")
        if not np.all(np.isfinite(q)):
            raise ValidationError("q contains non-finite samples")
        object.__setattr__(self, "q", q)
        if self.r is None:
            object.__setattr__(self, "r", _frozen(np.conj(q)))
            object.__setattr__(self, "_reduced", True)
        else:
            r = _frozen(self.r)
            if r.shape != q.shape or not np.all(np.isfinite(r)):
                raise ValidationError("r must be finite with the same shape as q")
            object.__setattr__(self, "r", r)
            object.__setattr__(self, "_reduced", bool(np.array_equal(r, np.conj(q))))

    @property
    def reduced(self) -> bool:
        return self._reduced

    @classmethod
    def zeros(cls, grid: SpatialGrid) -> "Potential":
        return cls(grid, np.zeros(grid.n_points, dtype=complex))

    @classmethod
    def from_function(cls, grid: SpatialGrid, func) -> "Potential":
        return cls(grid, np.asarray(func(grid.x), dtype=complex))

    def end_magnitude(self) -> float:
        return float(max(abs(self.q[0]), abs(self.q[-1]), abs(self.r[0]), abs(self.r[-1])))

    def decays(self, tol: float = DEFAULT_TOLERANCES.decay_tol) -> bool:
        return self.end_magnitude() < tol

    def check_decay(self, tol: float = DEFAULT_TOLERANCES.decay_tol) -> bool:
        """Warn with :class:`DecayWarning` when the field is not small at the ends."""
        if self.decays(tol):
            return True
        warnings.warn(
            f"potential magnitude {self.end_magnitude():.3e} at the grid ends exceeds {tol:.1e}",
            DecayWarning,
            stacklevel=3,
        )
        return False

    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.q)))

    def mass(self) -> float:
        # trapezoid on the periodic grid reduces to the plain sum
        return float(self.grid.spacing * np.sum(np.abs(self.q) ** 2))

    def with_q(self, q) -> "Potential":
        return Potential(self.grid, q)


@dataclass(frozen=True, eq=False)
class ComplexVec2Field:
    """Pair of complex sample arrays, e.g. a vector solution (f, g)."""

    grid: SpatialGrid
    component_1: np.ndarray
    component_2: np.ndarray

    def __post_init__(self):
        c1 = _frozen(self.component_1)
        c2 = _frozen(self.component_2)
        n = self.grid.n_points
        if c1.shape != (n,) or c2.shape != (n,):
            raise ValidationError("field components must have one sample per grid point")
        if not (np.all(np.isfinite(c1)) and np.all(np.isfinite(c2))):
            raise ValidationError("field contains non-finite samples")
        object.__setattr__(self, "component_1", c1)
        object.__setattr__(self, "component_2", c2)

    def as_array(self) -> np.ndarray:
        return np.stack([self.component_1, self.component_2])

    def scaled(self, c) -> "ComplexVec2Field":
        return ComplexVec2Field(self.grid, c * self.component_1, c * self.component_2)

    def sup_norm(self) -> float:
        return float(np.max(np.hypot(np.abs(self.component_1), np.abs(self.component_2))))


QUADRANTS = ("C_I", "C_II", "C_III", "C_IV", "continuous")


@dataclass(frozen=True)
class SpectralPoint:
    """Nonzero spectral parameter with its quadrant tag."""

    value: complex
    quadrant: str = field(init=False)

    def __post_init__(self):
        lam = complex(self.value)
        if not (math.isfinite(lam.real) and math.isfinite(lam.imag)):
            raise ValidationError(f"spectral parameter must be finite, got {lam!r}")
        if lam == 0:
            raise ValidationError("spectral parameter must be nonzero")
        object.__setattr__(self, "value", lam)
        object.__setattr__(self, "quadrant", quadrant_of(lam))

    @property
    def on_continuous_spectrum(self) -> bool:
        return self.quadrant == "continuous"

    @property
    def conj(self) -> "SpectralPoint":
        return SpectralPoint(self.value.conjugate())


def quadrant_of(lam: complex, tol: float = QUADRANT_TOL) -> str:
    lam = complex(lam)
    if abs(lam.real) <= tol or abs(lam.imag) <= tol:
        return "continuous"
    if lam.real > 0:
        return "C_I" if lam.imag > 0 else "C_IV"
    return "C_II" if lam.imag > 0 else "C_III"


def as_spectral_point(lam) -> SpectralPoint:
    return lam if isinstance(lam, SpectralPoint) else SpectralPoint(lam)


def _read_json(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except FileNotFoundError as exc:
        raise ParseError(f"file not found: {path}", path=str(path)) from exc
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise ParseError(f"malformed JSON in {path}: {exc}", path=str(path)) from exc


def _complex_array(obj, re_key, im_key, n, path):
    try:
        re = np.asarray(obj[re_key], dtype=np.float64)
        im = np.asarray(obj[im_key], dtype=np.float64)
    except KeyError as exc:
        raise ParseError(f"missing key {exc.args[0]!r} in {path}", path=str(path)) from exc
    except (TypeError, ValueError) as exc:
        raise ParseError(f"non-numeric samples under {re_key}/{im_key} in {path}", path=str(path)) from exc
    if re.shape != (n,) or im.shape != (n,):
        raise ParseError(f"{re_key}/{im_key} must have length n={n} in {path}", path=str(path))
    if not (np.all(np.isfinite(re)) and np.all(np.isfinite(im))):
        raise ValidationError(f"non-finite samples under {re_key}/{im_key} in {path}", path=str(path))
    out = np.empty(n, dtype=np.complex128)
    # assigning parts (rather than re + 1j*im) keeps the sign of zeros
    out.real, out.imag = re, im
    return out


def load_potential(path, decay_tol: float = DEFAULT_TOLERANCES.decay_tol) -> Potential:
    """Read a potential from the JSON format ``{L, n, q_re, q_im[, r_re, r_im]}``."""
    obj = _read_json(path)
    if not isinstance(obj, dict):
        raise ParseError(f"top-level JSON value in {path} must be an object", path=str(path))
    try:
        L = float(obj["L"])
        n_raw = obj["n"]
    except KeyError as exc:
        raise ParseError(f"missing key {exc.args[0]!r} in {path}", path=str(path)) from exc
    except (TypeError, ValueError) as exc:
        raise ParseError(f"L must be a number in {path}", path=str(path)) from exc
    if isinstance(n_raw, bool) or not isinstance(n_raw, (int, float)) or int(n_raw) != n_raw:
        raise ParseError(f"n must be an integer in {path}", path=str(path))
    n = int(n_raw)
    if n % 2:
        raise ValidationError(f"n_points must be even, got {n}", path=str(path))
    grid = SpatialGrid(L, n)
    q = _complex_array(obj, "q_re", "q_im", n, path)
    r = None
    if "r_re" in obj or "r_im" in obj:
        r = _complex_array(obj, "r_re", "r_im", n, path)
    pot = Potential(grid, q, r)
    if not pot.decays(decay_tol):
        msg = f"decay: |q| at grid ends is {pot.end_magnitude():.3e} (tolerance {decay_tol:.1e})"
        warnings.warn(msg, DecayWarning, stacklevel=2)
        pot = Potential(grid, pot.q, None if pot.reduced else pot.r, notes=(msg,))
    return pot


def potential_to_dict(pot: Potential) -> dict:
    out = {
        "L": pot.grid.half_width,
        "n": pot.grid.n_points,
        "q_re": pot.q.real.tolist(),
        "q_im": pot.q.imag.tolist(),
    }
    if not pot.reduced:
        out["r_re"] = pot.r.real.tolist()
        out["r_im"] = pot.r.imag.tolist()
    return out


def fmt(val: float) -> str:
    """Full double precision text form (17 significant digits)."""
    return format(float(val), ".17g")


def write_csv(path, header, columns):
    """Write equal-length real columns with a header row."""
    path = Path(path)
    rows = np.column_stack([np.asarray(c, dtype=np.float64) for c in columns])
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([fmt(v) for v in row])


def read_csv(path):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        data = np.array([[float(v) for v in row] for row in reader], dtype=np.float64)
    return header, data.reshape(-1, len(header))


def save_field(field, path) -> None:
    """Write a potential (JSON) or a vector field (CSV) so that reloading is bit-exact."""
    path = Path(path)
    try:
        if isinstance(field, Potential):
            # json writes the shortest repr that round-trips each double exactly
            with open(path, "w") as fh:
                json.dump(potential_to_dict(field), fh)
        elif isinstance(field, ComplexVec2Field):
            write_csv(
                path,
                ["x", "c1_re", "c1_im", "c2_re", "c2_im"],
                [field.grid.x, field.component_1.real, field.component_1.imag,
                 field.component_2.real, field.component_2.imag],
            )
        else:
            raise TypeError(f"cannot save object of type {type(field).__name__}")
    except OSError as exc:
        raise CLLError(f"cannot write {path}: {exc}", path=str(path)) from exc


def load_vec2_field(path, grid: SpatialGrid) -> ComplexVec2Field:
    header, data = read_csv(path)
    if header != ["x", "c1_re", "c1_im", "c2_re", "c2_im"]:
        raise ParseError(f"unexpected header in {path}: {header}")
    c = np.empty((2, len(data)), dtype=np.complex128)
    c.real, c.imag = data[:, [1, 3]].T, data[:, [2, 4]].T
    return ComplexVec2Field(grid, c[0], c[1])
