"""Scattering, Darboux transformation and time evolution for the Chen-Lee-Liu equation."""

from .core import (
    CLLError,
    ComplexVec2Field,
    Potential,
    SpatialGrid,
    SpectralPoint,
    Tolerances,
    load_potential,
    save_field,
)

__all__ = [
    "CLLError",
    "ComplexVec2Field",
    "Potential",
    "SpatialGrid",
    "SpectralPoint",
    "Tolerances",
    "load_potential",
    "save_field",
]
