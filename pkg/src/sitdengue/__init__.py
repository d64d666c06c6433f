"""Sterile insect releases and dengue risk: thresholds, equilibria, dynamics."""

from .params import (
    ModelParams,
    DerivedQuantities,
    ValidationError,
    apply_mechanical_control,
    basic_offspring_number,
    derived_quantities,
    preset,
    validate,
)

__all__ = [
    "ModelParams",
    "DerivedQuantities",
    "ValidationError",
    "apply_mechanical_control",
    "basic_offspring_number",
    "derived_quantities",
    "preset",
    "validate",
]
__version__ = "0.1.0"
