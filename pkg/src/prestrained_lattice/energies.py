"""Discrete energies, their integral representations and the continuum functionals in one namespace."""

from .discrete import Cutoff, DiscreteDeformation, DiscreteEnergy, discrete_energy
from .functionals import (
    CASES,
    AnalyticMap,
    P1Map,
    continuum_energy_E,
    dist2_SO,
    gamma_limit_F,
    limit_functional_bounds,
    rotation_identity_check,
)
from .representation import (
    B0,
    EnergyReport,
    PiecewiseAffineField,
    boundary_bound,
    extend_p1,
    integral_representation,
    lambda_field,
    nearest_representation,
    next_nearest_representation_2d,
    representation_margin,
    segments_meet,
    simplex_edge_sums,
)

__all__ = [
    "Cutoff", "DiscreteDeformation", "DiscreteEnergy", "discrete_energy",
    "CASES", "AnalyticMap", "P1Map", "continuum_energy_E", "dist2_SO", "gamma_limit_F",
    "limit_functional_bounds", "rotation_identity_check",
    "B0", "EnergyReport", "PiecewiseAffineField", "boundary_bound", "extend_p1",
    "integral_representation", "lambda_field", "nearest_representation",
    "next_nearest_representation_2d", "representation_margin", "segments_meet", "simplex_edge_sums",
]
