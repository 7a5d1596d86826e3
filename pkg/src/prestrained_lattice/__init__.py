"""Discrete prestrained lattice energies, their integral representations and continuum limits."""

__version__ = "0.1.0"

from .density import QW, W, Cf_radial
from .discrete import Cutoff, DiscreteDeformation, discrete_energy
from .functionals import AnalyticMap, continuum_energy_E, gamma_limit_F, limit_functional_bounds
from .geometry import Box, ConvexPolygon, regular_polygon
from .lattices import basis_from_vector, enumerate_shell, lattice_set, signed_orbit, translations
from .metric import (
    MetricField,
    constant_metric,
    example1_metric,
    example2_metric,
    gaussian_curvature,
    identity_metric,
)
from .minimize import (
    ContinuumMinimizer,
    DiscreteEnergyMinimizer,
    GammaStudy,
    gamma_study,
    minimize_continuum,
    minimize_discrete,
)
from .representation import integral_representation

__all__ = [
    "W", "QW", "Cf_radial",
    "Cutoff", "DiscreteDeformation", "discrete_energy",
    "AnalyticMap", "continuum_energy_E", "gamma_limit_F", "limit_functional_bounds",
    "Box", "ConvexPolygon", "regular_polygon",
    "basis_from_vector", "enumerate_shell", "lattice_set", "signed_orbit", "translations",
    "MetricField", "constant_metric", "example1_metric", "example2_metric", "gaussian_curvature",
    "identity_metric",
    "ContinuumMinimizer", "DiscreteEnergyMinimizer", "GammaStudy", "gamma_study",
    "minimize_continuum", "minimize_discrete",
    "integral_representation",
]
