"""Numerical verification toolkit for phase-space quantum mechanics.

Wave functions are stored as ``amplitude * exp(i S / hbar)`` on rectangular
(x, p), (t, E) or (phi, L) grids; operators are fourth-order finite
differences; uncertainty, commutator, quantization and fluctuation claims
are checked against closed forms.
"""

__version__ = "0.1.0"

from .errors import DomainError, NumericError
from .numerics import ComplexField, Grid1D, PhaseGrid, RealField
from .action import Box, Harmonic, HamiltonianSpec, Polynomial, Tabulated, bohr_sommerfeld_levels
from .wavefunction import (
    PhaseWaveFunction,
    make_free_particle,
    make_gaussian_packet,
    normalize,
    sample_random_state,
    time_sliced,
)
from .operators import QuantumOperator, apply, commutator_residual, mean_value, observable_extract
from .uncertainty import UncertaintyReport, angle_uncertainty_report, uncertainty_report
from .fluctuation import FluctuationReport, PathEnsemble, ensemble_fluctuation, temporal_fluctuation

__all__ = [
    "Box",
    "ComplexField",
    "DomainError",
    "FluctuationReport",
    "Grid1D",
    "HamiltonianSpec",
    "Harmonic",
    "NumericError",
    "PathEnsemble",
    "PhaseGrid",
    "PhaseWaveFunction",
    "Polynomial",
    "QuantumOperator",
    "RealField",
    "Tabulated",
    "UncertaintyReport",
    "angle_uncertainty_report",
    "apply",
    "bohr_sommerfeld_levels",
    "commutator_residual",
    "ensemble_fluctuation",
    "make_free_particle",
    "make_gaussian_packet",
    "mean_value",
    "normalize",
    "observable_extract",
    "sample_random_state",
    "temporal_fluctuation",
    "time_sliced",
    "uncertainty_report",
]
