"""Operator-valued geometric phases of a system coupled to its environment.

The universe is a bipartite Hilbert space ``S (x) E``.  Eigenvalues are
replaced by eigenoperators on ``S`` and states by reduced density matrices;
this package computes their phase generators, curvatures, chart transition
data and adiabatic transport, with a rotated phase-damping qubit as the
worked model.
"""

from .linalg import BipartiteVector, partial_trace_env, trace_distance
from .cstar import DensityMatrix, lindbladian_apply, star_inner, star_norm_sq
from .eigen import EigenRecord, SectionField, build_eigen_record, solve_section_on_grid, solve_star_eigen
from .forms import Grid, MatrixOneForm, MatrixThreeForm, MatrixTwoForm
from .connection import breve_generator, curvatures, generator_forms, generator_from_section, split_generator
from .atlas import ChartAtlas, curvature_gauge_check, transition_functions
from .transport import (
    ParameterPath,
    TransportResult,
    adiabatic_transport,
    leakage,
    schrodinger_integrate,
    transport_error,
)
from .qubit import QubitModel, QubitModelParams

__all__ = [
    "BipartiteVector",
    "ChartAtlas",
    "DensityMatrix",
    "EigenRecord",
    "Grid",
    "MatrixOneForm",
    "MatrixThreeForm",
    "MatrixTwoForm",
    "ParameterPath",
    "QubitModel",
    "QubitModelParams",
    "SectionField",
    "TransportResult",
    "adiabatic_transport",
    "breve_generator",
    "build_eigen_record",
    "curvature_gauge_check",
    "curvatures",
    "generator_forms",
    "generator_from_section",
    "leakage",
    "lindbladian_apply",
    "partial_trace_env",
    "schrodinger_integrate",
    "solve_section_on_grid",
    "solve_star_eigen",
    "split_generator",
    "star_inner",
    "star_norm_sq",
    "trace_distance",
    "transition_functions",
    "transport_error",
]
