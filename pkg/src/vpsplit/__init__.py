"""Explicit volume-preserving splitting methods for polynomial divergence-free fields."""
from .errors import (
    ConstructionError,
    DegenerateField,
    DomainError,
    MaxSteps,
    NotDiagonal,
    NotDivergenceFree,
    ProblemFormatError,
    SingularStep,
    StepUnderflow,
    VpsError,
)
from .integrate import Section, SectionSpec, Trajectory, poincare, run
from .oracle import Rk45, RkOptions, jacobian_det, rk45
from .polyfield import (
    MultiIndex,
    SparsePolynomial,
    VectorField,
    coefficient_count,
    diag_offdiag_split,
    divergence,
    evaluate,
    load_field,
    partial,
    save_field,
)
from .problems import build_cubic_stokes, build_laurent, build_quadratic_stokes
from .splitting import (
    Edfvf,
    Shear,
    ShearField,
    SplitScheme,
    build_scheme,
    decompose_diagonal,
    edfvf_flow,
    integrals_basis,
    shear_flow,
    step,
)

__version__ = "0.1.0"
