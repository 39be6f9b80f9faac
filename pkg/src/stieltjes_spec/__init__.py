"""Spectral toolkit for a third-order operator driven by signed measures."""

from .errors import (
    StieltjesSpecError,
    InputError,
    NumericalError,
    InternalCheckError,
)
from .measure import (
    Atom,
    Measure,
    PolynomialPiece,
    lebesgue_integral_of_induced,
    ls_integral,
    oscillation_sequence,
    ramp_sequence,
)
from .ivp import (
    FundamentalMatrix,
    FundamentalPath,
    InitialTriple,
    SolutionPath,
    SolverConfig,
    Workspace,
    cube_root,
    fundamental_matrix,
    solve_inhomogeneous,
    solve_picard,
    solve_transfer,
    solve_value,
    xi_bound,
    zero_potential,
)
from .charfn import RealSplit, boundary_matrix, delta, real_split
from .spectrum import (
    Eigenpair,
    SpectrumConfig,
    count_zeros_disc,
    counting_threshold,
    eigenfunction,
    find_eigenvalue,
    localize,
    spectral_shift,
    spectrum_scan,
)
from .sens import (
    FdRow,
    eigenvalue_gradient_p,
    eigenvalue_gradient_q,
    fd_check,
    fundamental_fd_check,
    fundamental_gradient_p,
    fundamental_gradient_q,
)
from .lab import (
    BoundAuditReport,
    ConvergenceReport,
    ResidualReport,
    asymptotic_residuals,
    bound_audit,
    solution_continuity,
    weakstar_eig,
)

__version__ = "0.1.0"

__all__ = [
    "Atom",
    "BoundAuditReport",
    "ConvergenceReport",
    "Eigenpair",
    "FdRow",
    "FundamentalMatrix",
    "FundamentalPath",
    "InitialTriple",
    "InputError",
    "InternalCheckError",
    "Measure",
    "NumericalError",
    "PolynomialPiece",
    "RealSplit",
    "ResidualReport",
    "SolutionPath",
    "SolverConfig",
    "SpectrumConfig",
    "StieltjesSpecError",
    "Workspace",
    "asymptotic_residuals",
    "bound_audit",
    "boundary_matrix",
    "count_zeros_disc",
    "counting_threshold",
    "cube_root",
    "delta",
    "eigenfunction",
    "eigenvalue_gradient_p",
    "eigenvalue_gradient_q",
    "fd_check",
    "find_eigenvalue",
    "fundamental_fd_check",
    "fundamental_gradient_p",
    "fundamental_gradient_q",
    "fundamental_matrix",
    "lebesgue_integral_of_induced",
    "localize",
    "ls_integral",
    "oscillation_sequence",
    "ramp_sequence",
    "real_split",
    "solution_continuity",
    "solve_inhomogeneous",
    "solve_picard",
    "solve_transfer",
    "solve_value",
    "spectral_shift",
    "spectrum_scan",
    "weakstar_eig",
    "xi_bound",
    "zero_potential",
    "__version__",
]
