"""Krylov-orbit distance experiment for the discrete random Schroedinger operator."""

import warnings

warnings.filterwarnings("ignore", message="The TBB threading layer requires TBB version")

from .errors import (  # noqa: E402
    AnalysisError,
    ConfigError,
    ContractError,
    DomainError,
    KrylovDistanceError,
    SizingError,
    TruncationError,
)
from .hamiltonian import Convention, Potential, apply, cell_seed, sample_potential  # noqa: E402
from .lanczos import DistanceSeries, LanczosState, ortho_diagnostic, probe, probe_with_basis  # noqa: E402
from .lattice import Field, LatticeSpec, delta_field, make_lattice  # noqa: E402
from .scaling import RescaleFit, evaluate_criterion, optimal_a, rescale_fit, worst_case_intercept  # noqa: E402

__version__ = "0.1.0"

__all__ = [
    "AnalysisError", "ConfigError", "ContractError", "Convention", "DistanceSeries", "DomainError",
    "Field", "KrylovDistanceError", "LanczosState", "LatticeSpec", "Potential", "RescaleFit",
    "SizingError", "TruncationError", "apply", "cell_seed", "delta_field", "evaluate_criterion",
    "make_lattice", "optimal_a", "ortho_diagnostic", "probe", "probe_with_basis", "rescale_fit",
    "sample_potential", "worst_case_intercept",
]
