"""Ground-state correlators and entanglement measures of the 1-D XY chain
in a transverse field.

The package computes thermodynamic-limit correlation functions by
free-fermion quadrature and Toeplitz determinants, assembles two-spin reduced
density matrices for the symmetric and broken-symmetry ground states
(bounding the one undetermined off-diagonal correlator by positivity),
evaluates concurrence, negativity and the one-/two-site multipartite
measures across the phase diagram, and cross-checks everything against a
finite-chain exact-diagonalization oracle.  A configuration-driven sweep
layer and an HTTP compute service sit on top.
"""

__version__ = "0.1.0"

from .correlators import (
    CorrelatorSet,
    MagnetizationEstimate,
    correlator_set,
    fermion_correlator,
    ground_state_energy_per_site,
    spontaneous_magnetization,
    transverse_magnetization,
    xx_correlator,
    yy_correlator,
    zz_correlator,
)
from .density_matrix import (
    RhoDiagnostics,
    TwoSpinDensityMatrix,
    XzBoundResult,
    assemble_rho,
    validate_rho,
    xz_bounds,
)
from .measures import (
    EntanglementReport,
    branch_indicator,
    concurrence,
    concurrence_closed_form,
    concurrence_lambda_derivative,
    energy_derivative_identities,
    entanglement_report,
    g1_purity,
    g2_purity,
    negativity,
    negativity_closed_form,
    pt_spectrum,
    r_spectrum,
    r_spectrum_scan,
    symmetry_equivalence_lhs,
)
from .model import (
    BROKEN,
    ConfigError,
    FitRejectedError,
    InconsistentCorrelatorsError,
    Interval,
    ModelParams,
    NonPositiveStateError,
    ParameterDomainError,
    SYMMETRIC,
)
from .sweep import (
    CriticalEstimate,
    DecaySeries,
    FitResult,
    SweepConfig,
    SweepRow,
    detect_critical_points,
    emit_figure,
    fit_entanglement_length,
    fit_lengths_at,
    parse_config,
    run_sweep,
)

__all__ = [
    "__version__",
    "BROKEN",
    "SYMMETRIC",
    "ConfigError",
    "CorrelatorSet",
    "CriticalEstimate",
    "DecaySeries",
    "EntanglementReport",
    "FitRejectedError",
    "FitResult",
    "InconsistentCorrelatorsError",
    "Interval",
    "MagnetizationEstimate",
    "ModelParams",
    "NonPositiveStateError",
    "ParameterDomainError",
    "RhoDiagnostics",
    "SweepConfig",
    "SweepRow",
    "TwoSpinDensityMatrix",
    "XzBoundResult",
    "assemble_rho",
    "branch_indicator",
    "concurrence",
    "concurrence_closed_form",
    "concurrence_lambda_derivative",
    "correlator_set",
    "detect_critical_points",
    "emit_figure",
    "energy_derivative_identities",
    "entanglement_report",
    "fermion_correlator",
    "fit_entanglement_length",
    "fit_lengths_at",
    "g1_purity",
    "g2_purity",
    "ground_state_energy_per_site",
    "negativity",
    "negativity_closed_form",
    "parse_config",
    "pt_spectrum",
    "r_spectrum",
    "r_spectrum_scan",
    "run_sweep",
    "spontaneous_magnetization",
    "symmetry_equivalence_lhs",
    "transverse_magnetization",
    "validate_rho",
    "xx_correlator",
    "xz_bounds",
    "yy_correlator",
    "zz_correlator",
]
