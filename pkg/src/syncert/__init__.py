"""Certification and simulation toolkit for output synchronisation of
diffusively coupled oscillator networks with sector-bounded nonlinear
couplings and link disturbances."""

from .certificates import (
    POSITIVITY_TOL,
    CertificateForms,
    DissipationMatrices,
    EdgeCertificate,
    GainBound,
    MarginReport,
    NetworkCertificate,
    SectorBound,
    UncertifiedBoundError,
    certificate_from_dict,
    certificate_to_dict,
    dissipation_matrices,
    dissipation_residual,
    gain_bound,
    gain_bound_from_forms,
    quadratic_forms,
    sync_margins,
)
from .config import (
    ConfigError,
    NetworkConfig,
    bundled_config,
    bundled_expected,
    config_from_dict,
    parse_config,
)
from .goodwin import (
    CertParams,
    GoodwinParams,
    InadmissibleParams,
    SearchResult,
    admissible_theta3_interval,
    certify_edge,
    certify_network,
    hill_slope,
    hill_slope_max,
    search_params,
)
from .graphs import (
    EdgePDResult,
    EdgeStats,
    Graph,
    build_graph,
    complete_graph,
    edge_pd_check,
    edge_stats,
    erdos_renyi_graph,
    incidence,
    pd_oracle,
    weight_matrices,
)
from .linalg import JacobiConvergenceError, jacobi_eigenvalues
from .noise import edge_seed_sequence, normals, uniforms
from .simulation import (
    BoundCheck,
    CouplingSpec,
    DisturbanceSpec,
    NetworkModel,
    SectorCheck,
    SimulationDiverged,
    SimulationTrace,
    affine_sinusoid_coupling,
    bound_check,
    coupling_input,
    linear_coupling,
    piecewise_linear_coupling,
    rk4_step,
    run,
    verify_sector,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    "POSITIVITY_TOL",
    "BoundCheck",
    "CertParams",
    "CertificateForms",
    "ConfigError",
    "CouplingSpec",
    "DissipationMatrices",
    "DisturbanceSpec",
    "EdgeCertificate",
    "EdgePDResult",
    "EdgeStats",
    "GainBound",
    "GoodwinParams",
    "Graph",
    "InadmissibleParams",
    "JacobiConvergenceError",
    "MarginReport",
    "NetworkCertificate",
    "NetworkConfig",
    "NetworkModel",
    "SearchResult",
    "SectorBound",
    "SectorCheck",
    "SimulationDiverged",
    "SimulationTrace",
    "UncertifiedBoundError",
    "admissible_theta3_interval",
    "affine_sinusoid_coupling",
    "bound_check",
    "build_graph",
    "bundled_config",
    "bundled_expected",
    "certificate_from_dict",
    "certificate_to_dict",
    "certify_edge",
    "certify_network",
    "complete_graph",
    "config_from_dict",
    "coupling_input",
    "dissipation_matrices",
    "dissipation_residual",
    "edge_pd_check",
    "edge_seed_sequence",
    "edge_stats",
    "erdos_renyi_graph",
    "gain_bound",
    "gain_bound_from_forms",
    "hill_slope",
    "hill_slope_max",
    "incidence",
    "jacobi_eigenvalues",
    "linear_coupling",
    "normals",
    "parse_config",
    "pd_oracle",
    "piecewise_linear_coupling",
    "quadratic_forms",
    "rk4_step",
    "run",
    "search_params",
    "sync_margins",
    "uniforms",
    "verify_sector",
    "weight_matrices",
]
