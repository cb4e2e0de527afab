"""Spectral-gap large deviations for finite Markov shifts and their state-space projections."""

__version__ = "0.1.0"

from .arithmetic_bounds import SlnElement, entropy_sln, eta_log, nonescape_sln
from .chain_model import (
    AveragingOp,
    ChainSpec,
    PhiFunction,
    Projection,
    PropertyMCertificate,
    averaging_operator,
    check_property_m,
    collision_entropy_rate,
    entropy_rate,
    load_chain,
    n_step_operator,
    stationary_measure,
)
from .equidistribution import (
    EffectiveEquiParams,
    RigidityQuery,
    bigset_mass_bound,
    effective_inequality,
    entropy_deviation_check,
    nonescape_from_lambda,
    rigidity_bound,
)
from .estimators import AveragingOperatorEstimator
from .exceptions import (
    BoundViolationError,
    CertificateError,
    ConvergenceError,
    InfeasibleError,
    PropertyMError,
    ReducibleChainError,
    SpecError,
)
from .graph_walks import GraphSpec, hecke_chain, load_graph, nonbacktracking_chain, random_regular
from .ld_bounds import LDQuery, LDReport, exact_mgf, kl_div, ld_tail_bound, ld_tail_optimize, optimal_tilt, tilted_norm_bound
from .montecarlo import SimConfig, TailEstimate, bound_vs_empirical, empirical_tail, exact_tail_dp, sample_path
from .spectral import SpectralReport, l20_matrix_norm, l20_norm, weighted_operator_norm
