"""Settlement-batch optimization toolkit.

Select the subset of a transaction batch that can settle simultaneously,
maximizing a weighted cash/volume payoff under account non-negativity,
collateral, and precedence constraints.  Provides an exact pruned-search
oracle, a penalty-encoded sampled objective, simulated variational solvers
with readout-noise mitigation, a random-search baseline, and a benchmark
harness with synthetic instance generation.
"""

from .bayesopt import AcquisitionConfig, BayesOptimizer, ObservationSet
from .circuit import (
    AnsatzConfig,
    MappingConfig,
    OutcomeDistribution,
    ReadoutNoise,
    calibration_sample,
    exact_distribution,
    map_params,
    sample,
    solve_sigma,
)
from .collateral import CollateralOutcome, compute_collateral, credit_needed, pledge_cap
from .exact import ExactSolution, payoff_ratio, solve_exact, solve_exact_joint
from .generator import GeneratorSpec, generate_instance
from .harness import RunConfig, RunRecord, run_exact, run_sampler, run_variational
from .mitigation import MitigationReport, calibration_gamma, fidelity, hammer_step, ihammer
from .model import (
    FeasibilityReport,
    Instance,
    check_feasibility,
    load_instance,
    net_flows,
    parse_instance,
    payoff,
)
from .penalty import (
    ActivationParams,
    CostCache,
    PenaltyConfig,
    activation,
    canonical_violations,
    expected_cost,
    unconstrained_cost,
)
from .report import write_report

__version__ = "0.1.0"

__all__ = [
    "AcquisitionConfig",
    "ActivationParams",
    "AnsatzConfig",
    "BayesOptimizer",
    "CollateralOutcome",
    "CostCache",
    "ExactSolution",
    "FeasibilityReport",
    "GeneratorSpec",
    "Instance",
    "MappingConfig",
    "MitigationReport",
    "ObservationSet",
    "OutcomeDistribution",
    "PenaltyConfig",
    "ReadoutNoise",
    "RunConfig",
    "RunRecord",
    "activation",
    "calibration_gamma",
    "calibration_sample",
    "canonical_violations",
    "check_feasibility",
    "compute_collateral",
    "credit_needed",
    "exact_distribution",
    "expected_cost",
    "fidelity",
    "generate_instance",
    "hammer_step",
    "ihammer",
    "load_instance",
    "map_params",
    "net_flows",
    "parse_instance",
    "payoff",
    "payoff_ratio",
    "pledge_cap",
    "run_exact",
    "run_sampler",
    "run_variational",
    "sample",
    "solve_exact",
    "solve_exact_joint",
    "solve_sigma",
    "unconstrained_cost",
    "write_report",
]
