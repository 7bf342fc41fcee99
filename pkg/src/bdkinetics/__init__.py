"""Exact stochastic and deterministic cluster-growth kinetics.

Monomer-addition/removal dynamics on integer cluster configurations: exact
continuous-time jump simulation, truncated deterministic equations, the
exact stationary law with its non-equilibrium potential and relative
entropy, and desk-scale convergence experiments.
"""

__version__ = "0.1.0"

from .errors import BdkError
from .kernels import (
    ConstantKernel,
    LinearCoagulationKernel,
    PowerLawKernel,
    TabulatedKernel,
    activity_for_mass,
    critical_activity,
    critical_mass,
    detailed_balance_coefficients,
    equilibrium_profile,
)
from .state import Configuration, apply_jump, enumerate_states, from_monomers, to_concentrations
from .ssa import PropensityIndex, channel_rates, ensemble, simulate, step
from .ode import IntegratorConfig, entropy_along_trajectory, fluxes, integrate, rhs
from .stationary import (
    ctmc_stationary_oracle,
    detailed_balance_check,
    log_stationary_weight,
    nonequilibrium_potential,
    potential_decomposition,
    relative_entropy,
    stationary_table,
    stirling_remainder,
)
from .weights import SuperlinearWeight, build_superlinear_weight, thresholds_from_tail_masses
from .config import ExperimentConfig, load_config
from .experiments import (
    floor_configuration,
    lln_experiment,
    moment_experiment,
    potential_experiment,
    run_experiment,
)

__all__ = [
    "BdkError",
    "ConstantKernel",
    "LinearCoagulationKernel",
    "PowerLawKernel",
    "TabulatedKernel",
    "activity_for_mass",
    "critical_activity",
    "critical_mass",
    "detailed_balance_coefficients",
    "equilibrium_profile",
    "Configuration",
    "apply_jump",
    "enumerate_states",
    "from_monomers",
    "to_concentrations",
    "PropensityIndex",
    "channel_rates",
    "ensemble",
    "simulate",
    "step",
    "IntegratorConfig",
    "entropy_along_trajectory",
    "fluxes",
    "integrate",
    "rhs",
    "ctmc_stationary_oracle",
    "detailed_balance_check",
    "log_stationary_weight",
    "nonequilibrium_potential",
    "potential_decomposition",
    "relative_entropy",
    "stationary_table",
    "stirling_remainder",
    "SuperlinearWeight",
    "build_superlinear_weight",
    "thresholds_from_tail_masses",
    "ExperimentConfig",
    "load_config",
    "floor_configuration",
    "lln_experiment",
    "moment_experiment",
    "potential_experiment",
    "run_experiment",
]
