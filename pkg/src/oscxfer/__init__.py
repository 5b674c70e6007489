"""Cascaded-oscillator state transfer: simulation, optimization, circuits.

Two harmonic oscillators exchange a quantum state through a one-way
transmission line; the package computes the state-independent transfer
amplitude, optimizes the sender's time-dependent coupling profile, checks
the commutator sum rules that certify the dynamics stay canonical, and maps
lumped-element circuit parameters onto the model's rates.
"""

from .types import (
    CouplingProfile,
    FidelityReport,
    ParamIssue,
    ProfileKind,
    ProfileSingularityError,
    SystemParams,
    TimeGrid,
    TransferState,
    ValidityWindows,
    profile_value,
    profile_values,
    validate_params,
)
from .oracles import (
    budget_report,
    euler_lagrange_residual,
    fidelity_constant_coupling,
    fidelity_lossy,
    fidelity_optimal,
    infidelity_budget,
    optimal_profile,
    validity_windows,
)
from .simulate import (
    IntegrationError,
    IntegratorConfig,
    Method,
    commutator_check,
    fidelity_curve,
    integrate_transfer,
    integrate_transfer_lossy,
)
from .optimize import (
    OptimizerConfig,
    OptimizerTrace,
    Parametrization,
    functional_gradient,
    functional_value,
    optimize_profile,
    verify_stationarity,
)
from .circuit import (
    CircuitRates,
    CircuitSpec,
    Topology,
    circuit_to_rates,
    rates_to_validity,
)

__version__ = "0.1.0"

__all__ = [
    "SystemParams", "TimeGrid", "ProfileKind", "CouplingProfile",
    "TransferState", "ValidityWindows", "FidelityReport", "ParamIssue",
    "ProfileSingularityError", "validate_params", "profile_value",
    "profile_values",
    "fidelity_constant_coupling", "optimal_profile", "fidelity_optimal",
    "fidelity_lossy", "infidelity_budget", "budget_report",
    "validity_windows", "euler_lagrange_residual",
    "Method", "IntegratorConfig", "IntegrationError", "integrate_transfer",
    "integrate_transfer_lossy", "commutator_check", "fidelity_curve",
    "OptimizerConfig", "OptimizerTrace", "Parametrization",
    "functional_value", "functional_gradient", "optimize_profile",
    "verify_stationarity",
    "Topology", "CircuitSpec", "CircuitRates", "circuit_to_rates",
    "rates_to_validity",
    "__version__",
]
