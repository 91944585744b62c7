"""
Bell/CHSH Simulation Toolkit

Exact quantum and classical models of the Bell experiment in the CHSH form,
a Monte Carlo simulation of the laboratory protocol, and checks of the local
hidden-variable bound and the normalised partial-trace identity.
"""

# Package metadata
__version__ = "1.0.0"

from bellsim.core import (
    ASPECT_ANGLES,
    TSIRELSON_VALUE,
    LOCAL_BOUND,
    TOLERANCE,
    ExperimentConfig,
    ReportDocument,
    InputError,
    ConfigError,
    ZeroProbabilityConditionError,
    EmptySettingError,
    NumericConsistencyError,
    load_config,
    parse_angle,
    format_angle,
)

from bellsim.quantum_model import (
    SettingPair,
    PVM,
    OutcomeDistribution,
    bell_state,
    joint_pvm,
    local_pvm_A,
    local_pvm_B,
    born_distribution,
    verify_partial_trace_theorem,
)

from bellsim.classical_model import (
    BellMeasure,
    ConditionalQuery,
    bell_measure,
    conditional_probability,
    check_A3_factorization,
    chsh_value_exact,
    corrected_prediction,
)

from bellsim.lhv_bound import (
    DeterministicStrategy,
    LocalModel,
    enumerate_deterministic_strategies,
    chsh_functional,
    local_model_chsh,
    verify_chsh_bound,
    best_local_approximation,
)

from bellsim.monte_carlo import (
    TallyTable,
    CHSHEstimate,
    run_experiment,
    estimate_E,
    estimate_S,
    convergence_sweep,
)

__all__ = [
    # Constants
    'ASPECT_ANGLES',
    'TSIRELSON_VALUE',
    'LOCAL_BOUND',
    'TOLERANCE',
    # Configuration and reports
    'ExperimentConfig',
    'ReportDocument',
    'load_config',
    'parse_angle',
    'format_angle',
    # Errors
    'InputError',
    'ConfigError',
    'ZeroProbabilityConditionError',
    'EmptySettingError',
    'NumericConsistencyError',
    # Quantum model
    'SettingPair',
    'PVM',
    'OutcomeDistribution',
    'bell_state',
    'joint_pvm',
    'local_pvm_A',
    'local_pvm_B',
    'born_distribution',
    'verify_partial_trace_theorem',
    # Classical model
    'BellMeasure',
    'ConditionalQuery',
    'bell_measure',
    'conditional_probability',
    'check_A3_factorization',
    'chsh_value_exact',
    'corrected_prediction',
    # Local hidden variables
    'DeterministicStrategy',
    'LocalModel',
    'enumerate_deterministic_strategies',
    'chsh_functional',
    'local_model_chsh',
    'verify_chsh_bound',
    'best_local_approximation',
    # Monte Carlo
    'TallyTable',
    'CHSHEstimate',
    'run_experiment',
    'estimate_E',
    'estimate_S',
    'convergence_sweep',
]
