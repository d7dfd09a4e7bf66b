"""Likelihood-ratio testing for community structure in sparse two-block graphs."""

from .baselines import BaselineResult, bootstrap_test, spectral_statistic, subgraph_statistic
from .errors import (
    CapacityError,
    DataError,
    DivergenceError,
    DomainError,
    ParameterError,
    ParseError,
    SbmTestError,
)
from .graph import (
    CommunityLabels,
    Graph,
    ModelParams,
    count_cycles,
    induced_subgraph,
    read_edge_list,
    read_labels,
    sample_er,
    sample_sbm,
    write_edge_list,
    write_labels,
)
from .harness import ExperimentConfig, SimulationTable, combination_protocol, mle_ab, run_experiment
from .limitlaw import (
    CriticalValue,
    CriticalValueCache,
    LimitLawSpec,
    PowerLimitInputs,
    build_law,
    critical_value,
    limit_power,
    sample_log_W,
    simulated_power,
)
from .lrtest import (
    EpsilonConfig,
    TestResult,
    default_M,
    exact_Y,
    log_g,
    make_epsilon_config,
    mc_Y,
    run_test,
)
from .rng import stream

__version__ = "0.1.0"

__all__ = [
    "BaselineResult", "CapacityError", "CommunityLabels", "CriticalValue", "CriticalValueCache",
    "DataError", "DivergenceError", "DomainError", "EpsilonConfig", "ExperimentConfig", "Graph",
    "LimitLawSpec", "ModelParams", "ParameterError", "ParseError", "PowerLimitInputs",
    "SbmTestError", "SimulationTable", "TestResult", "bootstrap_test", "build_law",
    "combination_protocol", "count_cycles", "critical_value", "default_M", "exact_Y",
    "induced_subgraph", "limit_power", "log_g", "make_epsilon_config", "mc_Y", "mle_ab",
    "read_edge_list", "read_labels", "run_experiment", "run_test", "sample_er", "sample_log_W",
    "sample_sbm", "simulated_power", "spectral_statistic", "stream", "subgraph_statistic",
    "write_edge_list", "write_labels",
]
