"""Experiment orchestration, configuration and the command-line interface."""

from .config import ConfigError, ExperimentConfig, load_config, parse_config
from .decomposition import assemble_ccz, check_identity, circuit_fidelity
from .experiments import (
    blockade_sweep,
    noise_monte_carlo,
    robustness_sweep,
    run_cccz,
    run_cz_optimization,
    run_decomposition,
    run_gate,
)
from .records import RecordWriter
