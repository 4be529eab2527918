"""Bell tests with randomly chosen, unaligned and uncalibrated measurements.

Exact Werner-state correlators, an executable form of the guaranteed-violation
argument for random measurement triads, a model of uncalibrated Mach-Zehnder
phase shifters, and Poissonian photon-counting simulation.
"""
__version__ = "0.1.0"

from randbell._backend import BACKEND
from randbell.chsh import ChshWitness, canonicalize, chsh_max, chsh_value, is_aligned, proof_witness
from randbell.core import (
    BlochVector,
    InvalidInputError,
    MzSettings,
    PhaseShifterCal,
    Triad,
    WernerState,
    correlator,
    correlator_matrix,
    joint_probability,
    mz_measurement_vector,
    mz_unitary_oracle,
    phase_from_voltage,
)
from randbell.experiments import ConfigError, CountsConfig, ExperimentConfig, run_trials
from randbell.sampling import RngStream, random_triad, random_unbiased_pair, random_unit_vector, random_voltages
from randbell.statistics import CountsRecord, NoiseModel, ShiftedBound

__all__ = [
    "BACKEND", "BlochVector", "ChshWitness", "ConfigError", "CountsConfig", "CountsRecord", "ExperimentConfig",
    "InvalidInputError", "MzSettings", "NoiseModel", "PhaseShifterCal", "RngStream", "ShiftedBound", "Triad",
    "WernerState", "canonicalize", "chsh_max", "chsh_value", "correlator", "correlator_matrix", "is_aligned",
    "joint_probability", "mz_measurement_vector", "mz_unitary_oracle", "phase_from_voltage", "proof_witness",
    "random_triad", "random_unbiased_pair", "random_unit_vector", "random_voltages", "run_trials",
]
