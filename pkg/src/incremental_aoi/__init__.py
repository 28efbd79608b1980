"""Age-of-information optimal updating for an energy-harvesting sensor with a finite battery."""

from .analytic import (
    EpochExpectations,
    ThresholdSolution,
    expected_epoch,
    p2_closed,
    pattern_sum_oracle,
    reference_constants,
    solve_lambda_star,
    x1_of_lambda,
)
from .engine import EpochRecord, SimResult, simulate, simulate_single_epoch
from .errors import BracketError, DomainError, EnergyCausalityError, IncompatiblePolicyError
from .model import ArrivalStream, SensorState, SystemParams, apply_arrival, apply_update
from .policies import EnergyAware, GeneralThreshold, SingleThreshold, ThresholdB2, Uniform
from .stats import long_run_estimate, renewal_diagnostics

__version__ = "0.1.0"
SCHEMA_VERSION = "1"
