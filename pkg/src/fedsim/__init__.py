"""fedsim: a deterministic federated-learning simulator.

Implements staleness-aware server aggregation (stored-update reuse with
inactive-round weighting and cutoff) alongside six reference strategies,
non-IID label partitioning, Bernoulli/trace client availability, and the
analytics used to compare them (per-client accuracy statistics, Shapley
contributions, paired t-tests).
"""

__version__ = "0.1.0"

from .analysis import (
    AccuracyStats,
    ShapleyReport,
    TTestResult,
    accuracy_stats,
    histogram_pdf,
    paired_t_test,
    shapley,
    staleness_contribution_experiment,
)
from .availability import (
    AvailabilityModel,
    is_available,
    make_stale_trace,
    sample_probabilities,
)
from .data import PartitionPlan, Shard, load_csv, load_idx, shard_two_class, synth_classes, train_test_split
from .engine import ExperimentConfig, ExperimentResult, RoundRecord, Simulation, lr_at, run_experiment
from .errors import (
    CapacityError,
    ConfigurationError,
    DataError,
    FedsimError,
    FormatError,
    PartitionError,
    ProtocolError,
)
from .models import Batch, ModelSpec, accuracy, forward_loss, gradient, init_params, local_sgd, param_count
from .rng import RngStream
from .strategies import (
    STRATEGY_NAMES,
    CutoffSchedule,
    FedAr,
    FedAvg,
    FedAvgIS,
    FedAvgS,
    FedVarp,
    Mifa,
    Scaffold,
    Strategy,
    fedar_weight,
    g_eval,
    make_strategy,
)

__all__ = [
    "AccuracyStats",
    "AvailabilityModel",
    "Batch",
    "CapacityError",
    "ConfigurationError",
    "CutoffSchedule",
    "DataError",
    "ExperimentConfig",
    "ExperimentResult",
    "FedAr",
    "FedAvg",
    "FedAvgIS",
    "FedAvgS",
    "FedVarp",
    "FedsimError",
    "FormatError",
    "Mifa",
    "ModelSpec",
    "PartitionError",
    "PartitionPlan",
    "ProtocolError",
    "RngStream",
    "RoundRecord",
    "Scaffold",
    "Shard",
    "ShapleyReport",
    "Simulation",
    "Strategy",
    "STRATEGY_NAMES",
    "TTestResult",
    "accuracy",
    "accuracy_stats",
    "fedar_weight",
    "forward_loss",
    "g_eval",
    "gradient",
    "histogram_pdf",
    "init_params",
    "is_available",
    "load_csv",
    "load_idx",
    "local_sgd",
    "lr_at",
    "make_stale_trace",
    "make_strategy",
    "paired_t_test",
    "param_count",
    "run_experiment",
    "sample_probabilities",
    "shapley",
    "shard_two_class",
    "staleness_contribution_experiment",
    "synth_classes",
    "train_test_split",
]
