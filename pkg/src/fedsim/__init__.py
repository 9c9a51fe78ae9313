"""Virtual-time federated learning simulator with straggler offloading."""

from .config import (
    ClientsConfig,
    ConfigError,
    DatasetConfig,
    ExperimentConfig,
    LatencyConfig,
    PartitionConfig,
    ProfileConfig,
    TrainingConfig,
    echo_dict,
    load_config,
    parse_config,
)
from .data import (
    ClientPartition,
    Dataset,
    PartitionError,
    generate_synthetic,
    partition,
)
from .engine import (
    BatchCursor,
    ClientState,
    DeadlineDrop,
    EventKind,
    EventQueue,
    ExperimentResult,
    ExperimentSummary,
    FedAvg,
    FedNova,
    FedProx,
    FreezeOffload,
    OffloadRecord,
    RoundTrace,
    Strategy,
    Tifl,
    aggregate_fedavg,
    aggregate_fednova,
    build_state,
    evaluate_accuracy,
    execute_offloaded,
    local_train,
    run_experiment,
    run_round,
    select_clients,
)
from .model import (
    Batch,
    ClassifierBlock,
    FeatureBlock,
    Gradients,
    PartitionedModel,
    ShapeError,
    backward_frozen,
    backward_full,
    cross_entropy,
    forward,
    init_model,
    load_checkpoint,
    merge,
    save_checkpoint,
    sgd_step,
    split,
)
from .profiling import (
    DEFAULT_BASE_TIMINGS,
    ClientProfile,
    PhaseTimings,
    measure,
    scale_timings,
)
from .scheduling import (
    OffloadAssignment,
    OffloadSchedule,
    build_schedule,
    find_offload_point,
    mean_completion_time,
    split_sending_receiving,
)
from .similarity import (
    ClassCountSubmission,
    SimilarityMatrix,
    SimilarityOracle,
    histogram_distance,
)

__version__ = "0.1.0"

__all__ = [
    "Batch",
    "BatchCursor",
    "ClassCountSubmission",
    "ClassifierBlock",
    "ClientPartition",
    "ClientProfile",
    "ClientState",
    "ClientsConfig",
    "ConfigError",
    "Dataset",
    "DatasetConfig",
    "DeadlineDrop",
    "DEFAULT_BASE_TIMINGS",
    "EventKind",
    "EventQueue",
    "ExperimentConfig",
    "ExperimentResult",
    "ExperimentSummary",
    "FeatureBlock",
    "FedAvg",
    "FedNova",
    "FedProx",
    "FreezeOffload",
    "Gradients",
    "LatencyConfig",
    "OffloadAssignment",
    "OffloadRecord",
    "OffloadSchedule",
    "PartitionConfig",
    "PartitionError",
    "PartitionedModel",
    "PhaseTimings",
    "ProfileConfig",
    "RoundTrace",
    "ShapeError",
    "SimilarityMatrix",
    "SimilarityOracle",
    "Strategy",
    "Tifl",
    "TrainingConfig",
    "aggregate_fedavg",
    "aggregate_fednova",
    "backward_frozen",
    "backward_full",
    "build_schedule",
    "build_state",
    "cross_entropy",
    "echo_dict",
    "evaluate_accuracy",
    "execute_offloaded",
    "find_offload_point",
    "forward",
    "generate_synthetic",
    "histogram_distance",
    "init_model",
    "load_checkpoint",
    "load_config",
    "local_train",
    "mean_completion_time",
    "measure",
    "merge",
    "parse_config",
    "partition",
    "run_experiment",
    "run_round",
    "save_checkpoint",
    "select_clients",
    "sgd_step",
    "split",
    "split_sending_receiving",
]
