"""Co-trained time/frequency view representation learning for noisy time series."""

__version__ = "0.1.0"

from .data import (
    DataError,
    FrequencyView,
    LabeledSubset,
    NoiseSpec,
    TimeSeriesDataset,
    apply_standardization,
    batches,
    compute_frequency_view,
    generate_synthetic,
    inject_noise,
    label_subset,
    load_dataset,
    split,
    standardize,
    write_dataset,
)
from .encoder import (
    EncoderConfig,
    EncoderParams,
    OptimizerState,
    backward,
    concat_views,
    forward,
    forward_augmented,
    init_encoder,
    init_optimizer,
    optimizer_step,
)
from .estimator import CoTrainingEncoder
from .evaluation import (
    EvalReport,
    auroc_macro,
    cluster_nmi,
    evaluate_state,
    extract_embeddings,
    linear_probe,
    nmi,
    robustness_sweep,
    run_ablation,
)
from .losses import LossBreakdown, LossConfig, cot_loss, instance_loss, l2_normalize, total_loss
from .prototypes import (
    PrototypeBank,
    PrototypeWay,
    cross_view_prototypes,
    kmeans,
    moving_average_update,
    refresh_epoch,
    select_cross_prototype,
    semi_supervised_prototypes,
)
from .training import (
    TrainConfig,
    TrainingFailure,
    TrainState,
    checkpoint,
    encode_dataset,
    finetune_transfer,
    restore,
    train,
    train_semi_supervised,
)

__all__ = [
    "__version__",
    # data
    "DataError", "FrequencyView", "LabeledSubset", "NoiseSpec", "TimeSeriesDataset",
    "apply_standardization", "batches", "compute_frequency_view", "generate_synthetic",
    "inject_noise", "label_subset", "load_dataset", "split", "standardize", "write_dataset",
    # encoder
    "EncoderConfig", "EncoderParams", "OptimizerState", "backward", "concat_views",
    "forward", "forward_augmented", "init_encoder", "init_optimizer", "optimizer_step",
    # losses
    "LossBreakdown", "LossConfig", "cot_loss", "instance_loss", "l2_normalize", "total_loss",
    # prototypes
    "PrototypeBank", "PrototypeWay", "cross_view_prototypes", "kmeans",
    "moving_average_update", "refresh_epoch", "select_cross_prototype",
    "semi_supervised_prototypes",
    # training
    "TrainConfig", "TrainingFailure", "TrainState", "checkpoint", "encode_dataset",
    "finetune_transfer", "restore", "train", "train_semi_supervised",
    # evaluation
    "EvalReport", "auroc_macro", "cluster_nmi", "evaluate_state", "extract_embeddings",
    "linear_probe", "nmi", "robustness_sweep", "run_ablation",
    # estimator
    "CoTrainingEncoder",
]
