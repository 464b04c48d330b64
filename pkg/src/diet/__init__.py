"""DIET: unsupervised representation learning with the datum index as target.

A from-scratch float64 training stack: synthetic indexed datasets with tiered
augmentation, an MLP encoder with hand-derived backprop, a bias-free N-output
classifier head with label-smoothed cross-entropy (full or candidate-sampled),
AdamW/SGD with a warmup-cosine schedule, linear-probe evaluation, and an
experiment harness with sweeps, checkpoints, and loss-informativeness reports.
"""

from .config import TrainConfig, config_hash, load_train_config, save_train_config
from .data import (
    AugmentationPolicy,
    IndexedDataset,
    SyntheticSpec,
    augment,
    epoch_batches,
    load_dataset,
    make_dataset,
    make_gaussian_clusters,
    make_patterned_grids,
    save_dataset,
    subsample,
)
from .encoder import MlpEncoder, backward, forward, init_encoder
from .errors import (
    DietError,
    DimensionError,
    DivergenceError,
    FormatError,
    NonFiniteError,
    PolicyError,
    ReportError,
    SpecError,
    TargetError,
)
from .harness import (
    MetricsRecord,
    RunArtifact,
    correlation_report,
    load_checkpoint,
    run_diet,
    run_supervised,
    save_checkpoint,
    sweep,
)
from .head import (
    DietHead,
    head_backward,
    init_head,
    logits,
    sample_candidates,
    sampled_xent,
    xent_smoothed,
)
from .numeric import Matrix, matmul, relu_backward, relu_forward, softmax_rows
from .optim import (
    OptimConfig,
    OptimState,
    TRANSFORMER_PRESET,
    adamw_step,
    init_optim_state,
    lr_at,
    scaled_lr,
    sgd_step,
)
from .probe import (
    ProbeConfig,
    ProbeModel,
    evaluate_probe,
    extract_features,
    fit_probe,
    top1_accuracy,
)
from .rng import RngState, stream

__version__ = "0.1.0"
