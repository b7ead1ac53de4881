"""ddtime: distill tiny synthetic time-series datasets for forecasting."""

from .config import RunConfig, load_config, parse_config, save_config, serialize_config
from .data import (
    DelimitedFormat,
    RawSeries,
    StandardizationStats,
    WindowedDataset,
    WindowPair,
    load_series,
    make_sinusoid_series,
    sample_windows,
    slide_windows,
    split,
    standardize,
)
from .distill import (
    DistillConfig,
    LogRow,
    conditional_update,
    init_synthetic,
    run_distillation,
)
from .evaluate import EvalReport, StudentTrainConfig, diversity, mae, mse, train_and_eval
from .experts import (
    ExpertTrajectory,
    SegmentSample,
    load_buffer,
    save_buffer,
    sample_segment,
    train_teacher,
)
from .losses import (
    IsibConfig,
    LossBreakdown,
    isib_loss,
    param_match_loss,
    sample_probabilities,
    sym_kl,
    total_loss,
    value_combined,
    value_frequency,
    value_temporal,
)
from .metagrad import (
    SyntheticGradient,
    UnrollTrace,
    backprop_to_synthetic,
    finite_diff_synthetic,
    unroll_student,
)
from .models import (
    AdamState,
    ModelSpec,
    SgdMomentumState,
    adam_step,
    forward,
    init_params,
    loss_and_grad,
    param_sq_distance,
    parameter_count,
    sgd_momentum_step,
)
from .spectral import dft, power_spectrum, spectral_l1
from .synthetic import SyntheticDataset, load_synthetic, save_synthetic

__version__ = "0.1.0"
