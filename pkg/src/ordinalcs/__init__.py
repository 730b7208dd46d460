"""Cost-sensitive regularization for ordinal grading tasks."""

from ._backend import BACKEND
from .bootstrap import BootstrapResult, paired_bootstrap_test, stratified_resample
from .cost_matrices import OPHTHALMOLOGIST_COUNTS, ast_cost_matrix, quadratic_cost_matrix, row_normalize
from .data_io import Dataset, SynthSpec, gen_synthetic, inject_label_noise, load_csv, save_csv
from .losses import (
    LossHyper,
    LossValue,
    cross_entropy,
    cs_penalty,
    cs_regularized_loss,
    focal_loss,
    gaussian_smooth_label,
    loss_gradient,
    nuls_loss,
    softmax,
)
from .metrics import (
    MetricsReport,
    PredictionSet,
    aca,
    confusion_matrix,
    evaluate,
    hand_till_mauc,
    kendall_tau,
    quadratic_weighted_kappa,
)
from .trainer import Model, TrainConfig, TrainHistory, forward, init_model, lambda_sweep, oversample_indices, train

__version__ = "0.1.0"
