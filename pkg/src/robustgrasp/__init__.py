"""Robust losses for learning grasp heads from missing or noisy ground truth."""

from .losses import (
    LabeledBatch,
    LossReport,
    MissingLossConfig,
    NoisyLossConfig,
    UnlabeledBatch,
    ce_supervised,
    combined_missing_loss,
    pseudo_label_loss,
    sce_baseline,
    smoothed_ce,
    smoothed_rce,
    smoothed_unlabeled_loss,
    symmetric_noisy_loss,
)
from .prob_core import (
    argmax_label,
    confidence_gate,
    log_softmax,
    smooth_distribution,
    softmax,
)

__version__ = "0.1.0"
