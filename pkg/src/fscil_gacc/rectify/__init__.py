"""Feature rectification numerics: rectifier MLPs, losses, Gaussian replay, ensembling."""
from .gaussian import ClassGaussian, fit_gaussian, novel_covariance, sample_gaussian, top_k_similar
from .losses import (
    PrototypeSet,
    cosine_logits,
    l2_normalize,
    log_softmax,
    loss_cos,
    loss_cr,
    loss_ir,
    loss_ir_batch,
    loss_novce,
    smooth_l1,
    softmax,
)
from .mlp import Block, RectifierParams, gelu, init_rectifier, rectify, rectify_backward, rectify_forward
from .objective import Batch, LossWeights, branch_probabilities, ensemble_predict, total_loss

__all__ = [
    "Batch", "Block", "ClassGaussian", "LossWeights", "PrototypeSet", "RectifierParams",
    "branch_probabilities", "cosine_logits", "ensemble_predict", "fit_gaussian", "gelu",
    "init_rectifier", "l2_normalize", "log_softmax", "loss_cos", "loss_cr", "loss_ir",
    "loss_ir_batch", "loss_novce", "novel_covariance", "rectify", "rectify_backward",
    "rectify_forward", "sample_gaussian", "smooth_l1", "softmax", "top_k_similar", "total_loss",
]
