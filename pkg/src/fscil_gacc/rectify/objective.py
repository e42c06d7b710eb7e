"""Combined training objective and multi-branch prediction."""
import math
from dataclasses import dataclass

import numpy as np

from ..errors import DimMismatch, EmptyBatch, EmptyEnsemble
from .losses import cosine_logits, loss_cos, loss_cr, loss_ir_batch, loss_novce, softmax
from .mlp import rectify_backward, rectify_forward


@dataclass(frozen=True)
class LossWeights:
    beta_cos: float = 0.1
    beta_cr: float = 0.5
    beta_ir: float = 1.0

    def __post_init__(self):
        for name in ("beta_cos", "beta_cr", "beta_ir"):
            v = float(getattr(self, name))
            if not math.isfinite(v) or v < 0:
                raise ValueError(f"{name} must be finite and >= 0, got {v}")
            object.__setattr__(self, name, v)


@dataclass
class Batch:
    """Feature pairs fed to one rectifier branch, with their class labels."""

    x_final: np.ndarray
    x_inter: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        self.x_final = np.atleast_2d(np.asarray(self.x_final, dtype=np.float64))
        self.x_inter = np.atleast_2d(np.asarray(self.x_inter, dtype=np.float64))
        self.labels = np.atleast_1d(np.asarray(self.labels, dtype=np.int64))
        if not (self.x_final.shape[0] == self.x_inter.shape[0] == self.labels.shape[0]):
            raise DimMismatch("x_final, x_inter and labels must have the same length")

    def __len__(self):
        return self.labels.shape[0]


def total_loss(batch, protos, params, weights, novel_set=(), cos_as_printed=False):
    """Weighted loss and its gradient w.r.t. every rectifier parameter.

    loss = beta_cos * (L_cos + L_NovCE) + beta_cr * L_CR + beta_ir * L_IR

    L_IR is averaged over unordered pairs in the batch, the rest over samples.
    Returns ``(loss, grads, parts)`` where ``parts`` holds the unweighted terms.
    """
    if len(batch) == 0:
        raise EmptyBatch("total_loss needs at least one sample")
    z, cache = rectify_forward(params, batch.x_final, batch.x_inter)
    l_cos, g_cos = loss_cos(z, batch.x_final, as_printed=cos_as_printed)
    l_nov, g_nov = loss_novce(protos, z, batch.labels, novel_set)
    l_cr, g_cr = loss_cr(protos, z, batch.x_inter)
    l_ir, g_ir = loss_ir_batch(z, batch.x_inter)
    w = weights
    loss = w.beta_cos * (l_cos + l_nov) + w.beta_cr * l_cr + w.beta_ir * l_ir
    dz = w.beta_cos * (g_cos + g_nov) + w.beta_cr * g_cr + w.beta_ir * g_ir
    grads = rectify_backward(params, cache, dz)
    parts = {"cos": l_cos, "novce": l_nov, "cr": l_cr, "ir": l_ir}
    return float(loss), grads, parts


def branch_probabilities(params, protos, x_final, x_inter):
    z, _ = rectify_forward(params, x_final, x_inter)
    return softmax(cosine_logits(protos, z))


def ensemble_predict(branches, protos, x_per_layer, x_final):
    """Average the softmax outputs of several rectifier branches.

    ``branches`` is a list of ``(params, layer)``; ``x_per_layer[layer]`` holds
    that layer's features. Returns ``(probs, predicted_class_ids)``; argmax ties
    go to the lowest prototype index. Single-vector inputs give 1-D outputs.
    """
    if not branches:
        raise EmptyEnsemble("at least one branch is required")
    single = np.asarray(x_final).ndim == 1
    probs = None
    for params, layer in branches:
        p = branch_probabilities(params, protos, x_final, x_per_layer[layer])
        probs = p if probs is None else probs + p
    probs = probs / len(branches)
    pred = np.asarray(protos.class_ids)[np.argmax(probs, axis=1)]
    if single:
        return probs[0], int(pred[0])
    return probs, pred
