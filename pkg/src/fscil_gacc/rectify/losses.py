"""Cosine classifier and the rectification losses with analytic gradients.

Batched functions take ``(n, d)`` arrays, return the mean loss over rows and
the gradient of that mean w.r.t. the rectified features. Single-vector inputs
give a scalar loss and a ``(d,)`` gradient.
"""
from dataclasses import dataclass

import numpy as np

from .. import kernels
from ..errors import DimMismatch, UnknownClass, ZeroVector

PROTO_NORM_TOL = 1e-9


@dataclass(frozen=True)
class PrototypeSet:
    """Unit-norm class prototypes stored row-wise: ``vectors[k]`` is class ``class_ids[k]``."""

    vectors: np.ndarray
    class_ids: tuple

    def __post_init__(self):
        v = np.asarray(self.vectors, dtype=np.float64)
        if v.ndim != 2 or v.shape[0] < 1:
            raise DimMismatch("prototypes must be a non-empty (|Y|, d) array")
        if len(self.class_ids) != v.shape[0]:
            raise DimMismatch("one class id per prototype required")
        if np.any(np.abs(np.linalg.norm(v, axis=1) - 1.0) > PROTO_NORM_TOL):
            raise ValueError("prototype rows must have unit norm")
        object.__setattr__(self, "vectors", v)
        object.__setattr__(self, "class_ids", tuple(int(c) for c in self.class_ids))
        object.__setattr__(self, "_index", {c: k for k, c in enumerate(self.class_ids)})

    @classmethod
    def from_means(cls, means, class_ids=None):
        means = np.atleast_2d(np.asarray(means, dtype=np.float64))
        ids = range(means.shape[0]) if class_ids is None else class_ids
        return cls(l2_normalize(means), tuple(ids))

    @property
    def dim(self):
        return self.vectors.shape[1]

    def __len__(self):
        return self.vectors.shape[0]

    def index_of(self, cls):
        try:
            return self._index[int(cls)]
        except KeyError:
            raise UnknownClass(f"class {cls} has no prototype") from None

    def extended(self, means, class_ids):
        new = PrototypeSet.from_means(means, class_ids)
        return PrototypeSet(np.vstack([self.vectors, new.vectors]), self.class_ids + new.class_ids)


def _batch(x, d=None):
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    x2 = x[None, :] if single else x
    if d is not None and x2.shape[-1] != d:
        raise DimMismatch(f"feature dim {x2.shape[-1]} != {d}")
    return x2, single


def _unbatch(g, single):
    return g[0] if single else g


def l2_normalize(x):
    """Unit-normalize a vector or each row of a matrix."""
    x2, single = _batch(x)
    norms = np.linalg.norm(x2, axis=1, keepdims=True)
    if np.any(norms == 0.0):
        raise ZeroVector("cannot normalize a zero vector")
    return _unbatch(x2 / norms, single)


def _normalize_backward(xhat, norms, g):
    # d(x/|x|)^T g = (g - xhat (xhat . g)) / |x|
    return (g - xhat * np.sum(xhat * g, axis=1, keepdims=True)) / norms


def cosine_logits(protos, x):
    x2, single = _batch(x, protos.dim)
    return _unbatch(l2_normalize(x2) @ protos.vectors.T, single)


def softmax(s):
    s = np.asarray(s, dtype=np.float64)
    e = np.exp(s - s.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


def log_softmax(s):
    s = np.asarray(s, dtype=np.float64)
    shifted = s - s.max(axis=-1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


def _logits_with_cache(protos, z):
    norms = np.linalg.norm(z, axis=1, keepdims=True)
    if np.any(norms == 0.0):
        raise ZeroVector("cannot normalize a zero vector")
    zhat = z / norms
    return zhat @ protos.vectors.T, zhat, norms


def _logit_backward(protos, zhat, norms, dlogits):
    return _normalize_backward(zhat, norms, dlogits @ protos.vectors)


def smooth_l1(r):
    """Huber-style smooth L1 with threshold 1."""
    r = np.asarray(r, dtype=np.float64)
    a = np.abs(r)
    return np.where(a < 1.0, 0.5 * r * r, a - 0.5)


def loss_ir(z1, z2, l1, l2):
    """Instance-relation loss for one pair.

    smoothL1(|z1 - z2| - |l1 - l2|); returns (loss, (grad_z1, grad_z2)).
    """
    z = np.vstack([np.asarray(z1, float), np.asarray(z2, float)])
    ref = np.vstack([np.asarray(l1, float), np.asarray(l2, float)])
    if z.shape != ref.shape:
        raise DimMismatch(f"rectified {z.shape} vs intermediate {ref.shape}")
    loss, grad, _ = kernels.ir_pairwise(z, ref)
    return loss, (grad[0], grad[1])


def loss_ir_batch(z, ref):
    """Mean instance-relation loss over all unordered pairs of the batch."""
    z = np.asarray(z, dtype=np.float64)
    ref = np.asarray(ref, dtype=np.float64)
    if z.shape != ref.shape:
        raise DimMismatch(f"rectified {z.shape} vs intermediate {ref.shape}")
    total, grad, pairs = kernels.ir_pairwise(z, ref)
    if pairs == 0:
        return 0.0, np.zeros_like(z)
    return total / pairs, grad / pairs


def loss_cr(protos, z, x_inter):
    """KL(softmax(P^T zhat) || softmax(P^T xhat_inter)); the intermediate side is constant."""
    z2, single = _batch(z, protos.dim)
    xi, _ = _batch(x_inter, protos.dim)
    if xi.shape != z2.shape:
        raise DimMismatch(f"rectified {z2.shape} vs intermediate {xi.shape}")
    s, zhat, norms = _logits_with_cache(protos, z2)
    logp = log_softmax(s)
    logq = log_softmax(cosine_logits(protos, xi))
    p = np.exp(logp)
    diff = logp - logq
    per = np.sum(p * diff, axis=1)
    n = z2.shape[0]
    # d KL / d s_j = p_j (log p_j - log q_j - KL)
    ds = p * (diff - per[:, None]) / n
    grad = _logit_backward(protos, zhat, norms, ds)
    return float(per.mean()), _unbatch(grad, single)


def loss_cos(z, x_final, as_printed=False):
    """1 - cos(z, x_final), or the raw cosine when ``as_printed``."""
    z2, single = _batch(z)
    xf, _ = _batch(x_final, z2.shape[1])
    if xf.shape != z2.shape:
        raise DimMismatch(f"rectified {z2.shape} vs final {xf.shape}")
    zn = np.linalg.norm(z2, axis=1, keepdims=True)
    fn = np.linalg.norm(xf, axis=1, keepdims=True)
    if np.any(zn == 0.0) or np.any(fn == 0.0):
        raise ZeroVector("cosine of a zero vector")
    zhat, fhat = z2 / zn, xf / fn
    cos = np.sum(zhat * fhat, axis=1)
    dcos = (fhat - zhat * cos[:, None]) / zn
    n = z2.shape[0]
    if as_printed:
        return float(cos.mean()), _unbatch(dcos / n, single)
    return float((1.0 - cos).mean()), _unbatch(-dcos / n, single)


def loss_novce(protos, z, y, novel_set):
    """Cross-entropy on cosine logits, gated to labels in ``novel_set``.

    Rows whose label is not novel contribute exactly 0 and no gradient, but
    still count in the mean over rows.
    """
    z2, single = _batch(z, protos.dim)
    labels = np.atleast_1d(np.asarray(y))
    if labels.shape[0] != z2.shape[0]:
        raise DimMismatch("one label per feature row required")
    idx = np.array([protos.index_of(c) for c in labels], dtype=np.int64)
    novel = set(int(c) for c in novel_set)
    gate = np.array([int(c) in novel for c in labels])
    n = z2.shape[0]
    if not gate.any():
        return 0.0, _unbatch(np.zeros_like(z2), single)
    s, zhat, norms = _logits_with_cache(protos, z2)
    logp = log_softmax(s)
    rows = np.arange(n)
    per = np.where(gate, -logp[rows, idx], 0.0)
    ds = np.exp(logp)
    ds[rows, idx] -= 1.0
    ds *= gate[:, None] / n
    grad = _logit_backward(protos, zhat, norms, ds)
    return float(per.sum() / n), _unbatch(grad, single)
