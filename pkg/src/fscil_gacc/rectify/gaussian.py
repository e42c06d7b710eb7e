"""Per-class Gaussian feature models for replay."""
from dataclasses import dataclass

import numpy as np

from ..errors import DimMismatch, KTooLarge, NotPSD, TooFewSamples

JITTER = 1e-6
SYMMETRY_TOL = 1e-9
EIG_TOL = -1e-8


@dataclass(frozen=True)
class ClassGaussian:
    class_id: int
    layer: object
    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=np.float64)
        cov = np.asarray(self.cov, dtype=np.float64)
        d = mean.shape[0]
        if mean.ndim != 1 or cov.shape != (d, d):
            raise DimMismatch(f"mean {mean.shape} and covariance {cov.shape} disagree")
        if np.max(np.abs(cov - cov.T), initial=0.0) > SYMMETRY_TOL:
            raise NotPSD("covariance is not symmetric")
        if np.linalg.eigvalsh(cov).min() < EIG_TOL * max(1.0, np.abs(cov).max()):
            raise NotPSD("covariance has negative eigenvalues")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)

    @property
    def dim(self):
        return self.mean.shape[0]


def fit_gaussian(features, class_id=-1, layer=None):
    """Sample mean and unbiased sample covariance of ``features`` (n, d)."""
    x = np.atleast_2d(np.asarray(features, dtype=np.float64))
    if x.shape[0] < 2:
        raise TooFewSamples(f"need at least 2 samples, got {x.shape[0]}")
    cov = np.cov(x, rowvar=False, ddof=1)
    cov = 0.5 * (cov + cov.T)
    return ClassGaussian(class_id, layer, x.mean(axis=0), np.atleast_2d(cov))


def top_k_similar(proto, candidates, k):
    """Indices of the ``k`` rows of ``candidates`` most cosine-similar to ``proto``."""
    cands = np.atleast_2d(np.asarray(candidates, dtype=np.float64))
    if not 1 <= k <= cands.shape[0]:
        raise KTooLarge(f"k={k} but only {cands.shape[0]} base classes")
    p = np.asarray(proto, dtype=np.float64)
    sims = cands @ p / (np.linalg.norm(cands, axis=1) * np.linalg.norm(p))
    return np.argsort(-sims, kind="stable")[:k]


def novel_covariance(proto_novel, base_models, k=2, base_protos=None):
    """Mean covariance of the ``k`` base classes closest in cosine to ``proto_novel``.

    Base prototypes default to the base Gaussians' means.
    """
    if not base_models:
        raise KTooLarge("no base classes available")
    protos = np.array([g.mean for g in base_models]) if base_protos is None else base_protos
    idx = top_k_similar(proto_novel, protos, k)
    return np.mean([base_models[i].cov for i in idx], axis=0)


def sample_gaussian(g, n, seed=None, jitter=JITTER):
    """``n`` draws from N(mean, cov + jitter * I) through a Cholesky factor."""
    rng = np.random.default_rng(seed)
    cov = g.cov + jitter * np.eye(g.dim)
    try:
        chol = np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        raise NotPSD("covariance is not positive definite after jitter") from None
    z = rng.standard_normal((int(n), g.dim))
    return g.mean + z @ chol.T
