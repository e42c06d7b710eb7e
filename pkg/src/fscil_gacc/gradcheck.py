"""Central finite-difference checks for every analytic gradient."""
from dataclasses import dataclass

import numpy as np

from .rectify.losses import PrototypeSet, loss_cos, loss_cr, loss_ir_batch, loss_novce
from .rectify.mlp import init_rectifier, rectify_forward
from .rectify.objective import Batch, LossWeights, total_loss

STEP = 1e-5
TOLERANCE = 1e-4
# below this magnitude the error is measured absolutely
REL_FLOOR = 1e-6
KINK_MARGIN = 1e-3
# pair distances below this sit next to the norm's singularity at zero
MIN_PAIR_DIST = 1e-2


def rel_error(a, b):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    return np.abs(a - b) / np.maximum(np.maximum(np.abs(a), np.abs(b)), REL_FLOOR)


def numeric_grad(f, x, step=STEP):
    """Central differences of scalar ``f`` w.r.t. every entry of ``x`` (in place, restored)."""
    g = np.zeros_like(x)
    for idx in np.ndindex(x.shape):
        orig = x[idx]
        x[idx] = orig + step
        fp = f()
        x[idx] = orig - step
        fm = f()
        x[idx] = orig
        g[idx] = (fp - fm) / (2 * step)
    return g


@dataclass
class CheckResult:
    name: str
    max_rel_error: float
    n_coords: int

    @property
    def passed(self):
        return self.max_rel_error < TOLERANCE


def _near_kink(z, ref):
    dz = np.linalg.norm(z[:, None] - z[None], axis=-1)
    dr = np.linalg.norm(ref[:, None] - ref[None], axis=-1)
    iu = np.triu_indices(len(z), k=1)
    return np.any(np.abs(np.abs(dz[iu] - dr[iu]) - 1.0) < KINK_MARGIN) or np.any(dz[iu] < MIN_PAIR_DIST)


def random_problem(rng):
    """Small random rectifier, prototypes and labelled batch."""
    d = int(rng.integers(3, 6))
    n = int(rng.integers(2, 5))
    n_cls = int(rng.integers(2, 5))
    params = init_rectifier(d, rng)
    # perturb away from the all-zero bias / unit-gain initialization
    for _, a in params.arrays():
        a += 0.3 * rng.standard_normal(a.shape)
    protos = PrototypeSet.from_means(rng.standard_normal((n_cls, d)))
    batch = Batch(rng.standard_normal((n, d)), rng.standard_normal((n, d)), rng.integers(0, n_cls, n))
    novel = set(range(n_cls // 2, n_cls))
    weights = LossWeights(*rng.uniform(0.1, 1.0, 3))
    return params, protos, batch, novel, weights


def check_once(rng):
    """One random configuration; returns a list of CheckResult."""
    while True:
        params, protos, batch, novel, weights = random_problem(rng)
        z, _ = rectify_forward(params, batch.x_final, batch.x_inter)
        if not _near_kink(z, batch.x_inter):
            break
    results = []
    zz = z.copy()

    def add(name, analytic, f):
        num = numeric_grad(f, zz)
        results.append(CheckResult(name, float(rel_error(analytic, num).max()), zz.size))

    add("loss_ir", loss_ir_batch(zz, batch.x_inter)[1], lambda: loss_ir_batch(zz, batch.x_inter)[0])
    add("loss_cr", loss_cr(protos, zz, batch.x_inter)[1], lambda: loss_cr(protos, zz, batch.x_inter)[0])
    add("loss_cos", loss_cos(zz, batch.x_final)[1], lambda: loss_cos(zz, batch.x_final)[0])
    add("loss_cos_as_printed", loss_cos(zz, batch.x_final, True)[1], lambda: loss_cos(zz, batch.x_final, True)[0])
    add("loss_novce", loss_novce(protos, zz, batch.labels, novel)[1],
        lambda: loss_novce(protos, zz, batch.labels, novel)[0])

    _, grads, _ = total_loss(batch, protos, params, weights, novel)
    worst, count = 0.0, 0
    for (name, arr), (_, g) in zip(params.arrays(), grads.arrays()):
        num = numeric_grad(lambda: total_loss(batch, protos, params, weights, novel)[0], arr)
        worst = max(worst, float(rel_error(g, num).max()))
        count += arr.size
    results.append(CheckResult("total_loss_params", worst, count))
    return results


def run_gradcheck(seed=0, n_configs=100):
    """Aggregate worst-case relative error per check over ``n_configs`` random problems."""
    rng = np.random.default_rng(seed)
    summary = {}
    for _ in range(n_configs):
        for r in check_once(rng):
            prev = summary.get(r.name)
            if prev is None:
                summary[r.name] = CheckResult(r.name, r.max_rel_error, r.n_coords)
            else:
                prev.max_rel_error = max(prev.max_rel_error, r.max_rel_error)
                prev.n_coords += r.n_coords
    return list(summary.values())
