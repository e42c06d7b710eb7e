"""Hot inner loops, each with a numba version and a numpy fallback.

The public names ``gacc_values``, ``trapezoid_rows`` and ``ir_pairwise``
dispatch to numba when it is importable and not disabled through
``FSCIL_GACC_NO_NUMBA``; ``cosine_argmax`` always uses the BLAS matmul. Both variants stay importable under explicit
``*_numpy`` / ``*_numba`` names so tests and the benchmark can compare them.
"""
import numpy as np

from ._accel import HAS_NUMBA, jit


# ---------------------------------------------------------------------------
# generalized accuracy on a grid
# ---------------------------------------------------------------------------

def gacc_values_numpy(tri, ratio, alphas):
    """gAcc_i(alpha) for every session i and every alpha.

    ``tri`` is the n x n lower-triangular accuracy array (upper part ignored).
    Returns an array of shape (n, len(alphas)).
    """
    tri = np.asarray(tri, dtype=np.float64)
    alphas = np.asarray(alphas, dtype=np.float64)
    n = tri.shape[0]
    out = np.empty((n, alphas.shape[0]))
    base = tri[:, 0]
    novel_sum = np.zeros(n)
    for i in range(1, n):
        # sequential left-to-right sum, same order as the scalar path
        novel_sum[i] = np.cumsum(tri[i, 1:i + 1])[-1]
    w = alphas[None, :] * ratio
    counts = np.arange(n, dtype=np.float64)[:, None]
    with np.errstate(invalid="ignore", divide="ignore"):
        out[:] = (w * base[:, None] + novel_sum[:, None]) / (w + counts)
    # session 1: A(1,1) for alpha > 0, 0 at alpha == 0
    out[0] = np.where(alphas > 0.0, base[0], 0.0)
    return out


def _gacc_values_loop(tri, ratio, alphas):
    n = tri.shape[0]
    m = alphas.shape[0]
    out = np.empty((n, m))
    for i in range(n):
        s = 0.0
        for j in range(1, i + 1):
            s += tri[i, j]
        for k in range(m):
            a = alphas[k]
            if i == 0:
                out[i, k] = tri[0, 0] if a > 0.0 else 0.0
            else:
                w = a * ratio
                out[i, k] = (w * tri[i, 0] + s) / (w + i)
    return out


def trapezoid_rows_numpy(values):
    """Composite trapezoid on a uniform grid over [0, 1], row by row."""
    values = np.asarray(values, dtype=np.float64)
    m = values.shape[1] - 1
    interior = np.cumsum(values[:, 1:-1], axis=1)[:, -1] if m > 1 else np.zeros(values.shape[0])
    return (0.5 * values[:, 0] + interior + 0.5 * values[:, -1]) / m


def _trapezoid_rows_loop(values):
    n, p = values.shape
    m = p - 1
    out = np.empty(n)
    for i in range(n):
        s = 0.0
        for k in range(1, m):
            s += values[i, k]
        out[i] = (0.5 * values[i, 0] + s + 0.5 * values[i, m]) / m
    return out


# ---------------------------------------------------------------------------
# instance-relation loss over all unordered pairs
# ---------------------------------------------------------------------------

def ir_pairwise_numpy(z, ref):
    """Sum of smooth-L1(|z_a - z_b| - |ref_a - ref_b|) over pairs a < b.

    Returns (loss_sum, grad_z, n_pairs); the caller divides by n_pairs.
    """
    z = np.asarray(z, dtype=np.float64)
    ref = np.asarray(ref, dtype=np.float64)
    n = z.shape[0]
    if n < 2:
        return 0.0, np.zeros_like(z), 0
    diff = z[:, None, :] - z[None, :, :]
    dist = np.sqrt(np.einsum("abk,abk->ab", diff, diff))
    rdiff = ref[:, None, :] - ref[None, :, :]
    rdist = np.sqrt(np.einsum("abk,abk->ab", rdiff, rdiff))
    res = dist - rdist
    absr = np.abs(res)
    upper = np.triu(np.ones((n, n), dtype=bool), k=1)
    loss = np.where(absr < 1.0, 0.5 * res * res, absr - 0.5)
    loss_sum = float(loss[upper].sum())
    dres = np.where(absr < 1.0, res, np.sign(res))
    with np.errstate(invalid="ignore", divide="ignore"):
        coef = np.where(dist > 0.0, dres / dist, 0.0)
    coef = np.where(upper, coef, 0.0)
    coef = coef + coef.T
    # d/dz_a of dist(a, b) is (z_a - z_b) / dist
    grad = np.einsum("ab,abk->ak", coef, diff)
    return loss_sum, grad, n * (n - 1) // 2


def _ir_pairwise_loop(z, ref):
    n, d = z.shape
    grad = np.zeros((n, d))
    loss = 0.0
    for a in range(n):
        for b in range(a + 1, n):
            dd = 0.0
            rd = 0.0
            for k in range(d):
                t = z[a, k] - z[b, k]
                dd += t * t
                u = ref[a, k] - ref[b, k]
                rd += u * u
            dist = np.sqrt(dd)
            res = dist - np.sqrt(rd)
            if abs(res) < 1.0:
                loss += 0.5 * res * res
                dres = res
            else:
                loss += abs(res) - 0.5
                dres = 1.0 if res > 0 else -1.0
            if dist > 0.0:
                c = dres / dist
                for k in range(d):
                    g = c * (z[a, k] - z[b, k])
                    grad[a, k] += g
                    grad[b, k] -= g
    return loss, grad


# ---------------------------------------------------------------------------
# cosine nearest-prototype prediction
# ---------------------------------------------------------------------------

def cosine_argmax_numpy(protos, x):
    """Index of the most cosine-similar prototype row for every row of x.

    ``protos`` rows are assumed unit-norm. Ties resolve to the lowest index.
    """
    x = np.asarray(x, dtype=np.float64)
    xn = x / np.linalg.norm(x, axis=1, keepdims=True)
    return np.argmax(xn @ np.asarray(protos).T, axis=1)


def _cosine_argmax_loop(protos, x):
    n, d = x.shape
    c = protos.shape[0]
    out = np.empty(n, dtype=np.int64)
    for i in range(n):
        nrm = 0.0
        for k in range(d):
            nrm += x[i, k] * x[i, k]
        nrm = np.sqrt(nrm)
        best = -np.inf
        arg = 0
        for j in range(c):
            s = 0.0
            for k in range(d):
                s += protos[j, k] * x[i, k]
            s /= nrm
            if s > best:
                best = s
                arg = j
        out[i] = arg
    return out


_gacc_jit = jit(_gacc_values_loop)
_trap_jit = jit(_trapezoid_rows_loop)
_ir_jit = jit(_ir_pairwise_loop)
_cos_jit = jit(_cosine_argmax_loop)


def gacc_values_numba(tri, ratio, alphas):
    return _gacc_jit(np.ascontiguousarray(tri, dtype=np.float64), float(ratio),
                     np.ascontiguousarray(alphas, dtype=np.float64))


def trapezoid_rows_numba(values):
    return _trap_jit(np.ascontiguousarray(values, dtype=np.float64))


def ir_pairwise_numba(z, ref):
    z = np.ascontiguousarray(z, dtype=np.float64)
    n = z.shape[0]
    if n < 2:
        return 0.0, np.zeros_like(z), 0
    loss, grad = _ir_jit(z, np.ascontiguousarray(ref, dtype=np.float64))
    return float(loss), grad, n * (n - 1) // 2


def cosine_argmax_numba(protos, x):
    return _cos_jit(np.ascontiguousarray(protos, dtype=np.float64),
                    np.ascontiguousarray(x, dtype=np.float64))


if HAS_NUMBA:
    gacc_values = gacc_values_numba
    trapezoid_rows = trapezoid_rows_numba
    ir_pairwise = ir_pairwise_numba
else:
    gacc_values_numba = trapezoid_rows_numba = ir_pairwise_numba = cosine_argmax_numba = None
    gacc_values = gacc_values_numpy
    trapezoid_rows = trapezoid_rows_numpy
    ir_pairwise = ir_pairwise_numpy
# a BLAS matmul beats the compiled loop here (see benchmarks/bench_kernels.py)
cosine_argmax = cosine_argmax_numpy

BACKEND = "numba" if HAS_NUMBA else "numpy"
