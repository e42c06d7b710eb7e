"""Two-layer perceptron blocks and the three-block rectifier.

Each block is ``fc1 -> GELU -> LayerNorm -> fc2``. The rectifier combines

    out = mix(cat(final_block(x_final), inter_block(x_inter)))

with ``final_block, inter_block: d -> d`` and ``mix: 2d -> d``.
Inputs may be single vectors (shape ``(d,)``) or batches (shape ``(n, d)``).
"""
import json
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

from ..errors import DimMismatch

LN_EPS = 1e-5
BLOCK_NAMES = ("final", "inter", "mix")
PARAM_NAMES = ("fc1_weight", "fc1_bias", "ln_gain", "ln_shift", "fc2_weight", "fc2_bias")
SNAPSHOT_FORMAT = "fscil-gacc-rectifier/1"

_INV_SQRT_2PI = 1.0 / np.sqrt(2.0 * np.pi)


def gelu(x):
    """Exact (erf-based) GELU."""
    return x * ndtr(x)


def gelu_grad(x):
    return ndtr(x) + x * _INV_SQRT_2PI * np.exp(-0.5 * x * x)


@dataclass
class Block:
    fc1_weight: np.ndarray  # (hidden, in)
    fc1_bias: np.ndarray
    ln_gain: np.ndarray
    ln_shift: np.ndarray
    fc2_weight: np.ndarray  # (out, hidden)
    fc2_bias: np.ndarray

    @property
    def in_dim(self):
        return self.fc1_weight.shape[1]

    @property
    def out_dim(self):
        return self.fc2_weight.shape[0]

    def arrays(self):
        return [getattr(self, name) for name in PARAM_NAMES]

    @classmethod
    def zeros_like(cls, other):
        return cls(*[np.zeros_like(a) for a in other.arrays()])

    @classmethod
    def init(cls, in_dim, hidden, out_dim, rng):
        lim1 = 1.0 / np.sqrt(in_dim)
        lim2 = 1.0 / np.sqrt(hidden)
        return cls(
            rng.uniform(-lim1, lim1, size=(hidden, in_dim)),
            np.zeros(hidden),
            np.ones(hidden),
            np.zeros(hidden),
            rng.uniform(-lim2, lim2, size=(out_dim, hidden)),
            np.zeros(out_dim),
        )


def block_forward(blk, x):
    h = x @ blk.fc1_weight.T + blk.fc1_bias
    a = gelu(h)
    mu = a.mean(axis=1, keepdims=True)
    std = np.sqrt(a.var(axis=1, keepdims=True) + LN_EPS)
    xhat = (a - mu) / std
    y = blk.ln_gain * xhat + blk.ln_shift
    out = y @ blk.fc2_weight.T + blk.fc2_bias
    return out, (x, h, xhat, std, y)


def block_backward(blk, cache, dout):
    x, h, xhat, std, y = cache
    dy = dout @ blk.fc2_weight
    dxhat = dy * blk.ln_gain
    da = (dxhat - dxhat.mean(axis=1, keepdims=True)
          - xhat * (dxhat * xhat).mean(axis=1, keepdims=True)) / std
    dh = da * gelu_grad(h)
    grads = Block(
        dh.T @ x,
        dh.sum(axis=0),
        (dy * xhat).sum(axis=0),
        dy.sum(axis=0),
        dout.T @ y,
        dout.sum(axis=0),
    )
    return dh @ blk.fc1_weight, grads


@dataclass
class RectifierParams:
    final: Block
    inter: Block
    mix: Block

    @property
    def dim(self):
        return self.mix.out_dim

    def blocks(self):
        return [(name, getattr(self, name)) for name in BLOCK_NAMES]

    def arrays(self):
        """Flat list of (qualified name, array) in a fixed order."""
        return [(f"{bname}.{pname}", getattr(blk, pname))
                for bname, blk in self.blocks() for pname in PARAM_NAMES]

    def copy(self):
        return RectifierParams(*[Block(*[a.copy() for a in blk.arrays()]) for _, blk in self.blocks()])

    def zeros_like(self):
        return RectifierParams(*[Block.zeros_like(blk) for _, blk in self.blocks()])

    def apply_gradient(self, grads, step):
        """In-place gradient-descent update."""
        for (_, p), (_, g) in zip(self.arrays(), grads.arrays()):
            p -= step * g

    def n_params(self):
        return sum(a.size for _, a in self.arrays())

    def to_json(self):
        blocks = {}
        for bname, blk in self.blocks():
            blocks[bname] = {
                pname: {"shape": list(getattr(blk, pname).shape),
                        "data": getattr(blk, pname).ravel().tolist()}
                for pname in PARAM_NAMES
            }
        return json.dumps({"format": SNAPSHOT_FORMAT, "dim": self.dim, "blocks": blocks}) + "\n"

    @classmethod
    def from_json(cls, text):
        obj = json.loads(text)
        if obj.get("format") != SNAPSHOT_FORMAT:
            raise ValueError(f"unsupported snapshot format {obj.get('format')!r}")
        blocks = []
        for bname in BLOCK_NAMES:
            entries = obj["blocks"][bname]
            blocks.append(Block(*[
                np.asarray(entries[p]["data"], dtype=np.float64).reshape(entries[p]["shape"])
                for p in PARAM_NAMES
            ]))
        return cls(*blocks)


def init_rectifier(dim, rng=None):
    """Uniform(+-1/sqrt(fan_in)) weights, zero biases, unit LayerNorm gain."""
    rng = np.random.default_rng(rng)
    return RectifierParams(
        Block.init(dim, dim, dim, rng),
        Block.init(dim, dim, dim, rng),
        # mix: first affine 2d -> d, second d -> d
        Block.init(2 * dim, dim, dim, rng),
    )


def _as_batch(x, d, name):
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    x2 = x[None, :] if single else x
    if x2.ndim != 2 or x2.shape[1] != d:
        raise DimMismatch(f"{name} has shape {x.shape}, expected (..., {d})")
    return x2, single


def rectify_forward(params, x_final, x_inter):
    """Batched forward pass; returns (rectified (n, d), cache)."""
    d = params.final.in_dim
    xf, _ = _as_batch(x_final, d, "x_final")
    xi, _ = _as_batch(x_inter, params.inter.in_dim, "x_inter")
    if xf.shape[0] != xi.shape[0]:
        raise DimMismatch(f"batch sizes differ: {xf.shape[0]} vs {xi.shape[0]}")
    hf, cf = block_forward(params.final, xf)
    hi, ci = block_forward(params.inter, xi)
    out, cm = block_forward(params.mix, np.concatenate([hf, hi], axis=1))
    return out, (cf, ci, cm, hf.shape[1])


def rectify_backward(params, cache, dout):
    """Parameter gradients given d(loss)/d(rectified)."""
    cf, ci, cm, split = cache
    dcat, gmix = block_backward(params.mix, cm, dout)
    _, gfinal = block_backward(params.final, cf, dcat[:, :split])
    _, ginter = block_backward(params.inter, ci, dcat[:, split:])
    return RectifierParams(gfinal, ginter, gmix)


def rectify(params, x_final, x_inter):
    """Rectified feature(s) for a single pair or a batch of pairs."""
    single = np.asarray(x_final).ndim == 1
    out, _ = rectify_forward(params, x_final, x_inter)
    return out[0] if single else out
