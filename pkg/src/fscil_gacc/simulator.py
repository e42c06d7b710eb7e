"""Seedable synthetic FSCIL environment in feature space.

A frozen backbone is replaced by closed-form per-layer feature generators.
Every class owns a random unit direction. At layer ``l`` a sample of class c is

    center_l(c) + N(0, (sigma_l^2 / d) I)

where base classes sit on their own direction and novel classes are pulled
towards the nearest base direction: ``center_l(c) = (1 - g_l) mu_c + g_l mu_nb(c)``.
A large shrinkage ``g`` at the final layer reproduces the observation that the
last layer fits base classes tightly but collapses unseen ones, while
intermediate layers stay more discriminative for novel classes.
"""
import json
import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import kernels
from .errors import BadConfig, NonFiniteLoss
from .metrics import evaluate
from .rectify.gaussian import fit_gaussian, novel_covariance, sample_gaussian
from .rectify.losses import PrototypeSet, cosine_logits, softmax
from .rectify.mlp import init_rectifier, rectify_forward
from .rectify.objective import Batch, LossWeights, total_loss
from .task_matrix import AccuracyMatrix, TaskLayout

DEFAULT_LAYERS = (8, 9, 10, 12)
DEFAULT_NOISE = {8: 1.5, 9: 1.3, 10: 1.1, 12: 0.5}
DEFAULT_SHRINKAGE = {8: 0.15, 9: 0.25, 10: 0.35, 12: 0.85}


def _layer_map(value, layers, name):
    if isinstance(value, (int, float)):
        return {l: float(value) for l in layers}
    out = {int(k): float(v) for k, v in dict(value).items()}
    missing = [l for l in layers if l not in out]
    if missing:
        raise BadConfig(f"{name} missing layers {missing}")
    return {l: out[l] for l in layers}


@dataclass(frozen=True)
class ScenarioConfig:
    layout: TaskLayout = TaskLayout(9, 60, 5, 5)
    dim: int = 32
    layers: tuple = DEFAULT_LAYERS
    noise: dict = field(default_factory=lambda: dict(DEFAULT_NOISE))
    shrinkage: dict = field(default_factory=lambda: dict(DEFAULT_SHRINKAGE))
    train_per_class: int = 40
    test_per_class: int = 30
    seed: int = 0

    def __post_init__(self):
        layers = tuple(int(l) for l in self.layers)
        if len(layers) < 1 or len(set(layers)) != len(layers):
            raise BadConfig("layers must be a non-empty list of distinct ids")
        object.__setattr__(self, "layers", layers)
        object.__setattr__(self, "noise", _layer_map(self.noise, layers, "noise"))
        object.__setattr__(self, "shrinkage", _layer_map(self.shrinkage, layers, "shrinkage"))
        for l in layers:
            if not self.noise[l] > 0 or not math.isfinite(self.noise[l]):
                raise BadConfig(f"noise for layer {l} must be > 0")
            if not 0.0 <= self.shrinkage[l] <= 1.0:
                raise BadConfig(f"shrinkage for layer {l} must lie in [0, 1]")
        gf = self.shrinkage[self.final_layer]
        if any(self.shrinkage[l] > gf for l in self.intermediate_layers):
            raise BadConfig("final-layer shrinkage must not be below an intermediate layer's")
        for name in ("dim", "train_per_class", "test_per_class"):
            if int(getattr(self, name)) < 1:
                raise BadConfig(f"{name} must be positive")
        if self.train_per_class < 2:
            raise BadConfig("train_per_class must be >= 2 to fit Gaussians")
        if self.layout.n_tasks > 1 and self.layout.shots < 2:
            raise BadConfig("shots must be >= 2 to fit novel means")

    @property
    def final_layer(self):
        return self.layers[-1]

    @property
    def intermediate_layers(self):
        return self.layers[:-1]

    def to_dict(self):
        lay = self.layout
        return {
            "layout": {**lay.to_dict(), "shots": lay.shots},
            "dim": self.dim,
            "layers": list(self.layers),
            "noise": {str(l): v for l, v in self.noise.items()},
            "shrinkage": {str(l): v for l, v in self.shrinkage.items()},
            "train_per_class": self.train_per_class,
            "test_per_class": self.test_per_class,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, obj):
        known = {"layout", "dim", "layers", "noise", "shrinkage", "train_per_class", "test_per_class", "seed"}
        unknown = set(obj) - known
        if unknown:
            raise BadConfig(f"unknown scenario fields {sorted(unknown)}")
        kw = dict(obj)
        if "layout" in kw:
            lay = kw["layout"]
            kw["layout"] = TaskLayout(lay["n_tasks"], lay["base_classes"], lay["novel_classes"], lay.get("shots", 5))
        try:
            return cls(**kw)
        except (TypeError, KeyError) as exc:
            raise BadConfig(str(exc)) from None


@dataclass(frozen=True)
class TrainingConfig:
    base_epochs: int = 4
    incremental_epochs: int = 10
    step_size: float = 0.05
    batch_size: int = 64
    replay_per_class: int = 5
    top_k: int = 2
    cos_as_printed: bool = False
    refresh_prototypes: bool = True
    prototype_samples: int = 50

    def __post_init__(self):
        if self.base_epochs < 0 or self.incremental_epochs < 0:
            raise BadConfig("epochs must be >= 0")
        if not self.step_size > 0 or self.batch_size < 1 or self.replay_per_class < 0 or self.top_k < 1:
            raise BadConfig("invalid training configuration")

    @classmethod
    def from_dict(cls, obj):
        try:
            return cls(**obj)
        except TypeError as exc:
            raise BadConfig(str(exc)) from None


def load_config(path):
    """Read a scenario JSON; optional ``training`` and ``weights`` sections are split off."""
    with open(path, encoding="utf-8") as fh:
        obj = json.load(fh)
    training = TrainingConfig.from_dict(obj.pop("training", {}))
    weights = LossWeights(**obj.pop("weights", {}))
    return ScenarioConfig.from_dict(obj), training, weights


# ---------------------------------------------------------------------------
# scenario generation
# ---------------------------------------------------------------------------

@dataclass
class Scenario:
    cfg: ScenarioConfig
    means: np.ndarray  # (n_classes, d) unit directions
    nearest_base: np.ndarray  # per class; base classes point to themselves
    train_x: dict  # layer -> (n, d)
    train_y: np.ndarray
    test_x: dict
    test_y: np.ndarray

    def centers(self, layer):
        g = self.cfg.shrinkage[layer]
        nb = self.means[self.nearest_base]
        is_novel = np.arange(len(self.means)) >= self.cfg.layout.base_classes
        return np.where(is_novel[:, None], (1 - g) * self.means + g * nb, self.means)


def _rngs(seed, n):
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(n)]


def generate_scenario(cfg):
    """Per-layer train and test feature populations, deterministic in ``cfg.seed``."""
    if not isinstance(cfg, ScenarioConfig):
        raise BadConfig("expected a ScenarioConfig")
    lay = cfg.layout
    n_cls = lay.total_classes
    rng_means, rng_noise = _rngs(cfg.seed, 2)
    means = rng_means.standard_normal((n_cls, cfg.dim))
    means /= np.linalg.norm(means, axis=1, keepdims=True)
    base = means[: lay.base_classes]
    nearest = np.arange(n_cls)
    if n_cls > lay.base_classes:
        sims = means[lay.base_classes:] @ base.T
        nearest[lay.base_classes:] = np.argmax(sims, axis=1)
    train_counts = np.array([cfg.train_per_class if c < lay.base_classes else lay.shots for c in range(n_cls)])
    train_y = np.repeat(np.arange(n_cls), train_counts)
    test_y = np.repeat(np.arange(n_cls), cfg.test_per_class)
    scen = Scenario(cfg, means, nearest, {}, train_y, {}, test_y)
    scale = 1.0 / math.sqrt(cfg.dim)
    for layer in cfg.layers:
        centers = scen.centers(layer)
        sd = cfg.noise[layer] * scale
        scen.train_x[layer] = centers[train_y] + sd * rng_noise.standard_normal((len(train_y), cfg.dim))
        scen.test_x[layer] = centers[test_y] + sd * rng_noise.standard_normal((len(test_y), cfg.dim))
    return scen


# ---------------------------------------------------------------------------
# evaluation helpers
# ---------------------------------------------------------------------------

def _task_accuracy(pred, y, layout, session):
    row = []
    for task in range(1, session + 1):
        cls = layout.task_classes(task)
        mask = (y >= cls.start) & (y < cls.stop)
        row.append(100.0 * float(np.mean(pred[mask] == y[mask])))
    return row


def _seen_mask(y, layout, session):
    return y < layout.classes_seen(session)


def _class_means(x, y, classes):
    return np.array([x[y == c].mean(axis=0) for c in classes])


def run_baseline(cfg, layer=None, scenario=None):
    """Frozen-feature nearest-class-mean cosine classifier.

    Prototypes are base-class train means, extended each session by the mean of
    the novel shots. ``layer`` defaults to the final layer.
    """
    scen = scenario or generate_scenario(cfg)
    layer = cfg.final_layer if layer is None else layer
    if layer not in cfg.layers:
        raise BadConfig(f"layer {layer} is not simulated")
    lay = cfg.layout
    x_tr, x_te = scen.train_x[layer], scen.test_x[layer]
    protos = PrototypeSet.from_means(_class_means(x_tr, scen.train_y, lay.task_classes(1)), lay.task_classes(1))
    rows = []
    for session in range(1, lay.n_tasks + 1):
        if session > 1:
            new = lay.task_classes(session)
            protos = protos.extended(_class_means(x_tr, scen.train_y, new), new)
        seen = _seen_mask(scen.test_y, lay, session)
        pred = np.asarray(protos.class_ids)[kernels.cosine_argmax(protos.vectors, x_te[seen])]
        rows.append(_task_accuracy(pred, scen.test_y[seen], lay, session))
    return AccuracyMatrix(lay, rows)


# ---------------------------------------------------------------------------
# feature rectification across sessions
# ---------------------------------------------------------------------------

@dataclass
class BranchState:
    layer: int
    params: object
    protos: PrototypeSet = None


@dataclass
class SessionState:
    session: int
    branches: list
    gaussians: dict  # (class, layer) -> ClassGaussian

    def prototype_counts(self):
        return [len(b.protos) for b in self.branches]


@dataclass
class FRResult:
    per_branch: dict  # layer -> AccuracyMatrix
    ensemble: AccuracyMatrix
    state: SessionState
    history: list  # mean loss per (session, epoch)


def _rectified_means(params, xf, xl, y, classes):
    z, _ = rectify_forward(params, xf, xl)
    return _class_means(z, y, classes)


def _train_epochs(branch, batch_fn, protos, weights, training, epochs, novel_set, rng, history, tag):
    for epoch in range(epochs):
        xf, xl, y = batch_fn(epoch)
        order = rng.permutation(len(y))
        losses = []
        for start in range(0, len(order), training.batch_size):
            idx = order[start:start + training.batch_size]
            loss, grads, _ = total_loss(Batch(xf[idx], xl[idx], y[idx]), protos, branch.params, weights,
                                        novel_set, cos_as_printed=training.cos_as_printed)
            if not math.isfinite(loss):
                raise NonFiniteLoss(f"loss diverged at {tag} epoch {epoch}")
            branch.params.apply_gradient(grads, training.step_size)
            losses.append(loss)
        history.append((tag, branch.layer, epoch, float(np.mean(losses)) if losses else 0.0))


def run_fr(cfg, weights=None, training=None, scenario=None):
    """Train one rectifier per intermediate layer across all sessions.

    Returns an ``FRResult`` with one accuracy matrix per branch and one for the
    softmax-averaged ensemble.
    """
    weights = weights or LossWeights()
    training = training or TrainingConfig()
    if not cfg.intermediate_layers:
        raise BadConfig("at least one intermediate layer is required")
    scen = scenario or generate_scenario(cfg)
    lay = cfg.layout
    fl = cfg.final_layer
    inter = cfg.intermediate_layers
    init_rngs = _rngs([cfg.seed, 1], len(inter))
    train_rng, replay_rng, proto_rng = _rngs([cfg.seed, 2], 3)
    history = []
    y_tr = scen.train_y
    xf_tr = scen.train_x[fl]

    base_cls = lay.task_classes(1)
    base_mask = y_tr < lay.base_classes
    final_protos = PrototypeSet.from_means(_class_means(xf_tr, y_tr, base_cls), base_cls)
    branches = [BranchState(l, init_rectifier(cfg.dim, r)) for l, r in zip(inter, init_rngs)]

    # base-class Gaussians at every layer
    gaussians = {}
    for layer in cfg.layers:
        for c in base_cls:
            gaussians[(c, layer)] = fit_gaussian(scen.train_x[layer][y_tr == c], c, layer)

    # base session: all base training data, novel CE inactive
    for b in branches:
        xl = scen.train_x[b.layer]
        data = (xf_tr[base_mask], xl[base_mask], y_tr[base_mask])
        _train_epochs(b, lambda _e, data=data: data, final_protos, weights, training,
                      training.base_epochs, (), train_rng, history, "session_1")
        b.protos = PrototypeSet.from_means(
            _rectified_means(b.params, *data, base_cls), base_cls)

    state = SessionState(1, branches, gaussians)
    per_branch_rows = {b.layer: [] for b in branches}
    ens_rows = []

    def evaluate_session(session):
        seen = _seen_mask(scen.test_y, lay, session)
        y = scen.test_y[seen]
        xf = scen.test_x[fl][seen]
        probs = None
        for b in branches:
            z, _ = rectify_forward(b.params, xf, scen.test_x[b.layer][seen])
            ids = np.asarray(b.protos.class_ids)
            per_branch_rows[b.layer].append(_task_accuracy(ids[kernels.cosine_argmax(b.protos.vectors, z)], y, lay, session))
            p = softmax(cosine_logits(b.protos, z))
            probs = p if probs is None else probs + p
        probs /= len(branches)
        pred = np.asarray(branches[0].protos.class_ids)[np.argmax(probs, axis=1)]
        ens_rows.append(_task_accuracy(pred, y, lay, session))

    evaluate_session(1)
    novel_seen = []
    for session in range(2, lay.n_tasks + 1):
        new = list(lay.task_classes(session))
        novel_seen.extend(new)
        shot_mask = np.isin(y_tr, new)
        shots_y = y_tr[shot_mask]
        # novel Gaussians: shot mean, covariance borrowed from similar base classes
        for layer in cfg.layers:
            base_means = np.array([gaussians[(c, layer)].mean for c in base_cls])
            base_models = [gaussians[(c, layer)] for c in base_cls]
            for c in new:
                shots = scen.train_x[layer][y_tr == c]
                mu = shots.mean(axis=0)
                cov = novel_covariance(mu, base_models, training.top_k, base_means)
                gaussians[(c, layer)] = type(base_models[0])(c, layer, mu, cov)
        old = [c for c in range(lay.classes_seen(session - 1))]
        for b in branches:
            shots_f = xf_tr[shot_mask]
            shots_l = scen.train_x[b.layer][shot_mask]
            b.protos = b.protos.extended(_rectified_means(b.params, shots_f, shots_l, shots_y, new), new)

            def batch_fn(_epoch, b=b, shots_f=shots_f, shots_l=shots_l):
                n = training.replay_per_class
                if n == 0 or not old:
                    return shots_f, shots_l, shots_y
                rf, rl = [], []
                for c in old:
                    rf.append(sample_gaussian(gaussians[(c, fl)], n, replay_rng))
                    rl.append(sample_gaussian(gaussians[(c, b.layer)], n, replay_rng))
                return (np.vstack([shots_f] + rf), np.vstack([shots_l] + rl),
                        np.concatenate([shots_y, np.repeat(old, n)]))

            _train_epochs(b, batch_fn, b.protos, weights, training, training.incremental_epochs,
                          novel_seen, train_rng, history, f"session_{session}")
            # re-derive prototypes with the trained rectifier: shots for the new
            # classes, Gaussian draws for the old ones
            means = _rectified_means(b.params, shots_f, shots_l, shots_y, new)
            if training.refresh_prototypes and old:
                n = training.prototype_samples
                rf = np.vstack([sample_gaussian(gaussians[(c, fl)], n, proto_rng) for c in old])
                rl = np.vstack([sample_gaussian(gaussians[(c, b.layer)], n, proto_rng) for c in old])
                old_means = _rectified_means(b.params, rf, rl, np.repeat(old, n), old)
                b.protos = PrototypeSet.from_means(np.vstack([old_means, means]), old + new)
            else:
                fresh = PrototypeSet.from_means(means, new)
                b.protos = PrototypeSet(np.vstack([b.protos.vectors[: -len(new)], fresh.vectors]),
                                        b.protos.class_ids)
        state.session = session
        evaluate_session(session)

    per_branch = {l: AccuracyMatrix(lay, rows) for l, rows in per_branch_rows.items()}
    return FRResult(per_branch, AccuracyMatrix(lay, ens_rows), state, history)


# ---------------------------------------------------------------------------
# ablations
# ---------------------------------------------------------------------------

def default_grid(cfg):
    """FR off, full loss, each relation loss removed, and every branch alone."""
    cells = [{"fr": False}]
    for cr, ir in ((True, True), (True, False), (False, True), (False, False)):
        cells.append({"fr": True, "cr": cr, "ir": ir, "branch": "ensemble"})
    for l in cfg.intermediate_layers:
        cells.append({"fr": True, "cr": True, "ir": True, "branch": l})
    return cells


def _cell_key(cell):
    return (bool(cell.get("cr", True)), bool(cell.get("ir", True)))


def run_ablation_suite(cfg, grid=None, weights=None, training=None, grid_points=None):
    """One ``MetricReport`` per grid cell; cells sharing a loss setting share a run."""
    weights = weights or LossWeights()
    training = training or TrainingConfig()
    grid = default_grid(cfg) if grid is None else list(grid)
    scen = generate_scenario(cfg)
    runs = {}
    out = []
    for cell in grid:
        if not cell.get("fr", True):
            matrix = run_baseline(cfg, scenario=scen)
        else:
            key = _cell_key(cell)
            if key not in runs:
                w = replace(weights, beta_cr=weights.beta_cr if key[0] else 0.0,
                            beta_ir=weights.beta_ir if key[1] else 0.0)
                runs[key] = run_fr(cfg, w, training, scenario=scen)
            res = runs[key]
            branch = cell.get("branch", "ensemble")
            if branch == "ensemble":
                matrix = res.ensemble
            else:
                if int(branch) not in res.per_branch:
                    raise BadConfig(f"no branch for layer {branch}")
                matrix = res.per_branch[int(branch)]
        out.append({"cell": dict(cell), "matrix": matrix, "report": evaluate(matrix, grid_points)})
    return out


def ablation_table_json(results):
    return json.dumps([{"cell": r["cell"], "report": r["report"].to_dict()} for r in results], indent=2) + "\n"
