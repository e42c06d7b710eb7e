"""Accuracy metrics computed from an ``AccuracyMatrix``.

All values are percentages. Sessions are 1-based throughout, matching A(i, j).
The generalized accuracy of session i is

    gAcc_i(alpha) = (alpha * r * A(i,1) + sum_{j>=2} A(i,j)) / (alpha * r + i - 1)

with r = |Y_1| / |Y_novel|. Its area over alpha in [0, 1] is the session score;
by default the area is the composite trapezoid on alpha = k / round(r).
"""
import io
import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import (
    AlphaOutOfRange,
    GridTooSmall,
    LayoutMismatch,
    NoNovelTasks,
    SessionOutOfRange,
    UnknownMetric,
)

METRIC_KEYS = ("aacc", "lacc", "tacc", "gacc", "hacc", "novel")
AUC_MODES = ("trapezoid", "exact")


def _row(m, i):
    if not 1 <= i <= m.n_tasks:
        raise SessionOutOfRange(f"session {i} outside 1..{m.n_tasks}")
    return m.rows[i - 1]


def _novel_sum(row):
    s = 0.0
    for v in row[1:]:
        s += v
    return s


def _weighted(row, w):
    # (w * A(i,1) + sum of novel) / (w + i - 1), i >= 2
    return (w * row[0] + _novel_sum(row)) / (w + (len(row) - 1))


def aacc_session(m, i):
    """Class-weighted accuracy over all tasks seen at session i."""
    row = _row(m, i)
    if i == 1:
        return row[0]
    return _weighted(row, 1.0 * m.layout.ratio)


def tacc_session(m, i):
    """Unweighted mean of A(i, 1..i)."""
    row = _row(m, i)
    s = 0.0
    for v in row:
        s += v
    return s / i


def novel_only(m, i):
    row = _row(m, i)
    if i < 2:
        raise NoNovelTasks("session 1 has no novel tasks")
    return _novel_sum(row) / (i - 1)


def gacc_alpha(m, i, alpha):
    """Generalized accuracy of session i at one alpha.

    Session 1 is 0/0 at alpha = 0; it is defined as 0 there and A(1,1) elsewhere.
    """
    alpha = float(alpha)
    if not 0.0 <= alpha <= 1.0:
        raise AlphaOutOfRange(f"alpha={alpha!r} outside [0, 1]")
    row = _row(m, i)
    if i == 1:
        return row[0] if alpha > 0.0 else 0.0
    return _weighted(row, alpha * m.layout.ratio)


def default_grid(layout):
    """round(r) intervals, never fewer than 2."""
    return max(2, int(math.floor(layout.ratio + 0.5)))


def _grid(m, grid_points):
    g = default_grid(m.layout) if grid_points is None else int(grid_points)
    if g < 2:
        raise GridTooSmall(f"grid_points must be >= 2, got {grid_points}")
    return g


def alpha_grid(grid_points):
    return np.arange(grid_points + 1, dtype=np.float64) / grid_points


@dataclass(frozen=True)
class GaccCurve:
    session: int
    alphas: np.ndarray
    values: np.ndarray


def gacc_curves(m, grid_points=None):
    """(alphas, values) with values[i - 1, k] = gAcc_i(alphas[k]) for every session."""
    g = _grid(m, grid_points)
    alphas = alpha_grid(g)
    tri = np.nan_to_num(m.tri(), nan=0.0)
    return alphas, kernels.gacc_values(tri, m.layout.ratio, alphas)


def gacc_curve(m, i, grid_points=None):
    _row(m, i)
    alphas, values = gacc_curves(m, grid_points)
    return GaccCurve(i, alphas, values[i - 1].copy())


def _exact_area(row, ratio):
    # integral_0^1 (a x + b) / (c x + d) dx with d = i - 1 > 0
    a, b, c, d = ratio * row[0], _novel_sum(row), ratio, float(len(row) - 1)
    return a / c + (b * c - a * d) / (c * c) * math.log((c + d) / d)


def gacc_auc(m, i, grid_points=None, mode="trapezoid"):
    """Area under gAcc_i over alpha in [0, 1]."""
    row = _row(m, i)
    if mode == "exact":
        return row[0] if i == 1 else _exact_area(row, m.layout.ratio)
    if mode != "trapezoid":
        raise ValueError(f"mode must be one of {AUC_MODES}")
    _, values = gacc_curves(m, grid_points)
    return float(kernels.trapezoid_rows(values[i - 1:i])[0])


def gacc_auc_all(m, grid_points=None, mode="trapezoid"):
    if mode == "exact":
        return np.array([gacc_auc(m, i, mode="exact") for i in range(1, m.n_tasks + 1)])
    if mode != "trapezoid":
        raise ValueError(f"mode must be one of {AUC_MODES}")
    _, values = gacc_curves(m, grid_points)
    return kernels.trapezoid_rows(values)


def gacc_overall(m, grid_points=None, mode="trapezoid"):
    return float(np.mean(gacc_auc_all(m, grid_points, mode)))


def aacc_overall(m):
    return float(np.mean([aacc_session(m, i) for i in range(1, m.n_tasks + 1)]))


def lacc(m):
    return aacc_session(m, m.n_tasks)


def tacc_overall(m):
    return float(np.mean([tacc_session(m, i) for i in range(1, m.n_tasks + 1)]))


def harmonic_accuracy(base, novel):
    """2ab / (a + b), defined as 0 when a + b == 0."""
    denom = base + novel
    if denom == 0:
        return 0.0
    return 2.0 * base * novel / denom


def hacc(m, i):
    base = _row(m, i)[0]
    return harmonic_accuracy(base, novel_only(m, i))


# ---------------------------------------------------------------------------
# forgetting
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ForgettingBlock:
    """Per-task forgetting figures; NaN marks an undefined ratio.

    ``pd[t-1] = A(t,t) - A(n,t)`` (positive means the task was forgotten),
    ``rpd = pd / A(t,t)``, ``f = max_i A(i,t) - min_i A(i,t)`` over i >= t,
    ``kr[i-1][t-1] = A(i,t) / A(t,t)``.
    """

    pd: tuple
    rpd: tuple
    f: tuple
    kr: tuple


def forgetting_block(m):
    n = m.n_tasks
    pd, rpd, f = [], [], []
    for t in range(1, n + 1):
        first = m.entry(t, t)
        col = [m.entry(i, t) for i in range(t, n + 1)]
        drop = first - m.entry(n, t)
        pd.append(drop)
        rpd.append(drop / first if first != 0 else math.nan)
        f.append(max(col) - min(col))
    kr = []
    for i in range(1, n + 1):
        kr.append(tuple(
            m.entry(i, t) / m.entry(t, t) if m.entry(t, t) != 0 else math.nan
            for t in range(1, i + 1)
        ))
    return ForgettingBlock(tuple(pd), tuple(rpd), tuple(f), tuple(kr))


# ---------------------------------------------------------------------------
# report
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SessionMetrics:
    i: int
    aacc: float
    tacc: float
    novel_only: float  # NaN at session 1
    gacc_auc: float
    hacc: float  # NaN at session 1


@dataclass(frozen=True)
class MetricReport:
    layout: object
    grid_points: int
    per_session: tuple
    aacc: float
    lacc: float
    tacc: float
    gacc: float
    forgetting: ForgettingBlock
    flags: tuple = field(default=())

    def to_dict(self):
        return {
            "layout": self.layout.to_dict(),
            "grid_points": self.grid_points,
            "per_session": [
                {
                    "i": s.i,
                    "aacc": _num(s.aacc),
                    "tacc": _num(s.tacc),
                    "novel_only": _num(s.novel_only),
                    "gacc_auc": _num(s.gacc_auc),
                    "hacc": _num(s.hacc),
                }
                for s in self.per_session
            ],
            "aggregate": {
                "aacc": self.aacc,
                "lacc": self.lacc,
                "tacc": self.tacc,
                "gacc": self.gacc,
            },
            "forgetting": {
                "pd": [_num(v) for v in self.forgetting.pd],
                "rpd": [_num(v) for v in self.forgetting.rpd],
                "f": [_num(v) for v in self.forgetting.f],
                "kr": [[_num(v) for v in row] for row in self.forgetting.kr],
            },
            "flags": list(self.flags),
        }

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, allow_nan=False) + "\n"


def _num(v):
    return None if isinstance(v, float) and math.isnan(v) else v


def evaluate(m, grid_points=None):
    """Compute every metric for ``m`` and bundle them in a ``MetricReport``."""
    g = _grid(m, grid_points)
    aucs = gacc_auc_all(m, g)
    flags = []
    sessions = []
    for i in range(1, m.n_tasks + 1):
        if i == 1:
            nov = h = math.nan
        else:
            nov = novel_only(m, i)
            h = hacc(m, i)
            if m.entry(i, 1) + nov == 0:
                flags.append(f"hacc_zero_denominator:session_{i}")
        sessions.append(SessionMetrics(i, aacc_session(m, i), tacc_session(m, i), nov, float(aucs[i - 1]), h))
    fb = forgetting_block(m)
    for t, v in enumerate(fb.rpd, start=1):
        if math.isnan(v):
            flags.append(f"undefined_ratio:task_{t}")
    return MetricReport(
        layout=m.layout,
        grid_points=g,
        per_session=tuple(sessions),
        aacc=float(np.mean([s.aacc for s in sessions])),
        lacc=sessions[-1].aacc,
        tacc=float(np.mean([s.tacc for s in sessions])),
        gacc=float(np.mean(aucs)),
        forgetting=fb,
        flags=tuple(flags),
    )


def curves_csv(m, grid_points=None):
    """Curve table: header ``alpha,session_1,...,session_n``, one row per alpha."""
    alphas, values = gacc_curves(m, grid_points)
    buf = io.StringIO()
    buf.write(",".join(["alpha"] + [f"session_{i}" for i in range(1, m.n_tasks + 1)]) + "\n")
    for k, a in enumerate(alphas):
        buf.write(",".join([repr(float(a))] + [repr(float(v)) for v in values[:, k]]) + "\n")
    return buf.getvalue()


# ---------------------------------------------------------------------------
# ranking
# ---------------------------------------------------------------------------

def metric_value(m, key, grid_points=None, alpha=None):
    """Scalar summary used for ranking.

    ``hacc`` and ``novel`` average over sessions 2..n. With ``alpha`` given,
    ``gacc`` is the session mean of gAcc_i(alpha) instead of the area.
    """
    if key not in METRIC_KEYS:
        raise UnknownMetric(f"unknown metric {key!r}; expected one of {METRIC_KEYS}")
    if alpha is not None and key != "gacc":
        raise UnknownMetric("alpha only applies to the gacc metric")
    n = m.n_tasks
    if key == "aacc":
        return aacc_overall(m)
    if key == "lacc":
        return lacc(m)
    if key == "tacc":
        return tacc_overall(m)
    if key == "gacc":
        if alpha is None:
            return gacc_overall(m, grid_points)
        return float(np.mean([gacc_alpha(m, i, alpha) for i in range(1, n + 1)]))
    if n < 2:
        raise NoNovelTasks(f"metric {key!r} needs at least two sessions")
    fn = hacc if key == "hacc" else novel_only
    return float(np.mean([fn(m, i) for i in range(2, n + 1)]))


def compare(named, rank_by="gacc", alpha=None, grid_points=None):
    """Rank ``(name, matrix)`` pairs by a metric, descending; ties by name."""
    named = list(named)
    if not named:
        return []
    layout = named[0][1].layout
    for name, m in named:
        if m.layout != layout:
            raise LayoutMismatch(f"{name}: layout {m.layout} differs from {layout}")
    scored = [(name, metric_value(m, rank_by, grid_points, alpha)) for name, m in named]
    return sorted(scored, key=lambda kv: (-kv[1], kv[0]))
