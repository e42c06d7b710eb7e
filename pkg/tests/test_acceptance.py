"""Acceptance criteria, each run at its stated tolerance.

Every criterion prints one ``criterion N: PASS|FAIL`` line (also collected in
the pytest terminal summary).
"""
import hashlib
import math
import os
import subprocess
import sys
import time
from pathlib import Path

import numpy as np
import pytest

from conftest import random_matrix, record_criterion
from fscil_gacc import corner_matrix, metrics
from fscil_gacc.gradcheck import TOLERANCE, run_gradcheck
from fscil_gacc.rectify import ClassGaussian, sample_gaussian
from fscil_gacc.rectify.gaussian import JITTER
from fscil_gacc.simulator import ScenarioConfig, run_ablation_suite
from test_metrics import GOLDEN, PRINT_ERRATA

N_RANDOM = 1000
SEEDS = (0, 1, 2, 3, 4)


# ---------------------------------------------------------------- 1

def _golden_cells():
    """(case, session, metric, computed, printed) for the 54 rows and 6 aggregates."""
    cells = []
    for case, (rows, aacc, gacc) in GOLDEN.items():
        rep = metrics.evaluate(corner_matrix(case))
        for i, (a, g) in enumerate(rows, start=1):
            s = rep.per_session[i - 1]
            cells.append((case, i, "aacc", s.aacc, a))
            cells.append((case, i, "gacc", s.gacc_auc, g))
        cells.append((case, "avg", "aacc", rep.aacc, aacc))
        cells.append((case, "avg", "gacc", rep.gacc, gacc))
    return cells


def _cell_ok(computed, printed):
    return abs(round(computed, 2) - printed) <= 0.005 + 1e-9


@pytest.mark.xfail(strict=True, reason="two printed Greedy cells (f_6 gAcc 10.23, f_7 aAcc 5.55) are "
                   "printing errors: exact values 10.2234 and 5.5556")
def test_criterion_1_golden_tables():
    t0 = time.perf_counter()
    cells = _golden_cells()
    elapsed = time.perf_counter() - t0
    bad = [c for c in cells if not _cell_ok(c[3], c[4])]
    detail = (f"{len(cells) - len(bad)}/{len(cells)} printed cells match at +-0.005, {elapsed:.3f}s; "
              + "; ".join(f"{c}/f_{i} {k}: computed {v:.4f} printed {p}" for c, i, k, v, p in bad))
    ok = record_criterion(1, not bad and elapsed < 1.0, detail)
    assert ok, detail


def test_criterion_1_all_other_cells_and_runtime():
    t0 = time.perf_counter()
    cells = _golden_cells()
    assert time.perf_counter() - t0 < 1.0
    for case, i, k, v, p in cells:
        if (case, i, k) in PRINT_ERRATA:
            assert not _cell_ok(v, p)
        else:
            assert _cell_ok(v, p), (case, i, k, v, p)
    aggregates = {(c, k): round(v, 2) for c, i, k, v, _ in cells if i == "avg"}
    assert aggregates == {("lazy", "aacc"): 65.49, ("lazy", "gacc"): 49.92,
                          ("greedy", "aacc"): 14.94, ("greedy", "gacc"): 20.03,
                          ("greedy-nf", "aacc"): 32.40, ("greedy-nf", "gacc"): 49.86}


# ---------------------------------------------------------------- 2

def test_criterion_2_endpoint_identities():
    rng = np.random.default_rng(2)
    worst_t = worst_n = 0.0
    exact = True
    for _ in range(N_RANDOM):
        m = random_matrix(rng)
        r = m.layout.ratio
        alphas, curve = metrics.gacc_curves(m, 4)
        for i in range(1, m.n_tasks + 1):
            a = metrics.aacc_session(m, i)
            exact &= metrics.gacc_alpha(m, i, 1.0) == a and curve[i - 1, -1] == a
            t = metrics.tacc_session(m, i)
            if 1 / r <= 1:
                worst_t = max(worst_t, abs(metrics.gacc_alpha(m, i, 1 / r) - t) / max(abs(t), 1e-300))
            if i >= 2:
                worst_n = max(worst_n, abs(metrics.gacc_alpha(m, i, 0.0) - metrics.novel_only(m, i)))
    ok = exact and worst_t < 1e-12 and worst_n == 0.0
    record_criterion(2, ok, f"gAcc(1)==aAcc exactly: {exact}; max rel |gAcc(1/r)-tAcc| {worst_t:.2e}; "
                            f"max |gAcc(0)-novel| {worst_n:.1e}")
    assert ok


# ---------------------------------------------------------------- 3

def test_criterion_3_monotonicity_and_bounds():
    rng = np.random.default_rng(3)
    alphas = np.linspace(0, 1, 101)
    mono_bad = bound_bad = 0
    for _ in range(N_RANDOM):
        m = random_matrix(rng)
        for i in range(2, m.n_tasks + 1):
            vals = np.array([metrics.gacc_alpha(m, i, a) for a in alphas])
            sign = np.sign(m.entry(i, 1) - metrics.novel_only(m, i))
            steps = np.diff(vals)
            tol = 1e-12 * max(1.0, np.abs(vals).max())
            if sign > 0:
                mono_bad += np.any(steps < -tol)
            elif sign < 0:
                mono_bad += np.any(steps > tol)
            else:
                mono_bad += np.any(np.abs(steps) > tol)
            row = m.rows[i - 1]
            inside = vals[1:]
            bound_bad += np.any(inside < min(row) - tol) or np.any(inside > max(row) + tol)
    ok = mono_bad == 0 and bound_bad == 0
    record_criterion(3, ok, f"{N_RANDOM} matrices: monotonicity violations {mono_bad}, bound violations {bound_bad}")
    assert ok


# ---------------------------------------------------------------- 4

def test_criterion_4_quadrature_convergence():
    rng = np.random.default_rng(4)
    bad = 0
    for _ in range(200):
        m = random_matrix(rng)
        for i in range(2, m.n_tasks + 1):
            exact = metrics.gacc_auc(m, i, mode="exact")
            errs = [abs(metrics.gacc_auc(m, i, g) - exact) for g in (12, 120, 1200)]
            tol = 1e-10
            bad += not (errs[1] <= errs[0] + tol and errs[2] <= errs[1] + tol)
    lazy = corner_matrix("lazy")
    ex = metrics.gacc_auc(lazy, 2, mode="exact")
    tr = metrics.gacc_auc(lazy, 2, 12)
    ok = bad == 0 and abs(ex - 66.83) <= 0.01 and abs(tr - 66.29) <= 0.005
    record_criterion(4, ok, f"non-monotone rows {bad}; Lazy f_2 exact {ex:.4f} (66.83+-0.01), "
                            f"m=12 {tr:.4f} (66.29+-0.005)")
    assert ok


# ---------------------------------------------------------------- 5

def test_criterion_5_gradient_checks():
    t0 = time.perf_counter()
    results = run_gradcheck(seed=0, n_configs=100)
    elapsed = time.perf_counter() - t0
    ok = all(r.passed for r in results) and elapsed < 30.0
    worst = max(results, key=lambda r: r.max_rel_error)
    record_criterion(5, ok, f"{len(results)} checks x 100 configs, worst {worst.name} {worst.max_rel_error:.2e} "
                            f"(< {TOLERANCE:g}), {elapsed:.1f}s")
    assert ok


# ---------------------------------------------------------------- 6

def test_criterion_6_gaussian_replay_statistics():
    rng = np.random.default_rng(6)
    d, n = 16, 100_000
    worst_mean = worst_cov = 0.0
    for k in range(10):
        a = rng.standard_normal((d, d))
        cov = a @ a.T / d
        mu = rng.normal(0.0, 3.0, d)
        g = ClassGaussian(k, None, mu, cov)
        s = sample_gaussian(g, n, seed=100 + k)
        target = cov + JITTER * np.eye(d)
        worst_mean = max(worst_mean, np.linalg.norm(s.mean(axis=0) - mu) / np.linalg.norm(mu))
        worst_cov = max(worst_cov, np.linalg.norm(np.cov(s, rowvar=False) - target) / np.linalg.norm(target))
    ok = worst_mean < 0.01 and worst_cov < 0.05
    record_criterion(6, ok, f"10 covariances d=16 n=1e5: worst mean rel err {worst_mean:.4f} (<0.01), "
                            f"worst cov Frobenius rel err {worst_cov:.4f} (<0.05)")
    assert ok


# ---------------------------------------------------------------- 7 / 8

@pytest.fixture(scope="module")
def ablation_runs():
    t0 = time.perf_counter()
    runs = {s: run_ablation_suite(ScenarioConfig(seed=s)) for s in SEEDS}
    return runs, time.perf_counter() - t0


def _cell_name(cell):
    if not cell.get("fr", True):
        return "fr_off"
    if cell["branch"] != "ensemble":
        return f"branch_{cell['branch']}"
    return {(True, True): "full", (True, False): "no_ir", (False, True): "no_cr",
            (False, False): "cos_only"}[(cell["cr"], cell["ir"])]


def _medians(runs, fn):
    names = [_cell_name(r["cell"]) for r in next(iter(runs.values()))]
    return {name: float(np.median([fn(runs[s][k]) for s in SEEDS])) for k, name in enumerate(names)}


def test_criterion_7_simulator_efficacy(ablation_runs):
    runs, elapsed = ablation_runs
    novel = _medians(runs, lambda r: metrics.novel_only(r["matrix"], r["matrix"].n_tasks))
    aacc = _medians(runs, lambda r: r["report"].aacc)
    gacc = _medians(runs, lambda r: r["report"].gacc)
    d_novel = novel["full"] - novel["fr_off"]
    d_aacc = aacc["full"] - aacc["fr_off"]
    d_gacc = gacc["full"] - gacc["fr_off"]
    ok = d_novel >= 5.0 and d_aacc >= -2.0 and d_gacc > 0 and elapsed < 300
    record_criterion(7, ok, f"medians over seeds {SEEDS}: novel {novel['fr_off']:.2f} -> {novel['full']:.2f} "
                            f"({d_novel:+.2f}), aAcc {d_aacc:+.2f}, gAcc {gacc['fr_off']:.2f} -> "
                            f"{gacc['full']:.2f}; grid runtime {elapsed:.0f}s")
    assert ok


def test_criterion_8_ablation_ordering(ablation_runs):
    runs, _ = ablation_runs
    gacc = _medians(runs, lambda r: r["report"].gacc)
    singles = {k: v for k, v in gacc.items() if k in ("no_ir", "no_cr", "cos_only")}
    branches = {k: v for k, v in gacc.items() if k.startswith("branch_")}
    best_branch = max(branches.values())
    ok = all(gacc["full"] >= v for v in singles.values()) and gacc["full"] >= best_branch - 0.5
    record_criterion(8, ok, "median gAcc " + ", ".join(f"{k} {v:.2f}" for k, v in gacc.items()))
    assert ok


# ---------------------------------------------------------------- 9

def test_criterion_9_hacc_suite():
    rng = np.random.default_rng(9)
    pairs = rng.uniform(0, 100, (10_000, 2))
    pairs[:500, 0] = 0.0
    pairs[500:1000, 1] = 0.0
    sym = zero = bound = True
    for a, b in pairs:
        h = metrics.harmonic_accuracy(a, b)
        sym &= h == metrics.harmonic_accuracy(b, a)
        if a == 0 or b == 0:
            zero &= h == 0.0
        bound &= h <= (a + b) / 2 + 1e-12
    zero &= metrics.harmonic_accuracy(0.0, 0.0) == 0.0
    ok = sym and zero and bound
    record_criterion(9, ok, f"10000 pairs: symmetric {sym}, zero-annihilation {zero}, <= arithmetic mean {bound}")
    assert ok


# ---------------------------------------------------------------- 10

def _cli(args, cwd):
    res = subprocess.run([sys.executable, "-m", "fscil_gacc"] + args, cwd=cwd, capture_output=True,
                         text=True, env=dict(os.environ))
    assert res.returncode == 0, res.stderr
    return res.stdout


def _digest(path):
    h = hashlib.sha256()
    paths = sorted(p for p in path.rglob("*") if p.is_file()) if path.is_dir() else [path]
    for p in paths:
        h.update(p.name.encode())
        h.update(p.read_bytes())
    return h.hexdigest()


def test_criterion_10_cli_determinism(tmp_path):
    def invocations(out):
        out.mkdir()
        return [
            ("oracle", ["oracle", "--case", "greedy", "--output", str(out / "greedy.csv")], out / "greedy.csv"),
            ("oracle-json", ["oracle", "--case", "lazy", "--format", "json", "--output", str(out / "lazy.json")],
             out / "lazy.json"),
            ("eval", ["eval", "--input", str(out / "greedy.csv"), "--output", str(out / "report.json")],
             out / "report.json"),
            ("curve", ["curve", "--input", str(out / "lazy.json"), "--output", str(out / "curve.csv")],
             out / "curve.csv"),
            ("compare", ["compare", "--inputs", str(out / "greedy.csv"), "--inputs", str(out / "lazy.json"),
                         "--output", str(out / "rank.json")], out / "rank.json"),
            ("simulate", ["simulate", "--seed", "1", "--output", str(out / "sim")], out / "sim"),
            ("ablate", ["ablate", "--seed", "1", "--output", str(out / "ablate.json")], out / "ablate.json"),
            ("gradcheck", ["gradcheck", "--seed", "2", "--configs", "20", "--output", str(out / "grad.json")],
             out / "grad.json"),
        ]

    digests = []
    for run in ("a", "b"):
        d = {}
        for name, args, target in invocations(tmp_path / run):
            _cli(args, tmp_path)
            d[name] = _digest(target)
        digests.append(d)
    differing = [k for k in digests[0] if digests[0][k] != digests[1][k]]
    ok = not differing
    record_criterion(10, ok, f"{len(digests[0])} invocations run twice, sha256 identical: "
                             + (", ".join(digests[0]) if ok else f"DIFFER {differing}"))
    assert ok
