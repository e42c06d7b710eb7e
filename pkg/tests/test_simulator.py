import json

import numpy as np
import pytest

from fscil_gacc import TaskLayout, metrics
from fscil_gacc.errors import BadConfig
from fscil_gacc.rectify import LossWeights
from fscil_gacc.simulator import (
    ScenarioConfig,
    TrainingConfig,
    ablation_table_json,
    generate_scenario,
    load_config,
    run_ablation_suite,
    run_baseline,
    run_fr,
)

SMALL = ScenarioConfig(layout=TaskLayout(3, 20, 5, 5), dim=16, layers=(9, 12),
                       noise={9: 1.0, 12: 0.5}, shrinkage={9: 0.3, 12: 0.8},
                       train_per_class=20, test_per_class=10, seed=3)
FAST = TrainingConfig(base_epochs=1, incremental_epochs=2, prototype_samples=10)


def _novel_last(m):
    return metrics.novel_only(m, m.n_tasks)


def test_noise_free_separable_is_perfect():
    cfg = ScenarioConfig(layout=TaskLayout(3, 20, 5, 5), dim=16, layers=(9, 12),
                         noise=1e-4, shrinkage=0.0, train_per_class=5, test_per_class=5)
    m = run_baseline(cfg)
    assert all(v == 100.0 for row in m.rows for v in row)


def test_full_collapse_hurts_novel_classes():
    cfg = ScenarioConfig(layout=TaskLayout(3, 20, 5, 5), dim=16, layers=(9, 12),
                         noise=0.3, shrinkage={9: 0.0, 12: 1.0})
    final = run_baseline(cfg)
    inter = run_baseline(cfg, layer=9)
    assert _novel_last(final) < 60.0
    assert _novel_last(inter) > 95.0


def test_collapse_monotone_in_shrinkage():
    vals = []
    for g in (0.0, 0.4, 0.8, 1.0):
        cfg = ScenarioConfig(layout=TaskLayout(4, 30, 5, 5), dim=16, layers=(9, 12), noise=0.8,
                             shrinkage={9: 0.0, 12: g}, seed=1)
        vals.append(_novel_last(run_baseline(cfg)))
    assert vals == sorted(vals, reverse=True)


def test_scenario_is_deterministic():
    a, b = generate_scenario(SMALL), generate_scenario(SMALL)
    for layer in SMALL.layers:
        np.testing.assert_array_equal(a.train_x[layer], b.train_x[layer])
        np.testing.assert_array_equal(a.test_x[layer], b.test_x[layer])
    c = generate_scenario(ScenarioConfig(**{**SMALL.__dict__, "seed": 4}))
    assert not np.array_equal(a.train_x[12], c.train_x[12])


def test_scenario_shapes():
    scen = generate_scenario(SMALL)
    lay = SMALL.layout
    assert scen.train_y.shape[0] == 20 * 20 + 2 * 5 * 5
    assert scen.test_y.shape[0] == lay.total_classes * 10
    assert np.allclose(np.linalg.norm(scen.means, axis=1), 1.0)
    assert all(scen.nearest_base[c] < 20 for c in range(lay.total_classes))


def test_fr_deterministic_and_prototype_counts():
    r1 = run_fr(SMALL, training=FAST)
    r2 = run_fr(SMALL, training=FAST)
    assert r1.ensemble == r2.ensemble
    assert r1.per_branch == r2.per_branch
    assert set(r1.per_branch) == {9}
    assert r1.state.prototype_counts() == [SMALL.layout.total_classes]
    assert all(np.isfinite(h[-1]) for h in r1.history)


def test_ablation_fr_off_equals_baseline():
    grid = [{"fr": False}, {"fr": True, "cr": False, "ir": True, "branch": 9}]
    res = run_ablation_suite(SMALL, grid, training=FAST)
    assert res[0]["matrix"] == run_baseline(SMALL)
    assert res[1]["matrix"] == run_fr(SMALL, LossWeights(beta_cr=0.0), FAST).per_branch[9]
    obj = json.loads(ablation_table_json(res))
    assert [o["cell"] for o in obj] == grid


@pytest.mark.parametrize("kwargs", [
    {"layers": ()},
    {"layers": (9, 9)},
    {"noise": -1.0},
    {"shrinkage": {9: 0.9, 12: 0.5}},
    {"shrinkage": 1.5},
    {"train_per_class": 1},
    {"noise": {12: 1.0}},
])
def test_bad_configs(kwargs):
    base = dict(layout=TaskLayout(3, 20, 5, 5), dim=16, layers=(9, 12))
    with pytest.raises(BadConfig):
        ScenarioConfig(**{**base, **kwargs})


def test_fr_needs_intermediate_layer():
    cfg = ScenarioConfig(layout=TaskLayout(2, 10, 2, 2), dim=4, layers=(12,))
    with pytest.raises(BadConfig):
        run_fr(cfg, training=FAST)


def test_load_config_sections(tmp_path):
    obj = {**SMALL.to_dict(), "training": {"base_epochs": 2}, "weights": {"beta_ir": 0.0}}
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps(obj))
    cfg, training, weights = load_config(p)
    assert cfg == SMALL and training.base_epochs == 2 and weights.beta_ir == 0.0
    p.write_text(json.dumps({"bogus": 1}))
    with pytest.raises(BadConfig):
        load_config(p)
