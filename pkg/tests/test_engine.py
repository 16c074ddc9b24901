import numpy as np
import pytest
from scipy.stats import kstest, uniform

from ibo.acquisition import AcquisitionSpec, acq_eval
from ibo.benchmarks import get_benchmark
from ibo.engine import (
    IboConfig,
    LocalStart,
    OptimizationError,
    Phase,
    init_design,
    optimize,
    propose_candidates,
    refine_candidate,
    run_global_phase,
    run_local_phase,
    select_best,
    standard_bo_mode,
)
from ibo.gp import Dataset, KernelSpec, fit
from ibo.objective import ObjectiveHandle


def bowl(dim=2, center=0.3, lower=-1.0, upper=1.0):
    c = np.full(dim, center)
    return ObjectiveHandle(dim, lower, upper, lambda x: float(np.sum((x - c) ** 2)),
                           lambda x: 2 * (x - c), name="bowl")


def test_config_validation():
    for bad in (dict(m=0), dict(k=0), dict(n=0), dict(j0=0), dict(l=0), dict(k=2, l=4),
                dict(sample_width=0.0), dict(sample_width=1.5), dict(inner_lr=0.0)):
        with pytest.raises(ValueError):
            IboConfig(**bad)
    cfg = IboConfig(kernel="RBF", acquisition="EI", local_start="acquisition")
    assert IboConfig.from_dict(cfg.to_dict()) == cfg


def test_init_design_degenerate_box():
    h = ObjectiveHandle(2, [0.4, -1.0], [0.4, -1.0], lambda x: 1.0)
    data = init_design(h, 1, np.random.default_rng(0))
    np.testing.assert_array_equal(data.points, [[0.4, -1.0]])


def test_init_design_bounds_and_counting():
    h = bowl()
    data = init_design(h, 5, np.random.default_rng(1))
    assert data.points.shape == (5, 2)
    assert np.all((data.points >= -1) & (data.points <= 1))
    assert h.n_value_calls == 5


def test_init_design_is_reproducible():
    a = init_design(bowl(), 6, np.random.default_rng(42))
    b = init_design(bowl(), 6, np.random.default_rng(42))
    np.testing.assert_array_equal(a.points, b.points)
    np.testing.assert_array_equal(a.values, b.values)


def test_init_design_reports_bad_point():
    h = ObjectiveHandle(1, 0, 1, lambda x: np.nan)
    with pytest.raises(ValueError, match="objective returned nan"):
        init_design(h, 2, np.random.default_rng(0))


def test_proposals_collapse_with_tiny_window():
    c = propose_candidates([0.2, 0.7], ([0, 0], [1, 1]), 4, 1e-12, np.random.default_rng(0))
    assert c.shape == (5, 2)
    np.testing.assert_allclose(c, np.tile([0.2, 0.7], (5, 1)), atol=1e-11)


def test_proposals_at_corner_stay_in_bounds():
    c = propose_candidates([1.0, 0.0], ([0, 0], [1, 1]), 200, 0.1, np.random.default_rng(0))
    np.testing.assert_array_equal(c[0], [1.0, 0.0])
    assert np.all((c[:, 0] >= 0.9) & (c[:, 0] <= 1.0))
    assert np.all((c[:, 1] >= 0.0) & (c[:, 1] <= 0.1))


def test_proposals_are_uniform_over_truncated_window():
    # window around 0.05 with w=0.1 on [0, 1] is [0, 0.15]
    c = propose_candidates([0.05], ([0.0], [1.0]), 1000, 0.1, np.random.default_rng(7))
    stat = kstest(c[1:, 0], uniform(loc=0.0, scale=0.15).cdf)
    assert stat.pvalue > 0.01


def test_refine_with_zero_gradient_keeps_candidate():
    model = fit(Dataset([[0.5, 0.5]], [2.0]), KernelSpec("Matern52", 0.3, 1.0))
    out = refine_candidate(model, AcquisitionSpec("LCB"), [0.5, 0.5], 1, ([0, 0], [1, 1]), 0.05)
    np.testing.assert_array_equal(out, [0.5, 0.5])


def _two_point_model():
    return fit(Dataset([[0.3], [0.6]], [1.0, 0.4]), KernelSpec("Matern52", 0.2, 1.0))


def test_refine_never_worsens_score():
    model = _two_point_model()
    spec = AcquisitionSpec("EI", incumbent=0.4)
    rng = np.random.default_rng(3)
    for c in rng.uniform(size=(20, 1)):
        out = refine_candidate(model, spec, c, 5, ([0.0], [1.0]), 0.05)
        assert acq_eval(spec, model, out) <= acq_eval(spec, model, c)
        assert 0.0 <= out[0] <= 1.0


def test_refine_reaches_reachable_grid_minimum():
    model = _two_point_model()
    spec = AcquisitionSpec("LCB", incumbent=0.4)
    start, n, lr = 0.7, 200, 0.01
    out = refine_candidate(model, spec, [start], n, ([0.0], [1.0]), lr)
    grid = np.linspace(max(0.0, start - n * lr), min(1.0, start + n * lr), 20001)
    scores = np.array([acq_eval(spec, model, [g]) for g in grid])
    # the local basin containing the start holds the grid minimum here
    assert acq_eval(spec, model, out) == pytest.approx(scores.min(), abs=1e-6)
    assert out[0] == pytest.approx(grid[np.argmin(scores)], abs=1e-3)


def test_select_best_rules():
    model = _two_point_model()
    spec = AcquisitionSpec("LCB")
    pts = np.random.default_rng(0).uniform(size=(8, 1))
    scores = np.array([acq_eval(spec, model, p) for p in pts])
    np.testing.assert_array_equal(select_best(pts, model, spec, 8), pts[np.argsort(scores)])
    np.testing.assert_array_equal(select_best(pts, model, spec, 3), pts[np.argsort(scores)[:3]])
    same = np.array([[0.3], [0.3], [0.3]]) + np.array([[0.0], [1e-300], [0.0]])
    np.testing.assert_array_equal(select_best(same, model, spec, 2), same[:2])
    with pytest.raises(ValueError):
        select_best(pts, model, spec, 9)


def test_global_phase_counting_minimal():
    h = bowl()
    cfg = IboConfig(m=1, k=1, l=1, j0=3)
    data, records, _ = run_global_phase(h, cfg, np.random.default_rng(0))
    assert len(data) == 4
    assert h.n_value_calls == 4
    assert len(records) == 1 and records[0].phase is Phase.GLOBAL


@pytest.mark.parametrize("l", [1, 2, 4])
def test_dataset_growth(l):
    h = bowl(3)
    cfg = IboConfig(m=6, k=4, l=l, j0=5)
    data, records, _ = run_global_phase(h, cfg, np.random.default_rng(1))
    assert len(data) == cfg.j0 + cfg.m * l
    assert len(records) == cfg.m * l


def test_global_phase_is_deterministic():
    cfg = IboConfig(m=5)
    a = run_global_phase(bowl(), cfg, np.random.default_rng(9))[0]
    b = run_global_phase(bowl(), cfg, np.random.default_rng(9))[0]
    np.testing.assert_array_equal(a.points, b.points)


def test_local_phase_at_minimum_stops_fast():
    h = bowl()
    x, v, records, aborted = run_local_phase(h, [0.3, 0.3], IboConfig())
    assert len(records) <= 6 and not aborted
    np.testing.assert_allclose(x, [0.3, 0.3], atol=1e-6)


def test_local_phase_on_parabola():
    h = ObjectiveHandle(1, -2, 2, lambda x: float(x[0] ** 2), lambda x: 2 * x)
    x, v, records, _ = run_local_phase(h, [1.0], IboConfig(local_lr=0.05 / 4))
    assert abs(x[0]) <= 1e-2
    assert v <= 1.0
    assert all(r.phase is Phase.LOCAL for r in records)


def test_local_phase_returns_best_ever():
    # a large learning rate overshoots; the best visited point is still returned
    h = ObjectiveHandle(1, -2, 2, lambda x: float(x[0] ** 2), lambda x: 2 * x)
    x, v, records, _ = run_local_phase(h, [0.1], IboConfig(local_lr=0.4, local_max_steps=20))
    assert v == min([0.01] + [r.objective for r in records])
    assert v <= 0.01


def test_local_phase_aborts_on_nonfinite_gradient():
    h = ObjectiveHandle(1, -1, 1, lambda x: float(x[0] ** 2), lambda x: np.array([np.inf]))
    x, v, records, aborted = run_local_phase(h, [0.5], IboConfig())
    assert aborted and records == []
    assert v == 0.25


def test_optimize_degenerate_box():
    h = ObjectiveHandle(2, [1.0, 2.0], [1.0, 2.0], lambda x: 3.0, lambda x: np.zeros(2))
    res = optimize(h, IboConfig(m=2, j0=2))
    np.testing.assert_array_equal(res.best_point, [1.0, 2.0])
    assert not [r for r in res.trace if r.phase is Phase.LOCAL]


def test_optimize_invariants_and_accounting():
    h = get_benchmark("mccormick").handle()
    cfg = IboConfig(seed=3)
    res = optimize(h, cfg)
    phases = [r.phase for r in res.trace]
    n_global = phases.count(Phase.GLOBAL)
    assert n_global == cfg.m * cfg.l
    assert phases == [Phase.GLOBAL] * n_global + [Phase.LOCAL] * (len(phases) - n_global)
    assert len(res.dataset) == cfg.j0 + cfg.m * cfg.l
    best = res.best_so_far()
    assert np.all(np.diff(best) <= 0)
    for r in res.trace:
        assert np.all(r.point >= h.lower) and np.all(r.point <= h.upper)
    assert res.n_evaluations == cfg.j0 + cfg.m * cfg.l + (len(phases) - n_global)
    assert res.best_value == min(np.min(res.dataset.values), min(r.objective for r in res.trace))
    assert res.best_value <= res.extra["local_start_value"]


def test_optimize_is_deterministic():
    a = optimize(get_benchmark("rosenbrock").handle(), IboConfig(seed=5))
    b = optimize(get_benchmark("rosenbrock").handle(), IboConfig(seed=5))
    assert [r.objective for r in a.trace] == [r.objective for r in b.trace]
    np.testing.assert_array_equal(a.best_point, b.best_point)


def test_mccormick_default_config():
    entry = get_benchmark("mccormick")
    best = min(optimize(entry.handle(), IboConfig(seed=s)).best_value for s in range(20))
    assert abs(best - (-1.9133)) <= 1e-2


def test_literal_local_start_rule_runs():
    res = optimize(bowl(), IboConfig(m=4, local_start=LocalStart.ACQUISITION))
    assert np.isfinite(res.best_value)


def test_initial_point_is_first_design_point():
    res = optimize(bowl(), IboConfig(m=2, initial_point=(0.1, -0.2)))
    np.testing.assert_array_equal(res.dataset.points[0], [0.1, -0.2])


def test_failure_keeps_partial_trace():
    calls = {"n": 0}

    def flaky(x):
        calls["n"] += 1
        return np.nan if calls["n"] > 8 else float(np.sum(x**2))

    h = ObjectiveHandle(2, -1, 1, flaky, lambda x: 2 * x)
    with pytest.raises(OptimizationError) as info:
        optimize(h, IboConfig(m=10, j0=5))
    assert len(info.value.trace) == 3


def test_standard_bo_has_no_local_records_and_matches_prefix():
    cfg = IboConfig(m=6, n=1, seed=2)
    std = standard_bo_mode(get_benchmark("mccormick").handle(), cfg)
    full = optimize(get_benchmark("mccormick").handle(), cfg)
    assert all(r.phase is Phase.GLOBAL for r in std.trace)
    assert [r.objective for r in std.trace] == [r.objective for r in full.trace[: len(std.trace)]]
    assert std.config["n"] == 1 and std.config["local_phase"] is False
