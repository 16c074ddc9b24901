import json
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.stats import norm

from ibo.acquisition import (
    AcquisitionKind,
    AcquisitionSpec,
    acq_eval,
    acq_grad,
    default_xi,
    score_from_moments,
)
from ibo.gp import Dataset, KernelSpec, fit, median_heuristic_lengthscale

from _oracles import central_fd, rel_err

DATA = Path(__file__).parent / "data"


def test_spec_validation():
    with pytest.raises(ValueError):
        AcquisitionSpec("LCB", kappa=0.0)
    with pytest.raises(ValueError):
        AcquisitionSpec("EI", xi=-0.1)
    with pytest.raises(ValueError):
        AcquisitionSpec("UCB")


def test_default_margin():
    assert default_xi(-200.0) == pytest.approx(2.0)
    assert default_xi(0.0) == 1e-3
    assert AcquisitionSpec("EI", incumbent=50.0).margin == pytest.approx(0.5)
    assert AcquisitionSpec("EI", xi=0.0, incumbent=50.0).margin == 0.0


def test_lcb_example():
    assert score_from_moments(AcquisitionSpec("LCB", kappa=2.0), 1.0, 0.5) == 0.0


def test_pi_at_incumbent_is_minus_half():
    spec = AcquisitionSpec("PI", xi=0.0, incumbent=3.0)
    assert score_from_moments(spec, 3.0, 0.7) == -0.5


def test_degenerate_sigma_limits():
    ei = AcquisitionSpec("EI", xi=0.0, incumbent=2.0)
    assert score_from_moments(ei, 1.0, 0.0) == -1.0
    assert score_from_moments(ei, 2.5, 0.0) == 0.0
    pi = AcquisitionSpec("PI", xi=0.0, incumbent=2.0)
    assert score_from_moments(pi, 1.0, 0.0) == -1.0
    assert score_from_moments(pi, 2.0, 0.0) == 0.0


def test_ei_matches_scipy_integral():
    from scipy.integrate import quad

    mu, sigma, inc, xi = 0.3, 0.8, 0.5, 0.05
    spec = AcquisitionSpec("EI", xi=xi, incumbent=inc)
    gain, _ = quad(lambda y: max(inc - xi - y, 0.0) * norm.pdf(y, mu, sigma), -10, 10, points=[inc - xi])
    assert score_from_moments(spec, mu, sigma) == pytest.approx(-gain, rel=1e-8)


@given(st.floats(-1e3, 1e3), st.floats(0, 1e2), st.floats(-1e3, 1e3), st.floats(0, 10))
def test_ei_nonpositive_and_pi_range(mu, sigma, inc, xi):
    ei = score_from_moments(AcquisitionSpec("EI", xi=xi, incumbent=inc), mu, sigma)
    pi = score_from_moments(AcquisitionSpec("PI", xi=xi, incumbent=inc), mu, sigma)
    assert ei <= 0.0
    assert -1.0 <= pi <= 0.0
    if sigma == 0.0 and mu >= inc - xi:
        assert ei == 0.0


@given(st.floats(-100, 100), st.floats(0, 50), st.floats(1e-3, 50), st.floats(0.1, 5))
def test_lcb_strictly_decreasing_in_sigma(mu, sigma, delta, kappa):
    spec = AcquisitionSpec("LCB", kappa=kappa)
    assert score_from_moments(spec, mu, sigma + delta) < score_from_moments(spec, mu, sigma)


def _model(rng, dim, n=8):
    pts = rng.uniform(size=(n, dim))
    vals = rng.normal(size=n) * 4
    return fit(Dataset(pts, vals), KernelSpec("Matern52", median_heuristic_lengthscale(pts), 1.0))


@pytest.mark.parametrize("kind", list(AcquisitionKind))
@pytest.mark.parametrize("dim", [2, 100])
def test_gradient_matches_fd(kind, dim):
    rng = np.random.default_rng(dim + 7)
    for _ in range(5):
        model = _model(rng, dim)
        inc = float(np.min(model.dataset.values))
        spec = AcquisitionSpec(kind, incumbent=inc)
        q = rng.uniform(size=dim)
        fd = central_fd(lambda x: acq_eval(spec, model, x), q)
        assert rel_err(acq_grad(spec, model, q), fd) <= 1e-4


def test_ei_gradient_at_training_point_is_finite():
    rng = np.random.default_rng(1)
    model = _model(rng, 3)
    spec = AcquisitionSpec("EI", incumbent=float(np.min(model.dataset.values)))
    q = model.points[2]
    g = acq_grad(spec, model, q)
    assert np.all(np.isfinite(g))
    fd = central_fd(lambda x: acq_eval(spec, model, x), q, h=1e-7)
    assert np.linalg.norm(g - fd) <= 1e-4 * max(1.0, np.linalg.norm(fd))


def test_lcb_gradient_symmetry():
    model = fit(Dataset([[0.2, 0.5], [0.8, 0.5]], [1.0, 1.0]), KernelSpec("Matern52", 0.3, 1.0))
    g = acq_grad(AcquisitionSpec("LCB"), model, [0.5, 0.1])
    assert abs(g[0]) <= 1e-12


def test_pi_ei_gradient_zero_when_variance_collapses():
    model = fit(Dataset([[0.5]], [1.0]), KernelSpec("RBF", 1.0, 1.0), jitter=0.0)
    for kind in ("PI", "EI"):
        g = acq_grad(AcquisitionSpec(kind, incumbent=1.0), model, [0.5])
        np.testing.assert_array_equal(g, [0.0])


def test_argmin_on_dense_grid_matches_golden():
    golden = json.loads((DATA / "acquisition_argmin.json").read_text())
    model = fit(Dataset(np.array(golden["points"])[:, None], golden["values"]),
                KernelSpec(golden["kernel"], golden["lengthscale"], 1.0))
    lo, hi, n = golden["grid"]
    grid = np.linspace(lo, hi, n)
    best = min(golden["values"])
    for kind, expected in golden["argmin"].items():
        spec = AcquisitionSpec(kind, incumbent=best)
        scores = [acq_eval(spec, model, [g]) for g in grid]
        i = int(np.argmin(scores))
        assert grid[i] == pytest.approx(expected["x"], abs=1e-12)
        assert scores[i] == pytest.approx(expected["score"], rel=1e-9)
        # minimizers sit past the better observation, away from data
        assert grid[i] > 0.6
