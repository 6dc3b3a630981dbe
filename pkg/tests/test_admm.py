import numpy as np
import pytest

from pathmed import Coefficients, FitOptions, PenaltyConfig, fit, objective, standardize
from pathmed.admm import AdmmProblem, AdmmState, active_sets, augmented_lagrangian, effective_rho
from pathmed.errors import NotStandardized
from pathmed.model import loss

from conftest import random_raw
from oracles import StackedProblem, cvxpy_objective, fista_objective

TIGHT = FitOptions(rel_tol=1e-10, max_iters=20_000)


def stacked(data):
    return StackedProblem(data.x, data.m1, data.m2, data.y)


def test_requires_standardized(rng):
    with pytest.raises(NotStandardized):
        fit(random_raw(rng), PenaltyConfig.shared(1.0, 0.1))


def test_options_validation():
    with pytest.raises(ValueError):
        FitOptions(rho=0.0)
    with pytest.raises(ValueError):
        FitOptions(max_iters=0)
    with pytest.raises(ValueError):
        FitOptions(rel_tol=-1.0)


def test_effective_rho(small_data):
    assert effective_rho(small_data, FitOptions(rho=2.0)) == 2.0 * (small_data.n - 1)
    assert effective_rho(small_data, FitOptions(rho=2.0, scale_rho=False)) == 2.0


def test_gram_loss_matches_model_loss(small_data, rng):
    prob = AdmmProblem(small_data, PenaltyConfig.shared(1.0, 0.1))
    c = Coefficients(rng.normal(size=3), rng.normal(size=3), rng.normal(size=4), rng.normal(size=4),
                     rng.normal(size=(3, 4)), rng.normal())
    assert prob.loss(c.beta, c.theta, c.zeta, c.pi, c.lam, c.delta) == pytest.approx(loss(small_data, c), rel=1e-12)


def test_converges_with_small_residuals(small_data):
    res = fit(small_data, PenaltyConfig.shared(0.5, 0.1))
    assert res.converged
    assert max(res.primal_residuals.values()) < 1e-4
    assert res.objective == pytest.approx(objective(small_data, res.coef, res.cfg), rel=1e-4)


def test_objective_settles(small_data):
    trace = fit(small_data, PenaltyConfig.shared(0.5, 0.1), TIGHT).objective_trace
    tail = trace[len(trace) // 2:]
    assert np.ptp(tail) <= 1e-6 * abs(tail[-1])


def test_large_kappa_gives_zero(small_data):
    res = fit(small_data, PenaltyConfig.shared(1e4, 1.0))
    assert res.n_active == 0
    assert np.all(res.coef.lam == 0) and res.coef.delta == 0


def test_zero_penalty_is_least_squares(small_data):
    d = small_data
    res = fit(d, PenaltyConfig.shared(0.0, 0.0), TIGHT)
    z = np.linalg.lstsq(stacked(d).A, stacked(d).c, rcond=None)[0]
    beta, theta, zeta, pi, lam, delta = stacked(d).unpack(z)
    # objective stopping: the value is tight, the coefficients less so
    assert res.objective == pytest.approx(stacked(d).smooth(z), rel=1e-8)
    np.testing.assert_allclose(res.coef.theta, theta, atol=1e-3)
    np.testing.assert_allclose(res.coef.lam, lam, atol=1e-3)
    assert res.coef.delta == pytest.approx(delta, abs=1e-3)


def test_max_iters_reports_not_converged(small_data):
    res = fit(small_data, PenaltyConfig.shared(0.5, 0.1), FitOptions(max_iters=1))
    assert not res.converged and res.iterations == 1


def test_warm_start_from_solution_is_fast(small_data):
    cfg = PenaltyConfig.shared(0.5, 0.1)
    cold = fit(small_data, cfg, TIGHT)
    warm = fit(small_data, cfg, FitOptions(rel_tol=1e-10, max_iters=20_000, init=cold.coef))
    assert warm.iterations < cold.iterations / 4
    assert warm.objective == pytest.approx(cold.objective, rel=1e-8)


def test_warm_state_is_fixed_point_at_zero_penalty(small_data):
    # with no penalty the least-squares solution plus stationarity duals should not move
    d = small_data
    cfg = PenaltyConfig.shared(0.0, 0.0)
    ls = fit(d, cfg, TIGHT).coef
    prob = AdmmProblem(d, cfg, effective_rho(d, FitOptions()))
    state = AdmmState.warm(prob, ls)
    before = augmented_lagrangian(prob, state)
    np.testing.assert_allclose(state.tau1, 0.0, atol=1e-5)
    assert before == pytest.approx(0.5 * loss(d, ls), rel=1e-10)


def test_mask_without_p2_keeps_mu_zero(small_data):
    res = fit(small_data, PenaltyConfig.shared(0.5, 1.0, mask="P1P3"))
    assert res.cfg.mu1 == 0.0 and res.converged


@pytest.mark.parametrize("kappa", [0.1, 2.0])
def test_matches_proximal_gradient(rng, kappa):
    data = standardize(random_raw(rng))
    cfg = PenaltyConfig.shared(kappa, 0.1)
    res = fit(data, cfg)
    _, f = fista_objective(stacked(data), cfg.as_dict())
    assert res.objective == pytest.approx(f, abs=1e-3)
    assert objective(data, res.coef, cfg) == pytest.approx(f, abs=1e-3)


def test_matches_conic_solver(rng):
    pytest.importorskip("cvxpy")
    data = standardize(random_raw(rng))
    cfg = PenaltyConfig.shared(0.5, 0.1)
    _, value = cvxpy_objective(stacked(data), cfg.as_dict())
    assert objective(data, fit(data, cfg, TIGHT).coef, cfg) == pytest.approx(value, abs=1e-4)


def test_rho_does_not_change_solution(small_data):
    cfg = PenaltyConfig.shared(0.5, 0.1)
    a = fit(small_data, cfg, FitOptions(rho=0.5, rel_tol=1e-10, max_iters=20_000))
    b = fit(small_data, cfg, FitOptions(rho=3.0, rel_tol=1e-10, max_iters=20_000))
    assert a.objective == pytest.approx(b.objective, rel=1e-6)


def test_active_sets_threshold():
    c = Coefficients([1.0, 1e-12], [1.0, 1.0], [0.0, 2.0], [3.0, 1.0], [[0.0, 1.0], [1.0, 1.0]])
    a1, a2, a3 = active_sets(c)
    assert list(a1) == [0] and list(a2) == [1]
    assert a3.tolist() == [[0, 1]]
