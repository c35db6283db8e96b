import math

import numpy as np
import pytest

from ceopt import GaussianParams, MonteCarloConfig, RngState, Schedule, sample_quantile
from ceopt.baselines import gmcce_iteration, mcce_iteration, run_batch
from ceopt.objectives import ObjectiveFunction, make_benchmark


def linear_objective():
    return ObjectiveFunction("linear", 1, lambda x: x[..., 0])


def cfg(**kw):
    base = dict(n0=100, eta=1.0, rho=0.1, r=0.5, eps=0.01)
    base.update(kw)
    return MonteCarloConfig(**base)


# ---------------------------------------------------------------------------
# sample_quantile


def test_sample_quantile_small_cases():
    assert sample_quantile([1, 2, 3, 4, 5], 0.2) == 4.0  # ceil(0.8*5) = 4th smallest
    assert sample_quantile([7.0], 0.3) == 7.0
    assert sample_quantile([5, 1, 3, 2, 4], 0.2) == 4.0  # order must not matter


def test_sample_quantile_validation():
    with pytest.raises(ValueError):
        sample_quantile([], 0.1)
    with pytest.raises(ValueError):
        sample_quantile([1.0], 0.0)


def test_sample_quantile_normal_draws():
    draws = RngState(31).standard_normal(1000)
    # inverse-CDF oracle for the 0.9 quantile of the standard normal
    assert sample_quantile(draws, 0.1) == pytest.approx(1.2815515655446004, abs=0.13)


# ---------------------------------------------------------------------------
# mcce_iteration


def test_mcce_unit_weights_give_elite_mean():
    # with gamma_star set between the 3rd and 4th largest values and
    # vanishing r, the update is the plain mean/scatter of the top 3
    obj = linear_objective()
    theta = GaussianParams([0.0], [[4.0]])
    rng = RngState(1)
    probe = RngState(1)
    from ceopt.gaussian import sample_gaussian_batch

    xs = sample_gaussian_batch(theta, probe, 50)
    hs = xs[:, 0]
    top3 = np.sort(hs)[-3:]
    gamma_star = (np.sort(hs)[-4] + top3[0]) / 2.0
    theta_new, gamma_out, stats = mcce_iteration(
        theta, gamma_star, 50, cfg(rho=0.1, r=0.0, eps=1e9), obj, rng
    )
    assert stats["elite"] == 3
    assert gamma_out == gamma_star  # the huge margin blocks acceptance
    assert theta_new.mu[0] == pytest.approx(top3.mean(), rel=1e-12)
    assert theta_new.sigma[0, 0] == pytest.approx(top3.var(), rel=1e-12)


def test_mcce_single_elite_point_collapses_sigma():
    obj = linear_objective()
    theta = GaussianParams([0.0], [[1.0]])
    rng = RngState(2)
    probe = RngState(2)
    from ceopt.gaussian import sample_gaussian_batch

    xs = sample_gaussian_batch(theta, probe, 20)
    hs = np.sort(xs[:, 0])
    gamma_star = (hs[-2] + hs[-1]) / 2.0  # only the max survives
    theta_new, _, stats = mcce_iteration(theta, gamma_star, 20, cfg(r=1.0, eps=1e9), obj, rng)
    assert stats["elite"] == 1
    assert theta_new.mu[0] == pytest.approx(hs[-1], rel=1e-12)
    assert theta_new.sigma[0, 0] == 0.0


def test_mcce_empty_elite_retains_model():
    obj = linear_objective()
    theta = GaussianParams([0.0], [[1.0]])
    theta_new, gamma_out, stats = mcce_iteration(theta, 1e9, 30, cfg(), obj, RngState(3))
    assert theta_new is theta
    assert gamma_out == 1e9
    assert stats["elite"] == 0


def test_mcce_gamma_star_nondecreasing():
    obj = make_benchmark("griewank", 3)
    theta = GaussianParams(np.full(3, 20.0), 25.0 * np.eye(3))
    rng = RngState(4)
    gamma_star = float("-inf")
    history = []
    for _ in range(30):
        theta, gamma_star, _ = mcce_iteration(theta, gamma_star, 200, cfg(eps=0.01), obj, rng)
        history.append(gamma_star)
    assert all(b >= a for a, b in zip(history, history[1:]))


def test_weight_scale_invariance_of_refit():
    # multiplying every weight by a positive constant cancels in both ratios
    from ceopt.baselines import _weighted_refit

    rng = np.random.default_rng(5)
    xs = rng.normal(size=(60, 4))
    w = rng.uniform(0.0, 1.0, size=60)
    w[rng.uniform(size=60) < 0.3] = 0.0
    mu_a, sig_a = _weighted_refit(xs, w)
    mu_b, sig_b = _weighted_refit(xs, 7.25 * w)
    assert mu_b == pytest.approx(mu_a, rel=1e-13)
    assert sig_b == pytest.approx(sig_a, rel=1e-13)


def test_mcce_objective_shift_invariance():
    # replacing H by H + constant shifts thresholds by the constant but
    # leaves the refit unchanged up to rounding of the shifted values
    base = make_benchmark("rastrigin", 4)
    shifted = ObjectiveFunction("shifted", 4, lambda x: base._fn(x) + 1000.0)
    theta = GaussianParams(np.full(4, 3.0), 9.0 * np.eye(4))
    a, ga, _ = mcce_iteration(theta, float("-inf"), 100, cfg(r=0.7), base, RngState(5))
    b, gb, _ = mcce_iteration(theta, float("-inf"), 100, cfg(r=0.7), shifted, RngState(5))
    assert gb == pytest.approx(ga + 1000.0, abs=1e-9)
    assert b.mu == pytest.approx(a.mu, rel=1e-9)
    assert b.sigma == pytest.approx(a.sigma, rel=1e-9, abs=1e-12)


def test_mcce_refit_symmetric_psd():
    obj = make_benchmark("salomon", 5)
    theta = GaussianParams(np.full(5, 4.0), 16.0 * np.eye(5))
    rng = RngState(6)
    gamma_star = float("-inf")
    for _ in range(10):
        theta, gamma_star, _ = mcce_iteration(theta, gamma_star, 300, cfg(), obj, rng)
        assert np.array_equal(theta.sigma, theta.sigma.T)
        assert np.linalg.eigvalsh(theta.sigma).min() >= -1e-10


# ---------------------------------------------------------------------------
# gmcce_iteration


def test_gmcce_alpha_one_reduces_to_batch_refit():
    obj = make_benchmark("griewank", 2)
    theta = GaussianParams(np.full(2, 10.0), 16.0 * np.eye(2))
    a, _ = gmcce_iteration(theta, 1, 150, cfg(alpha=Schedule.constant(1.0)), obj, RngState(7))
    b, _, _ = mcce_iteration(theta, float("-inf"), 150, cfg(eps=0.0), obj, RngState(7))
    assert np.array_equal(a.mu, b.mu)
    assert np.array_equal(a.sigma, b.sigma)


def test_gmcce_alpha_zero_is_identity():
    obj = make_benchmark("griewank", 2)
    theta = GaussianParams(np.full(2, 10.0), 16.0 * np.eye(2))
    new, _ = gmcce_iteration(theta, 1, 150, cfg(alpha=Schedule.constant(1e-300)), obj, RngState(8))
    # alpha -> 0: mu unchanged, so the drift term vanishes and sigma survives
    assert new.mu == pytest.approx(theta.mu, abs=1e-290)
    assert new.sigma == pytest.approx(theta.sigma, abs=1e-290)


def test_gmcce_half_alpha_matches_hand_arithmetic():
    # two-point batch, both elite (rho > 0.5 puts the threshold at the min);
    # the expected values below re-derive the printed update by hand
    obj = linear_objective()
    theta = GaussianParams([1.0], [[4.0]])
    n, r, alpha, rho = 2, 0.3, 0.5, 0.6
    probe = RngState(9)
    from ceopt.gaussian import sample_gaussian_batch

    xs = sample_gaussian_batch(theta, probe, n)
    hs = xs[:, 0]
    gamma = np.sort(hs)[math.ceil((1 - rho) * n) - 1]
    w = np.exp(r * (hs - hs.max()))
    w[hs < gamma] = 0.0
    elite_mean = float((w * hs).sum() / w.sum())
    mu1 = alpha * elite_mean + (1 - alpha) * 1.0
    scatter = float((w * (hs - mu1) ** 2).sum() / w.sum())
    sigma1 = alpha * scatter + (1 - alpha) * (4.0 + (1.0 - mu1) ** 2)

    new, stats = gmcce_iteration(
        theta, 3, n, cfg(rho=rho, r=r, alpha=Schedule.constant(alpha)), obj, RngState(9)
    )
    assert stats["elite"] == 2
    assert new.mu[0] == pytest.approx(mu1, rel=1e-12)
    assert new.sigma[0, 0] == pytest.approx(sigma1, rel=1e-12)


def test_gmcce_requires_alpha():
    obj = linear_objective()
    theta = GaussianParams([0.0], [[1.0]])
    with pytest.raises(ValueError):
        gmcce_iteration(theta, 1, 10, cfg(alpha=None), obj, RngState(10))


# ---------------------------------------------------------------------------
# run_batch


def test_run_batch_sample_accounting_exact():
    obj = make_benchmark("griewank", 2)
    theta0 = GaussianParams(np.full(2, 5.0), 4.0 * np.eye(2))
    c = cfg(n0=50, eta=1.1)
    run_batch("mcce", obj, c, theta0, RngState(11), max_evals=1000)
    expected, n = 0, 50
    while expected < 1000:
        expected += n
        n = math.ceil(1.1 * n)
    assert obj.n_evals == expected


def test_run_batch_trace_monotone_evals():
    obj = make_benchmark("griewank", 2)
    theta0 = GaussianParams(np.full(2, 5.0), 4.0 * np.eye(2))
    res = run_batch("gmcce", obj, cfg(alpha=Schedule.constant(0.3)), theta0, RngState(12), max_evals=2000)
    evals = [r.n_evals for r in res.records]
    assert evals == sorted(evals)
    assert all(r.gamma_prev is None and r.tcmp is None for r in res.records)


def test_run_batch_rejects_unknown_algorithm():
    obj = make_benchmark("griewank", 2)
    theta0 = GaussianParams(np.zeros(2), np.eye(2))
    with pytest.raises(ValueError):
        run_batch("cma", obj, cfg(), theta0, RngState(13), max_evals=100)


def test_monte_carlo_config_validation():
    with pytest.raises(ValueError):
        cfg(n0=0)
    with pytest.raises(ValueError):
        cfg(eta=0.9)
    with pytest.raises(ValueError):
        cfg(rho=1.5)
    with pytest.raises(ValueError):
        cfg(r=-1.0)
    with pytest.raises(ValueError):
        cfg(eps=-0.1)
