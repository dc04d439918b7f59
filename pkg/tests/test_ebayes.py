import math

import numpy as np
import pytest

from oracles import q_direct
from seqinv.ebayes import (eb_posterior, eb_tau, eb_tau_asymptotic, marginal_gradient, marginal_objective,
                           prior_shape)
from seqinv.model import PriorSpec, paper_truth, simulate
from seqinv.posterior import conjugate_posterior, posterior_l2_risk
from seqinv.spectral import SpectralProblem


def unit():
    return SpectralProblem(np.array([1.0]), np.array([1.0]))


def volterra_data(n=2000, gamma=0.5, eps=1e-3, seed=0):
    prob = SpectralProblem.volterra(n, gamma)
    return prob, simulate(prob, paper_truth(n), eps, seed)


def test_objective_hand_value():
    assert marginal_objective(1.0, np.zeros(1), unit(), 0.0, 1.0) == pytest.approx(math.log(2), rel=1e-15)
    with pytest.raises(ValueError):
        marginal_objective(0.0, np.zeros(1), unit(), 0.0, 1.0)
    with pytest.raises(ValueError):
        marginal_gradient(-1.0, np.zeros(1), unit(), 0.0, 1.0)


def test_objective_matches_direct_sum():
    prob, obs = volterra_data()
    for tau in (1e-3, 0.5, 20.0):
        got = marginal_objective(tau, obs, prob, 1.0, 1e-3)
        want = q_direct(tau, obs.y, prob.k, prob.sigma, 1.0, 1e-3)
        assert got == pytest.approx(want, rel=1e-12, abs=1e-12)
    assert marginal_objective(1e12, obs, prob, 1.0, 1e-3) > marginal_objective(1e6, obs, prob, 1.0, 1e-3)


@pytest.mark.parametrize("tau", [0.1, 1.0, 10.0])
def test_gradient_matches_finite_differences(tau):
    prob, obs = volterra_data(n=300)
    h = tau * 1e-5
    fd = (marginal_objective(tau + h, obs, prob, 1.0, 1e-3) - marginal_objective(tau - h, obs, prob, 1.0, 1e-3)) / (2 * h)
    assert marginal_gradient(tau, obs, prob, 1.0, 1e-3) == pytest.approx(fd, rel=1e-6)


def test_gradient_positive_without_data():
    prob = SpectralProblem.volterra(50)
    assert all(marginal_gradient(t, np.zeros(50), prob, 1.0, 1e-2) > 0 for t in np.logspace(-6, 6, 25))
    res = eb_tau(np.zeros(50), prob, 1.0, 1e-2)
    assert not res.converged and res.tau_hat == pytest.approx(1e-8)


def test_gradient_sign_change_brackets_grid_minimum():
    prob, obs = volterra_data(n=500)
    grid = np.logspace(-4, 4, 1000)
    q = [marginal_objective(t, obs, prob, 1.0, 1e-3) for t in grid]
    j = int(np.argmin(q))
    assert marginal_gradient(grid[j - 1], obs, prob, 1.0, 1e-3) < 0 < marginal_gradient(grid[j + 1], obs, prob, 1.0, 1e-3)


def test_eb_tau_against_grid_search():
    prob, obs = volterra_data(eps=1e-4, seed=3)
    res = eb_tau(obs, prob, 1.0, 1e-4)
    grid = np.logspace(-8, 8, 10_000)
    q = [marginal_objective(t, obs, prob, 1.0, 1e-4) for t in grid]
    best = grid[int(np.argmin(q))]
    assert res.converged and res.bracket[0] < res.tau_hat < res.bracket[1]
    assert res.tau_hat == pytest.approx(best, rel=0.01)
    assert res.objective <= min(marginal_objective(t, obs, prob, 1.0, 1e-4) for t in res.bracket)
    assert res.objective <= min(q) + 1e-9


def test_eb_tau_scaling_identity():
    prob, obs = volterra_data(seed=4)
    base = eb_tau(obs, prob, 1.0, 1e-3)
    scaled = eb_tau(obs, prob, 1.0, 1e-3, lambda0=7.0 * prior_shape(prob.n, 1.0))
    assert scaled.tau_hat == pytest.approx(base.tau_hat / 7.0, rel=1e-5)


def test_eb_tau_order_invariant():
    prob, obs = volterra_data(n=800, seed=5)
    perm = np.random.default_rng(0).permutation(prob.n)
    shuffled = SpectralProblem(prob.k[perm], prob.sigma[perm])
    a = eb_tau(obs, prob, 1.0, 1e-3)
    b = eb_tau(obs.y[perm], shuffled, 1.0, 1e-3, lambda0=prior_shape(prob.n, 1.0)[perm])
    assert b.tau_hat == pytest.approx(a.tau_hat, rel=1e-10)


def test_eb_tau_validation():
    prob, obs = volterra_data(n=20)
    with pytest.raises(ValueError):
        eb_tau(obs, prob, 1.0, 1e-3, bracket=(1.0, 1.0))
    with pytest.raises(ValueError):
        eb_tau(obs, prob, 1.0, 1e-3, bracket=(0.0, 1.0))


def test_asymptotic_exponents():
    assert eb_tau_asymptotic(1, 1, 1, 0.5).exponent == 0.0
    rough = eb_tau_asymptotic(1, 2, 1, 0.5)
    assert rough.exponent == pytest.approx(2 / 7) and rough.branch == "rough_prior" and rough.valid
    smooth = eb_tau_asymptotic(3, 1, 1, 0.5)
    assert smooth.exponent == pytest.approx(-8 / 6)
    bad = eb_tau_asymptotic(0.2, 1, 1, -2.0)
    assert not bad.alpha_condition and not bad.valid


def test_eb_posterior_composition():
    prob, obs = volterra_data(seed=6)
    post, res = eb_posterior(obs, prob, 1.0, 1e-3, tau_hat=0.49)
    direct = conjugate_posterior(prob, PriorSpec(1.0, 0.7), 1e-3, obs)
    assert res is None
    assert np.allclose(post.mean, direct.mean, rtol=1e-14) and np.allclose(post.variance, direct.variance, rtol=1e-14)
    post, res = eb_posterior(obs, prob, 1.0, 1e-3)
    assert res.converged


def test_eb_risk_decreases_with_eps():
    prob = SpectralProblem.volterra(2000, 0.5)
    truth = paper_truth()
    means = []
    for eps in (1e-3, 1e-4, 1e-5):
        risks = [posterior_l2_risk(eb_posterior(simulate(prob, truth, eps, (7, r)), prob, 1.0, eps)[0], truth)
                 for r in range(50)]
        means.append(np.mean(risks))
    assert means[0] > means[1] > means[2]


def test_prior_variances_cross_near_common_index():
    # sqrt(lambda_i) under the EB scale for different alpha meet in a common window
    prob = SpectralProblem.volterra(2000, 0.5)
    eps = 10 ** -6.5
    obs = simulate(prob, paper_truth(), eps, 11)
    i = np.arange(1, 2001)
    fits = {a: eb_tau(obs, prob, a, eps, bracket=(1e-8, 1e16)) for a in (1, 3, 5)}
    assert all(f.converged for f in fits.values())
    # the default bracket is too narrow for alpha = 5 and says so
    assert not eb_tau(obs, prob, 5, eps).converged
    curves = {a: np.sqrt(f.tau_hat * prior_shape(2000, a)) for a, f in fits.items()}
    crossings = []
    for a, b in ((1, 3), (1, 5), (3, 5)):
        diff = np.sign(curves[a] - curves[b])
        crossings.append(i[np.flatnonzero(diff[1:] != diff[:-1])[0] + 1])
    assert max(crossings) <= 2 * min(crossings)
    assert 10 <= min(crossings) <= 200


def test_result_serialises():
    prob, obs = volterra_data(n=50)
    d = eb_tau(obs, prob, 1.0, 1e-3).to_dict()
    assert isinstance(d["bracket"], list) and d["tau_hat"] > 0
    assert eb_tau_asymptotic(1, 1, 1, 0.5).to_dict()["valid"] is True
