"""Independent reference implementations used by several test modules."""

import math

import numpy as np
from scipy.stats import ortho_group


def dense_conditioning(k, sigma, lam, eps, y, seed=0):
    """Condition a rotated joint Gaussian of (mu, Y) with full matrices.

    The coefficients are rotated by a random orthogonal matrix so that prior
    and forward operator are dense, the textbook Gaussian conditioning formula
    is applied, and the result is rotated back.
    """
    n = len(k)
    u = ortho_group.rvs(n, random_state=seed) if n > 1 else np.eye(1)
    prior_cov = u @ np.diag(lam) @ u.T
    fwd = np.diag(k) @ u.T
    noise_cov = np.diag((eps * np.asarray(sigma)) ** 2)
    gain = prior_cov @ fwd.T @ np.linalg.inv(fwd @ prior_cov @ fwd.T + noise_cov)
    mean = gain @ y
    cov = prior_cov - gain @ fwd @ prior_cov
    return u.T @ mean, np.diag(u.T @ cov @ u)


def risk_direct(k, sigma, lam, eps, mu0):
    """Expected posterior risk from the textbook bias-variance decomposition."""
    k, sigma, lam, mu0 = map(np.asarray, (k, sigma, lam, mu0))
    w = lam * k / (lam * k**2 + eps**2 * sigma**2)  # posterior-mean weight on Y
    post_var = lam - w * k * lam
    bias2 = (w * k - 1.0) ** 2 * mu0**2
    noise = w**2 * eps**2 * sigma**2
    return math.fsum(post_var + bias2 + noise)


def q_direct(tau, y, k, sigma, alpha, eps):
    total = 0.0
    for i, (yi, ki, si) in enumerate(zip(y, k, sigma), start=1):
        d = ki * ki * i ** (-2.0 * alpha - 1.0) * tau + eps * eps * si * si
        total += yi * yi / d + math.log(d)
    return total
