"""
Conjugate Gaussian posterior in sequence space.

With ``Y_i ~ N(k_i mu_i, eps^2 sigma_i^2)`` and ``mu_i ~ N(0, lambda_i)`` the
posterior factorises over indices. Writing ``s_i = eps^2 sigma_i^2 / (lambda_i k_i^2)``
for the noise-to-signal ratio, the posterior mean is ``(Y_i / k_i) / (1 + s_i)``
and the variance ``lambda_i s_i / (1 + s_i)``. This form stays finite when
``k_i^2`` is tiny and the naive denominator ``lambda_i k_i^2 + eps^2 sigma_i^2``
would lose all precision.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import norm

from .model import STREAM_POSTERIOR, Observations, PriorSpec, Seed, TruthSpec, make_rng
from .spectral import BasisKind, SpectralProblem, basis_block


@dataclass(frozen=True)
class PosteriorSummary:
    mean: np.ndarray
    variance: np.ndarray
    eps: float

    @property
    def n(self) -> int:
        return self.mean.size


@dataclass(frozen=True)
class CredibleBands:
    x: np.ndarray
    mean: np.ndarray
    lower: np.ndarray
    upper: np.ndarray


def _prior_lambda(problem: SpectralProblem, prior, eps: float) -> np.ndarray:
    if isinstance(prior, PriorSpec):
        return prior.eigenvalues(problem.n, eps)
    lam = np.asarray(prior, dtype=float)
    if lam.shape != (problem.n,):
        raise ValueError(f"prior has {lam.size} eigenvalues, problem has {problem.n}")
    return lam


def _data(y) -> np.ndarray:
    return np.asarray(y.y if isinstance(y, Observations) else y, dtype=float)


def conjugate_posterior(problem: SpectralProblem, prior, eps: float, y) -> PosteriorSummary:
    """Per-index posterior mean and variance.

    ``prior`` is a :class:`PriorSpec` or an explicit eigenvalue array. A zero
    prior eigenvalue is a point mass at 0 and yields ``(0, 0)``; ``eps = 0``
    gives the noiseless inversion ``(Y_i / k_i, 0)``.
    """
    y = _data(y)
    if y.shape != (problem.n,):
        raise ValueError(f"data has {y.size} entries, problem has {problem.n}")
    if eps < 0 or math.isnan(eps):
        raise ValueError(f"eps must be non-negative, got {eps!r}")
    lam = _prior_lambda(problem, prior, eps)
    if np.any(lam < 0):
        raise ValueError("prior eigenvalues must be non-negative")
    inverse = y / problem.k
    if eps == 0:
        mean = np.where(lam > 0, inverse, 0.0)
        return PosteriorSummary(mean, np.zeros(problem.n), 0.0)
    point_mass = lam == 0
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        noise_var = (eps * problem.sigma / problem.k) ** 2
        s = noise_var / lam
        shrink = 1.0 / (1.0 + s)
        mean = np.where(s > 1.0, y / (problem.k * (1.0 + s)), inverse * shrink)
        # lambda * s / (1 + s); the s > 1 branch stays exact when s overflows
        variance = np.where(s > 1.0, lam / (1.0 + 1.0 / s), noise_var * shrink)
    mean = np.where(point_mass, 0.0, mean)
    variance = np.where(point_mass, 0.0, variance)
    return PosteriorSummary(mean, variance, float(eps))


def _naive_posterior(k, sigma, lam, eps, y):
    denom = lam * k**2 + eps**2 * sigma**2
    return y * k * lam / denom, sigma**2 * lam / (lam * k**2 / eps**2 + sigma**2)


def reconstruct(coeffs, x_grid) -> np.ndarray:
    """Function values ``sum_i coeffs_i e_i(x)`` on the grid."""
    c = np.asarray(coeffs, dtype=float)
    block = basis_block(BasisKind.INPUT, c.size, x_grid)
    return c @ block


def sample_posterior(summary: PosteriorSummary, draws: int, seed: Seed) -> np.ndarray:
    """(draws, N) independent coefficient draws from the posterior."""
    if int(draws) != draws or draws < 1:
        raise ValueError(f"draws must be a positive integer, got {draws!r}")
    z = make_rng(seed, STREAM_POSTERIOR).standard_normal((int(draws), summary.n))
    return summary.mean + np.sqrt(summary.variance) * z


def credible_bands(summary: PosteriorSummary, x_grid, level: float = 0.95) -> CredibleBands:
    """Pointwise Gaussian credible band for ``mu(x)`` at each grid point."""
    if not 0.0 < level < 1.0:
        raise ValueError(f"level must lie in (0, 1), got {level!r}")
    x = np.asarray(x_grid, dtype=float).ravel()
    block = basis_block(BasisKind.INPUT, summary.n, x)
    centre = summary.mean @ block
    spread = np.sqrt(np.maximum(summary.variance @ block**2, 0.0))
    z = norm.ppf(0.5 * (1.0 + level))
    return CredibleBands(x, centre, centre - z * spread, centre + z * spread)


def posterior_l2_risk(summary: PosteriorSummary, truth: TruthSpec | np.ndarray) -> float:
    """Posterior expected squared L2 distance to the truth, ``sum_i v_i + (m_i - mu_0,i)^2``."""
    mu0 = truth.coeffs if isinstance(truth, TruthSpec) else np.asarray(truth, dtype=float)
    if mu0.shape != summary.mean.shape:
        raise ValueError("truth and posterior lengths differ")
    return math.fsum(summary.variance + (summary.mean - mu0) ** 2)
