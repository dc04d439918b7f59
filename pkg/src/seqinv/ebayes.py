"""
Empirical-Bayes choice of the prior scale.

The marginal law of ``Y_i`` under the prior ``lambda_i = tau * lambda0_i`` with
``lambda0_i = i^(-2 alpha - 1)`` is ``N(0, k_i^2 lambda0_i tau + eps^2 sigma_i^2)``.
Minus twice its log-likelihood (up to constants) is

    q(tau) = sum_i y_i^2 / (k_i^2 lambda0_i tau + eps^2 sigma_i^2)
             + log(k_i^2 lambda0_i tau + eps^2 sigma_i^2)

and ``tau_hat`` minimises it. Note that ``tau`` here multiplies the prior
variances directly; the prior scale of :class:`PriorSpec` is ``sqrt(tau_hat)``.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy.optimize import minimize_scalar

from .model import Observations, PriorSpec
from .posterior import PosteriorSummary, conjugate_posterior
from .spectral import SpectralProblem

DEFAULT_BRACKET = (1e-8, 1e8)
DEFAULT_RTOL = 1e-6
GRID_POINTS = 200


@dataclass(frozen=True)
class EbResult:
    tau_hat: float
    objective: float
    bracket: tuple
    iterations: int
    converged: bool

    def to_dict(self) -> dict:
        d = asdict(self)
        d["bracket"] = list(self.bracket)
        return d


@dataclass(frozen=True)
class EbAsymptotic:
    """Predicted behaviour ``tau_hat ~ eps^exponent`` and the conditions under which it holds."""

    exponent: float
    branch: str
    alpha_condition: bool
    beta_condition: bool

    @property
    def valid(self) -> bool:
        return self.alpha_condition and self.beta_condition

    def to_dict(self) -> dict:
        return {**asdict(self), "valid": self.valid}


def prior_shape(n: int, alpha: float) -> np.ndarray:
    """``lambda0_i = i^(-2 alpha - 1)``."""
    i = np.arange(1, n + 1, dtype=float)
    return i ** (-2.0 * alpha - 1.0)


def _parts(y, problem: SpectralProblem, alpha: float, eps: float, lambda0=None):
    y = np.asarray(y.y if isinstance(y, Observations) else y, dtype=float)
    if y.shape != (problem.n,):
        raise ValueError(f"data has {y.size} entries, problem has {problem.n}")
    if not eps > 0:
        raise ValueError(f"eps must be positive, got {eps!r}")
    lam0 = prior_shape(problem.n, alpha) if lambda0 is None else np.asarray(lambda0, dtype=float)
    return y**2, problem.k**2 * lam0, (eps * problem.sigma) ** 2


def _check_tau(tau: float) -> None:
    if not tau > 0:
        raise ValueError(f"tau must be positive, got {tau!r}")


def marginal_objective(tau: float, y, problem: SpectralProblem, alpha: float, eps: float,
                       lambda0=None) -> float:
    """``q(tau)``, summed with compensated summation."""
    _check_tau(tau)
    y2, a, b = _parts(y, problem, alpha, eps, lambda0)
    d = a * tau + b
    return math.fsum(y2 / d) + math.fsum(np.log(d))


def marginal_gradient(tau: float, y, problem: SpectralProblem, alpha: float, eps: float,
                      lambda0=None) -> float:
    """Analytic derivative ``q'(tau)``."""
    _check_tau(tau)
    y2, a, b = _parts(y, problem, alpha, eps, lambda0)
    d = a * tau + b
    return math.fsum(a / d - y2 * a / d**2)


def eb_tau(y, problem: SpectralProblem, alpha: float, eps: float,
           bracket: tuple[float, float] = DEFAULT_BRACKET, rtol: float = DEFAULT_RTOL,
           lambda0=None) -> EbResult:
    """Marginal-likelihood estimate of the prior variance scale.

    The search runs on ``log tau``: a coarse log grid locates the basin, then a
    bounded Brent search refines it to relative tolerance ``rtol``. When the
    minimum sits at a bracket endpoint that endpoint is returned with
    ``converged=False``.
    """
    lo, hi = (float(v) for v in bracket)
    if not (lo > 0 and hi > lo):
        raise ValueError(f"bracket must satisfy 0 < lo < hi, got {bracket!r}")
    if not rtol > 0:
        raise ValueError(f"rtol must be positive, got {rtol!r}")
    y2, a, b = _parts(y, problem, alpha, eps, lambda0)

    def q(log_tau: float) -> float:
        d = a * math.exp(log_tau) + b
        return math.fsum(y2 / d) + math.fsum(np.log(d))

    grid = np.linspace(math.log(lo), math.log(hi), GRID_POINTS)
    values = [q(t) for t in grid]
    j = int(np.argmin(values))
    iterations = GRID_POINTS
    if j == 0 or j == GRID_POINTS - 1:
        return EbResult(float(math.exp(grid[j])), float(values[j]), (lo, hi), iterations, False)
    res = minimize_scalar(q, bounds=(grid[j - 1], grid[j + 1]), method="bounded",
                          options={"xatol": rtol / 4})
    iterations += int(res.nfev)
    log_tau, value = float(res.x), float(res.fun)
    if values[j] < value:
        log_tau, value = float(grid[j]), float(values[j])
    return EbResult(math.exp(log_tau), value, (lo, hi), iterations, bool(res.success))


def eb_tau_asymptotic(alpha: float, beta: float, p: float, gamma: float) -> EbAsymptotic:
    """Exponent ``e`` in ``tau_hat ~ eps^e`` for a truth of smoothness ``beta``."""
    pt = p + gamma
    if alpha + 0.5 >= beta:
        exponent = -4.0 * (alpha - beta) / (1.0 + 2.0 * pt + 2.0 * beta)
        branch = "smooth_prior"
    else:
        exponent = 1.0 / (1.0 + pt + alpha)
        branch = "rough_prior"
    return EbAsymptotic(exponent, branch,
                        alpha > max(-pt - 0.5, 0.0),
                        beta + alpha + 1.0 + 2.0 * pt > 0)


def eb_posterior(y, problem: SpectralProblem, alpha: float, eps: float,
                 tau_hat: float | None = None, **search) -> tuple[PosteriorSummary, EbResult | None]:
    """Posterior with the prior variance scale set to ``tau_hat``.

    ``tau_hat`` is estimated with :func:`eb_tau` unless given; the returned
    :class:`EbResult` is None in that case.
    """
    result = None
    if tau_hat is None:
        result = eb_tau(y, problem, alpha, eps, **search)
        tau_hat = result.tau_hat
    _check_tau(tau_hat)
    prior = PriorSpec(alpha=alpha, tau=math.sqrt(tau_hat))
    return conjugate_posterior(problem, prior, eps, y), result
