"""
Theoretical rate calculators.

All asymptotic "of the order of" statements are evaluated with their
unspecified constants set to 1, so the returned values are meant to be
compared up to bounded ratios, never for equality. Empty sums and empty
maxima evaluate to 0.

The regime of a polynomial problem is fixed by the effective ill-posedness
``p + gamma`` against -1/2:

* supercritical, ``gamma > -p - 1/2``: ordinary ill-posed rates with ``p`` replaced by ``p + gamma``;
* critical, ``gamma = -p - 1/2``: parametric rate up to a ``sqrt(log)`` factor;
* subcritical, ``-p - 1/2 - alpha < gamma < -p - 1/2``: self-regularised, parametric rate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import NonMonotoneError, OutOfScopeError
from .model import PriorSpec, TruthSpec
from .spectral import SpectralProblem

SUPERCRITICAL = "supercritical"
CRITICAL = "critical"
SUBCRITICAL = "subcritical"

REGIME_RTOL = 1e-12


@dataclass
class RateReport:
    regime: str
    rate: float
    exponent: float | None = None
    cutoff: int = 0
    terms: dict = field(default_factory=dict)
    branch: str | None = None
    notes: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "regime": self.regime,
            "rate": self.rate,
            "exponent": self.exponent,
            "cutoff": self.cutoff,
            "terms": dict(self.terms),
            "branch": self.branch,
            "notes": list(self.notes),
        }


@dataclass
class IndexSets:
    """Boolean membership masks over indices 1..N (position 0 is index 1)."""

    i_eps: np.ndarray
    i_sig: np.ndarray
    i_sig_eps: np.ndarray
    a_eps: float
    a_sig: float
    a_sig_eps: float

    @staticmethod
    def members(mask: np.ndarray) -> np.ndarray:
        return np.flatnonzero(mask) + 1


def is_critical(p: float, gamma: float, rtol: float = REGIME_RTOL) -> bool:
    edge = -p - 0.5
    return abs(gamma - edge) <= rtol * max(1.0, abs(edge))


def classify_regime(p: float, gamma: float, alpha: float | None = None) -> str:
    """Regime label; with ``alpha`` given, also enforce the subcritical lower limit."""
    if is_critical(p, gamma):
        return CRITICAL
    if gamma > -p - 0.5:
        return SUPERCRITICAL
    if alpha is not None and not math.isnan(alpha) and not gamma > -p - 0.5 - alpha:
        raise OutOfScopeError(
            f"gamma={gamma} <= -p-1/2-alpha={-p - 0.5 - alpha}: the noise-to-prior ratio is "
            "not increasing and the contraction rates do not apply"
        )
    return SUBCRITICAL


def _lambda(problem: SpectralProblem, prior, eps: float) -> np.ndarray:
    if isinstance(prior, PriorSpec):
        return prior.eigenvalues(problem.n, eps)
    lam = np.asarray(prior, dtype=float)
    if lam.shape != (problem.n,):
        raise ValueError(f"prior has {lam.size} eigenvalues, problem has {problem.n}")
    return lam


def _alpha(prior) -> float | None:
    if isinstance(prior, PriorSpec) and prior.lam is None:
        return prior.alpha
    return None


def noise_prior_ratio(problem: SpectralProblem, lam: np.ndarray) -> np.ndarray:
    """``sigma_i^2 / (lambda_i k_i^2)``; the prior dominates where this is below ``eps^-2``."""
    with np.errstate(divide="ignore"):
        return problem.sigma**2 / (lam * problem.k**2)


def _require_monotone(ratio: np.ndarray) -> None:
    steps = np.diff(ratio)
    bad = np.flatnonzero(steps < -1e-12 * np.abs(ratio[1:]))
    if bad.size:
        i = bad[0] + 1
        raise NonMonotoneError(
            f"sigma^2/(lambda k^2) decreases between indices {i} and {i + 1} "
            f"({ratio[i - 1]:.6g} -> {ratio[i]:.6g}); cutoff-based rates need an increasing "
            "ratio, use index_sets / plugin_rate_general for the set-based form"
        )


def _masked_sum(values: np.ndarray, mask: np.ndarray) -> float:
    return math.fsum(values[mask]) if mask.any() else 0.0


def _masked_max(values: np.ndarray, mask: np.ndarray) -> float:
    return float(values[mask].max()) if mask.any() else 0.0


def cutoff_index(problem: SpectralProblem, prior, eps: float) -> int:
    """Largest ``i`` with ``sigma_i^2 / k_i^2 <= eps^-2 lambda_i`` (0 if there is none)."""
    if not eps > 0:
        raise ValueError(f"eps must be positive, got {eps!r}")
    ratio = noise_prior_ratio(problem, _lambda(problem, prior, eps))
    _require_monotone(ratio)
    hits = np.flatnonzero(ratio <= eps**-2)
    return int(hits[-1] + 1) if hits.size else 0


def general_contraction_rate(problem: SpectralProblem, prior, beta: float, eps: float) -> RateReport:
    """Contraction rate for arbitrary spectra with an increasing noise-to-prior ratio.

    The squared rate is the sum of the variance term, the squared bias
    ``i_eps^(-2 beta)``, the prior tail beyond the cutoff and the saturation
    term. With an empty cutoff set the bias term is taken as 1.
    """
    if not beta > 0:
        raise ValueError(f"beta must be positive, got {beta!r}")
    lam = _lambda(problem, prior, eps)
    cut = cutoff_index(problem, lam, eps)
    i = problem.indices
    head = i <= cut
    ratio = noise_prior_ratio(problem, lam)
    terms = {
        "variance": eps**2 * _masked_sum(problem.sigma**2 / problem.k**2, head),
        "bias": float(cut) ** (-2.0 * beta) if cut else 1.0,
        "prior_tail": _masked_sum(lam, ~head),
        "saturation": eps**4 * _masked_max((ratio * i ** (-beta)) ** 2, head),
    }
    alpha = _alpha(prior)
    regime = classify_regime(problem.p, problem.gamma, alpha)
    return RateReport(regime, math.sqrt(math.fsum(terms.values())), None, cut, terms)


def _floor(x: float) -> int:
    # closed-form powers land a few ulps below exact integers
    return int(math.floor(x * (1.0 + 1e-12)))


def _tau_value(tau, eps: float) -> tuple[float, bool]:
    if callable(tau):
        return float(tau(eps)), False
    return float(tau), True


def polynomial_contraction_rate(alpha: float, tau, beta: float, p: float, gamma: float,
                                eps: float) -> RateReport:
    """Contraction rate for polynomial spectra, by regime.

    ``tau`` may be a constant or a rule ``eps -> tau_eps``; the exponent of
    ``eps`` is only reported for constant ``tau`` (log factors ignored).
    """
    if not alpha > 0 or not beta > 0:
        raise ValueError("alpha and beta must be positive")
    if not eps > 0:
        raise ValueError(f"eps must be positive, got {eps!r}")
    tau, constant = _tau_value(tau, eps)
    if not tau > 0:
        raise ValueError(f"tau must be positive, got {tau!r}")
    regime = classify_regime(p, gamma, alpha)
    pt = p + gamma
    u = eps**2 / tau**2
    notes = []
    if not u < 1:
        notes.append("tau^2 eps^-2 <= 1: prior scale assumption not met at this eps")
    if regime == CRITICAL:
        denom = 2.0 * alpha
        bias = u ** min(beta / denom, 1.0)
        log_term = math.log(tau / eps)
        if log_term <= 0:
            notes.append("log(tau/eps) <= 0, log factor clamped to 0")
        variance = eps * math.sqrt(max(log_term, 0.0))
        exponent = min(2.0 * min(beta / denom, 1.0), 1.0)
    else:
        denom = 1.0 + 2.0 * alpha + 2.0 * pt
        bias = u ** min(beta / denom, 1.0)
        if regime == SUPERCRITICAL:
            variance = tau * u ** (alpha / denom)
            exponent = min(2.0 * min(beta / denom, 1.0), 2.0 * alpha / denom)
        else:
            variance = eps
            exponent = min(2.0 * min(beta / denom, 1.0), 1.0)
    cutoff = _floor((tau**2 / eps**2) ** (1.0 / denom))
    return RateReport(regime, bias + variance, exponent if constant else None, cutoff,
                      {"bias": bias, "variance": variance}, notes=notes)


def minimax_rate(beta: float, p: float, gamma: float, eps: float) -> RateReport:
    """Minimax rate over the Sobolev ball; the cutoff is the projection estimator's ``i_1``."""
    if not beta > 0:
        raise ValueError(f"beta must be positive, got {beta!r}")
    if not 0 < eps < 1:
        raise ValueError(f"eps must lie in (0, 1), got {eps!r}")
    regime = classify_regime(p, gamma)
    if regime == SUPERCRITICAL:
        exponent = 2.0 * beta / (1.0 + 2.0 * beta + 2.0 * (p + gamma))
        rate = eps**exponent
    elif regime == CRITICAL:
        exponent = 1.0
        rate = eps * math.sqrt(math.log(1.0 / eps))
    else:
        exponent = 1.0
        rate = eps
    return RateReport(regime, rate, exponent, projection_cutoff(eps, beta, p, gamma),
                      {"minimax": rate})


def projection_cutoff(eps: float, beta: float, p: float, gamma: float) -> int:
    shift = p + gamma + 0.5
    if shift > 0 and not is_critical(p, gamma):
        return int(math.ceil(eps ** (-1.0 / (shift + beta))))
    return int(math.ceil(eps ** (-1.0 / beta)))


def projection_estimate(problem: SpectralProblem, y, eps: float, beta: float) -> np.ndarray:
    """Spectral cutoff estimator ``Y_i / k_i`` for ``i <= i_1``, zero beyond."""
    if not beta > 0:
        raise ValueError(f"beta must be positive, got {beta!r}")
    y = np.asarray(getattr(y, "y", y), dtype=float)
    cut = min(projection_cutoff(eps, beta, problem.p, problem.gamma), problem.n)
    est = np.zeros(problem.n)
    est[:cut] = y[:cut] / problem.k[:cut]
    return est


@dataclass(frozen=True)
class PriorChoice:
    """One rate-optimal prior prescription.

    ``tau_kind`` is ``"constant"`` or ``"rule"``. For rules, ``tau`` behaves as
    ``C eps^tau_exponent (log 1/eps)^log_power``; ``relation`` says whether the
    rule is an equality or a lower bound.
    """

    regime: str
    tau_kind: str
    alpha_condition: str
    alpha_bound: float | None
    tau_exponent: float
    relation: str
    achievable: bool
    log_power: float = 0.0

    def tau_rule(self, constant: float = 1.0) -> Callable[[float], float]:
        def rule(eps: float) -> float:
            return constant * eps**self.tau_exponent * math.log(1.0 / eps) ** self.log_power
        return rule


def optimal_prior(beta: float, p: float, gamma: float, alpha: float | None = None) -> list[PriorChoice]:
    """Prior parameters whose contraction rate matches the minimax rate.

    Returns the constant-``tau`` prescription and the ``tau(eps)`` rule for the
    regime of ``(p, gamma)``. The rule depends on ``alpha`` (default ``beta``);
    ``achievable`` is False when that ``alpha`` cannot reach the minimax rate.
    """
    if not beta > 0:
        raise ValueError(f"beta must be positive, got {beta!r}")
    a = beta if alpha is None else float(alpha)
    regime = classify_regime(p, gamma)
    pt = p + gamma
    in_scope = a > -p - 0.5 - gamma
    if regime == SUPERCRITICAL:
        const_ok = alpha is None or math.isclose(a, beta)
        bound = beta / 2.0 - (0.5 + pt)
        return [
            PriorChoice(regime, "constant", "alpha = beta", beta, 0.0, "equal", const_ok),
            PriorChoice(regime, "rule", "alpha >= beta/2 - (1/2 + p + gamma)", bound,
                        2.0 * (beta - a) / (1.0 + 2.0 * beta + 2.0 * pt), "equal", a >= bound),
        ]
    const_ok = (alpha is None or a <= beta) and in_scope
    if regime == CRITICAL:
        m = max(0.5, a / beta)
        return [
            PriorChoice(regime, "constant", "alpha <= beta", beta, 0.0, "equal", const_ok),
            PriorChoice(regime, "rule", "any alpha > 0", None, 1.0 - m, "at_least", True,
                        log_power=-0.5 * m),
        ]
    return [
        PriorChoice(regime, "constant", "alpha <= beta", beta, 0.0, "equal", const_ok),
        PriorChoice(regime, "rule", "alpha > -p - 1/2 - gamma", -p - 0.5 - gamma,
                    min(0.5, 1.0 - (1.0 + 2.0 * a + 2.0 * pt) / (2.0 * beta)), "at_least", in_scope),
    ]


def risk_terms(problem: SpectralProblem, prior, truth: TruthSpec | np.ndarray, eps: float) -> dict:
    """Closed-form expected posterior risk at the truth, split into its three sums.

    ``noise``: spread of the posterior mean caused by the data noise,
    ``bias``: squared shrinkage bias, ``spread``: posterior variance.
    """
    mu0 = truth.coeffs if isinstance(truth, TruthSpec) else np.asarray(truth, dtype=float)
    if mu0.shape != (problem.n,):
        raise ValueError("truth and problem lengths differ")
    if eps < 0:
        raise ValueError(f"eps must be non-negative, got {eps!r}")
    lam = _lambda(problem, prior, eps)
    noise_var = (eps * problem.sigma / problem.k) ** 2
    with np.errstate(divide="ignore", invalid="ignore"):
        s = noise_var / lam
        # t = s / (1 + s): fraction of the data discarded by the posterior mean
        t = np.where(s > 1.0, 1.0 / (1.0 + 1.0 / s), s / (1.0 + s))
        shrink = 1.0 / (1.0 + s)
    point_mass = lam == 0
    t = np.where(point_mass, 1.0, t)
    shrink = np.where(point_mass, 0.0, shrink)
    return {
        "noise": math.fsum(lam * t * shrink),
        "bias": math.fsum(mu0**2 * t**2),
        "spread": math.fsum(lam * t),
    }


def expected_risk(problem: SpectralProblem, prior, truth: TruthSpec | np.ndarray, eps: float) -> float:
    """``E_mu0 E(||mu - mu0||^2 | Y)`` in closed form."""
    return math.fsum(risk_terms(problem, prior, truth, eps).values())


def _set_functions(problem: SpectralProblem, lam: np.ndarray, eps: float, eps_sigma: float, c0: float):
    ratio = noise_prior_ratio(problem, lam)
    sig2 = problem.sigma**2
    with np.errstate(divide="ignore"):
        floor_ratio = c0 * eps_sigma / (lam * problem.k**2)
    thr = eps**-2

    def i_eps(a):
        return ratio > a * thr

    def i_sig(a):
        return sig2 < a * c0 * eps_sigma

    def i_sig_eps(a):
        return floor_ratio > a * thr

    return i_eps, i_sig, i_sig_eps


def index_sets(problem: SpectralProblem, prior, eps: float, eps_sigma: float, c0: float,
               a_eps: float = 1.0, a_sig: float = 1.0, a_sig_eps: float = 1.0) -> IndexSets:
    """Index sets where the prior, the variance floor, or both dominate."""
    if not c0 > 0:
        raise ValueError(f"c0 must be positive, got {c0!r}")
    if eps_sigma < 0:
        raise ValueError(f"eps_sigma must be non-negative, got {eps_sigma!r}")
    if not eps > 0:
        raise ValueError(f"eps must be positive, got {eps!r}")
    i_eps, i_sig, i_sig_eps = _set_functions(problem, _lambda(problem, prior, eps), eps, eps_sigma, c0)
    return IndexSets(i_eps(a_eps), i_sig(a_sig), i_sig_eps(a_sig_eps), a_eps, a_sig, a_sig_eps)


def plugin_rate_general(problem: SpectralProblem, prior, beta: float, eps: float,
                        eps_sigma: float, c0: float) -> RateReport:
    """Contraction rate when the noise variances are replaced by a floored plug-in.

    Uses the four-term form when ``I_sigma(2/3)`` is contained in ``I_eps(2)``
    (``branch="simplified"``), and the full six-term form otherwise.
    """
    if not beta > 0:
        raise ValueError(f"beta must be positive, got {beta!r}")
    if not c0 > 0:
        raise ValueError(f"c0 must be positive, got {c0!r}")
    if eps_sigma < 0:
        raise ValueError(f"eps_sigma must be non-negative, got {eps_sigma!r}")
    lam = _lambda(problem, prior, eps)
    ratio = noise_prior_ratio(problem, lam)
    _require_monotone(ratio)
    i_eps, i_sig, i_sig_eps = _set_functions(problem, lam, eps, eps_sigma, c0)
    i = problem.indices
    inv_k2 = problem.k**-2
    noise = problem.sigma**2 * inv_k2
    decay = i ** (-2.0 * beta)
    sat_noise = (ratio * i ** (-beta)) ** 2
    simplified = not np.any(i_sig(2.0 / 3.0) & ~i_eps(2.0))
    if simplified:
        terms = {
            "variance": eps**2 * _masked_sum(noise, ~i_eps(2.0)),
            "prior_tail": _masked_sum(lam, i_eps(2.0)),
            "saturation": eps**4 * _masked_max(sat_noise, ~i_eps(1.0)),
            "bias": _masked_max(decay, i_eps(1.0)),
        }
    else:
        with np.errstate(divide="ignore"):
            sat_floor = (eps_sigma * i ** (-beta) / (problem.k**2 * lam)) ** 2
        floor_head = i_sig(2.0) & ~i_sig_eps(1.0 / 3.0)
        floor_tail = i_sig(2.0) & i_sig_eps(1.0 / 3.0)
        terms = {
            "variance": eps**2 * _masked_sum(noise, ~i_eps(2.0) | i_sig(2.0)),
            "floor_variance": eps**2 * c0 * eps_sigma * _masked_sum(inv_k2, floor_head),
            "prior_tail": _masked_sum(lam, i_eps(2.0 / 3.0)),
            "floor_prior_tail": _masked_sum(lam, floor_tail),
            "saturation": eps**4 * max(_masked_max(sat_noise, ~i_eps(1.0)),
                                       _masked_max(sat_floor, ~i_sig_eps(1.0))),
            "bias": _masked_max(decay, i_eps(1.0) & i_sig_eps(1.0)),
        }
    regime = classify_regime(problem.p, problem.gamma, _alpha(prior))
    cut = int(np.count_nonzero(~i_eps(1.0)))
    return RateReport(regime, math.sqrt(math.fsum(terms.values())), None, cut, terms,
                      branch="simplified" if simplified else "full")


def plugin_threshold(alpha: float, tau: float, p: float, gamma: float, eps: float,
                     constant: float = 1.0) -> float:
    """Largest variance-estimation error that leaves the polynomial rate unchanged."""
    return constant * (eps**2 / tau**2) ** (-gamma / (alpha + 0.5 + p + gamma))


def plugin_rate_polynomial(alpha: float, tau, beta: float, p: float, gamma: float, eps: float,
                           eps_sigma: float, constant: float = 1.0) -> RateReport:
    """Plug-in contraction rate for polynomial spectra with decaying noise (``gamma < 0``).

    ``constant`` is the unspecified constant in the branch threshold.
    """
    if not gamma < 0:
        raise OutOfScopeError(f"plug-in polynomial rates cover gamma < 0 only, got gamma={gamma}")
    if not eps_sigma > 0:
        raise ValueError(f"eps_sigma must be positive, got {eps_sigma!r}")
    tau_v, _ = _tau_value(tau, eps)
    threshold = plugin_threshold(alpha, tau_v, p, gamma, eps, constant)
    if eps_sigma < threshold:
        report = polynomial_contraction_rate(alpha, tau, beta, p, gamma, eps)
        report.branch = "unaffected"
        report.terms["threshold"] = threshold
        return report
    regime = classify_regime(p, gamma, alpha)
    pt = p + gamma
    w = tau_v**2 / (eps_sigma * eps**2)
    e = 1.0 + 2.0 * alpha + 2.0 * p
    log_power = 1.0 if is_critical(p, gamma) else 0.0
    notes = []
    log_term = math.log(1.0 / eps_sigma)
    if log_power and log_term <= 0:
        notes.append("eps_sigma >= 1, log factor clamped to 0")
    terms = {
        "variance": eps**2 * max(log_term, 0.0) ** log_power,
        "prior_tail": tau_v**2 * w ** (-2.0 * alpha / e),
        "bias": w ** (-2.0 * beta / e),
        "saturation": eps**4 * tau_v**-4 * eps_sigma ** (max(1.0 + 2.0 * alpha + 2.0 * pt - beta, 0.0) / gamma),
        "threshold": threshold,
    }
    rate = math.sqrt(math.fsum(v for key, v in terms.items() if key != "threshold"))
    cutoff = _floor(w ** (1.0 / e))
    return RateReport(regime, rate, None, cutoff, terms, branch="affected", notes=notes)
