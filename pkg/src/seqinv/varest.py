"""
Noise-variance estimation from repeated observations.

With ``m`` replicates ``Y_ij ~ N(k_i mu_i, eps0^2 sigma_i^2)`` the sample
variance ``s_i^2`` satisfies ``(m-1) s_i^2 / (eps0^2 sigma_i^2) ~ chi2(m-1)``.
The plug-in keeps ``s_i^2`` for ``i <= M``, drops it beyond, and floors the
result at ``c0 * eps_sigma``.

Power-law helpers take ``c2`` as the bound on the variances themselves,
``sigma_i^2 <= c2 * i^(2 gamma)``; for ``sigma_i = 2 i^gamma`` pass ``c2 = 4``.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .errors import NoFiniteTruncationError, OutOfScopeError


@dataclass(frozen=True)
class VarianceEstimate:
    s2: np.ndarray
    hat: np.ndarray
    tilde: np.ndarray
    m: int
    M: int
    eps_sigma: float
    c0: float

    @property
    def floor(self) -> float:
        return self.c0 * self.eps_sigma

    def rows(self):
        """``(i, s2, hat, tilde)`` tuples for tabular output."""
        for i, row in enumerate(zip(self.s2, self.hat, self.tilde), start=1):
            yield (i, *map(float, row))


@dataclass(frozen=True)
class ChiSquareTail:
    upper: float
    lower: float
    bound: float


@dataclass(frozen=True)
class ConsistencyBound:
    bound: float
    raw: float
    ratio: float
    condition_ok: bool

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class TruncationPlan:
    M: int
    eps_sigma: float
    m_eps2: float
    log_ratio: float

    @property
    def diagnostics_ok(self) -> bool:
        return self.m_eps2 > 1.0 and self.log_ratio < 1.0

    def to_dict(self) -> dict:
        return {**asdict(self), "diagnostics_ok": self.diagnostics_ok}


def sample_stats(replicates) -> tuple[np.ndarray, np.ndarray]:
    """Row means and unbiased (divisor ``m - 1``) variances, two-pass."""
    x = np.asarray(replicates, dtype=float)
    if x.ndim != 2:
        raise ValueError("replicates must be an (N, m) matrix")
    m = x.shape[1]
    if m < 2:
        raise ValueError(f"need at least two replicates, got m={m}")
    means = x.mean(axis=1)
    s2 = ((x - means[:, None]) ** 2).sum(axis=1) / (m - 1)
    return means, s2


def truncated_estimator(s2, M: int, eps_sigma: float, c0: float, m: int = 0) -> VarianceEstimate:
    """Plug-in ``max(c0 eps_sigma, s_i^2 1{i <= M})``."""
    s2 = np.asarray(s2, dtype=float)
    if int(M) != M or M < 0:
        raise ValueError(f"M must be a non-negative integer, got {M!r}")
    if not c0 > 0 or not eps_sigma > 0:
        raise ValueError("c0 and eps_sigma must be positive")
    if np.any(s2 < 0):
        raise ValueError("sample variances must be non-negative")
    M = int(M)
    hat = s2.copy()
    hat[M:] = 0.0
    tilde = np.maximum(hat, c0 * eps_sigma)
    return VarianceEstimate(s2, hat, tilde, int(m), M, float(eps_sigma), float(c0))


def min_truncation(eps_sigma: float, c0: float, sigma=None, gamma: float | None = None,
                   c2: float | None = None) -> int:
    """Smallest ``M`` with ``sigma_i^2 <= c0 eps_sigma`` for every ``i > M``.

    Pass either the noise standard deviations ``sigma`` (scanned over the
    stored indices) or a power law ``(gamma, c2)`` with ``sigma_i^2 <= c2 i^(2 gamma)``.
    """
    if not c0 > 0 or not eps_sigma > 0:
        raise ValueError("c0 and eps_sigma must be positive")
    threshold = c0 * eps_sigma
    if sigma is not None:
        sig2 = np.asarray(sigma, dtype=float) ** 2
        above = np.flatnonzero(sig2 > threshold)
        if gamma is not None and gamma >= 0 and above.size:
            raise NoFiniteTruncationError(
                f"non-decaying noise (gamma={gamma}) exceeds the floor {threshold:.6g}")
        return int(above[-1] + 1) if above.size else 0
    if gamma is None or c2 is None:
        raise ValueError("give either sigma or both gamma and c2")
    if not c2 > 0:
        raise ValueError(f"c2 must be positive, got {c2!r}")
    if gamma >= 0:
        if gamma == 0 and c2 <= threshold:
            return 0
        raise NoFiniteTruncationError(
            f"sigma_i^2 <= {c2} i^{2 * gamma} never falls below {threshold:.6g} for all large i")
    edge = (threshold / c2) ** (1.0 / (2.0 * gamma))
    return max(math.ceil(edge) - 1, 0)


def chi_square_tail(d: int, weights, x: float) -> ChiSquareTail:
    """Deviation thresholds for ``Z = sum_i a_i (X_i^2 - 1)`` with ``X_i`` iid standard normal.

    ``P(Z >= upper) <= exp(-x)`` and ``P(Z <= -lower) <= exp(-x)``. A scalar
    weight is repeated ``d`` times.
    """
    if int(d) != d or d < 1:
        raise ValueError(f"d must be a positive integer, got {d!r}")
    a = np.broadcast_to(np.asarray(weights, dtype=float), (int(d),))
    if np.any(a < 0):
        raise ValueError("weights must be non-negative")
    if not x >= 0:
        raise ValueError(f"x must be non-negative, got {x!r}")
    l2 = math.sqrt(math.fsum(a**2))
    linf = float(a.max())
    root = math.sqrt(x)
    return ChiSquareTail(2.0 * l2 * root + 2.0 * linf * x, 2.0 * l2 * root, math.exp(-x))


def consistency_bound(m: int, M: int, eps_sigma: float, c0: float,
                      c_sigma: float | None = None, c2: float | None = None) -> ConsistencyBound:
    """Lower bound on ``P(|sigma_hat_i^2 - sigma_i^2| <= c0 eps_sigma for all i)``.

    ``c_sigma`` defaults to ``c2``. The bound is computed even when
    ``c0 eps_sigma / c_sigma > 1/2``; ``condition_ok`` reports that case.
    """
    if c_sigma is None:
        c_sigma = c2
    if c_sigma is None or not c_sigma > 0:
        raise ValueError("c_sigma (or c2) must be given and positive")
    if int(m) != m or m < 2:
        raise ValueError(f"m must be an integer >= 2, got {m!r}")
    if int(M) != M or M < 0:
        raise ValueError(f"M must be a non-negative integer, got {M!r}")
    ratio = c0 * eps_sigma / c_sigma
    raw = 1.0 - 2.0 * M * math.exp(-(m - 1) * ratio**2 / 6.0)
    return ConsistencyBound(min(max(raw, 0.0), 1.0), raw, ratio, ratio <= 0.5)


def truncation_planner(m: int, gamma: float, c2: float, c0: float) -> TruncationPlan:
    """Truncation level and the smallest admissible error level for ``m`` replicates.

    ``M = floor((m / log m)^(1 / (4 |gamma|)) / 2)`` (at least 1) and
    ``eps_sigma = (c2 / c0) M^(2 gamma)``.
    """
    if not gamma < 0:
        raise OutOfScopeError(f"the truncation planner needs decaying noise, got gamma={gamma}")
    if int(m) != m or m < 2:
        raise ValueError(f"m must be an integer >= 2, got {m!r}")
    if not c2 > 0 or not c0 > 0:
        raise ValueError("c2 and c0 must be positive")
    M = max(1, math.floor((m / math.log(m)) ** (1.0 / (4.0 * abs(gamma))) / 2.0))
    eps_sigma = (c2 / c0) * M ** (2.0 * gamma)
    m_eps2 = m * eps_sigma**2
    return TruncationPlan(M, eps_sigma, m_eps2, math.log(M) / m_eps2)


def massart_gap(y):
    """``g(y) = y^2/2 - y - 1 + sqrt(1 + 2y)``, evaluated without cancellation.

    Non-negative for ``y >= 0``; it is the gap between the two tail exponents
    of the chi-square deviation bound.
    """
    y = np.asarray(y, dtype=float)
    r = np.sqrt(1.0 + 2.0 * y)
    return y**3 * (1.0 + 2.0 / (r + 1.0)) / (2.0 * (1.0 + y + r))


def tail_exponents(m: int, floor: float, sigma2) -> tuple[np.ndarray, np.ndarray]:
    """Exponents ``(x1_i, x2_i)`` of the upper and lower deviation probabilities.

    With ``y_i = floor / sigma_i^2``: ``x1 = (m-1)/2 (1 + y - sqrt(1 + 2y))`` and
    ``x2 = (m-1)/4 y^2``; always ``x1 <= x2``.
    """
    y = floor / np.asarray(sigma2, dtype=float)
    r = np.sqrt(1.0 + 2.0 * y)
    x1 = 0.5 * (m - 1) * y**2 / (1.0 + y + r)
    x2 = 0.25 * (m - 1) * y**2
    return x1, x2
