"""
Prior and truth specifications, and data simulation in sequence space.

Random numbers come from numpy's Philox4x64 counter-based generator keyed by
a :class:`numpy.random.SeedSequence` built from the user seed plus a stream
tag, so a given seed reproduces the same draws on every platform. A seed may
be a single non-negative integer or a tuple of them; experiment harnesses
pass ``(seed, cell, replicate)`` to get independent per-replicate streams.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence, Union

import numpy as np

from .spectral import SpectralProblem

Seed = Union[int, Sequence[int]]

# stream tags keep the different consumers of one seed independent
STREAM_SIMULATE = 0
STREAM_REPLICATED = 1
STREAM_POSTERIOR = 2

DEFAULT_N = 2000


def seed_words(seed: Seed) -> list[int]:
    words = [seed] if isinstance(seed, (int, np.integer)) else list(seed)
    if not words:
        raise ValueError("seed must not be empty")
    out = []
    for w in words:
        if int(w) != w or w < 0:
            raise ValueError(f"seed components must be non-negative integers, got {seed!r}")
        out.append(int(w))
    return out


def make_rng(seed: Seed, stream: int) -> np.random.Generator:
    """Philox generator for ``(seed..., stream)``."""
    ss = np.random.SeedSequence(seed_words(seed) + [stream])
    return np.random.Generator(np.random.Philox(ss))


@dataclass(frozen=True)
class PriorSpec:
    """Gaussian prior ``mu_i ~ N(0, lambda_i)`` with ``lambda_i = tau^2 i^(-1-2 alpha)``.

    ``tau`` is either a constant or a rule ``eps -> tau_eps``. An explicit
    eigenvalue sequence may be given instead through ``lam``.
    """

    alpha: float = 1.0
    tau: Union[float, Callable[[float], float]] = 1.0
    lam: np.ndarray | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.lam is not None:
            lam = np.asarray(self.lam, dtype=float)
            if lam.ndim != 1 or np.any(lam < 0):
                raise ValueError("explicit prior eigenvalues must be a 1-d non-negative sequence")
            object.__setattr__(self, "lam", lam)
            return
        if not self.alpha > 0:
            raise ValueError(f"alpha must be positive, got {self.alpha!r}")
        if not callable(self.tau) and not self.tau > 0:
            raise ValueError(f"tau must be positive, got {self.tau!r}")

    @classmethod
    def explicit(cls, lam) -> "PriorSpec":
        return cls(alpha=float("nan"), tau=float("nan"), lam=lam)

    def tau_at(self, eps: float | None = None) -> float:
        if callable(self.tau):
            if eps is None:
                raise ValueError("tau is a rule of eps; pass eps")
            value = float(self.tau(eps))
            if not value > 0:
                raise ValueError(f"tau rule returned non-positive value {value!r}")
            return value
        return float(self.tau)

    def eigenvalues(self, n: int, eps: float | None = None) -> np.ndarray:
        if self.lam is not None:
            if self.lam.size != n:
                raise ValueError(f"explicit prior has {self.lam.size} eigenvalues, need {n}")
            return self.lam
        i = np.arange(1, n + 1, dtype=float)
        return self.tau_at(eps) ** 2 * i ** (-1.0 - 2.0 * self.alpha)


def sobolev_norm(coeffs, beta: float) -> float:
    """``sqrt(sum_i i^(2 beta) f_i^2)`` over the stored indices."""
    f = np.asarray(coeffs, dtype=float)
    i = np.arange(1, f.size + 1, dtype=float)
    return math.sqrt(math.fsum(i ** (2.0 * beta) * f**2))


@dataclass(frozen=True)
class TruthSpec:
    coeffs: np.ndarray
    beta: float
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "coeffs", np.asarray(self.coeffs, dtype=float))

    @property
    def n(self) -> int:
        return self.coeffs.size

    def in_ball(self, rtol: float = 1e-12) -> bool:
        return sobolev_norm(self.coeffs, self.beta) <= self.radius * (1 + rtol)


def power_truth(n: int, beta: float) -> TruthSpec:
    """Coefficients ``i^(-beta-1/2) sin(i)``; ``beta = 1`` is the standard test function.

    The decay sits on the boundary of the Sobolev class of order ``beta``: the
    weighted sum grows like ``log n``, so ``radius`` is the norm over the
    stored range only.
    """
    if int(n) != n or n < 1:
        raise ValueError(f"n must be a positive integer, got {n!r}")
    i = np.arange(1, n + 1, dtype=float)
    coeffs = i ** (-beta - 0.5) * np.sin(i)
    return TruthSpec(coeffs, beta, sobolev_norm(coeffs, beta))


def paper_truth(n: int = DEFAULT_N) -> TruthSpec:
    """``mu_0,i = i^(-3/2) sin(i)`` with nominal smoothness 1."""
    return power_truth(n, 1.0)


@dataclass(frozen=True)
class Observations:
    y: np.ndarray
    eps: float
    seed: object = None

    def __post_init__(self):
        object.__setattr__(self, "y", np.asarray(self.y, dtype=float))
        if self.eps < 0:
            raise ValueError(f"eps must be non-negative, got {self.eps!r}")

    @property
    def n(self) -> int:
        return self.y.size


def _check_lengths(problem: SpectralProblem, truth: TruthSpec) -> None:
    if truth.n != problem.n:
        raise ValueError(f"length mismatch: problem has {problem.n} indices, truth has {truth.n}")


def simulate(problem: SpectralProblem, truth: TruthSpec, eps: float, seed: Seed) -> Observations:
    """Draw ``Y_i = k_i mu_0,i + eps sigma_i xi_i``.

    ``eps = 0`` is accepted and returns the noiseless mean without sampling.
    """
    _check_lengths(problem, truth)
    if eps < 0 or math.isnan(eps):
        raise ValueError(f"eps must be non-negative, got {eps!r}")
    mean = problem.k * truth.coeffs
    if eps == 0:
        return Observations(mean.copy(), 0.0, seed)
    xi = make_rng(seed, STREAM_SIMULATE).standard_normal(problem.n)
    return Observations(mean + eps * problem.sigma * xi, float(eps), seed)


def simulate_replicated(problem: SpectralProblem, truth: TruthSpec, eps0: float,
                        m: int, seed: Seed) -> np.ndarray:
    """(N, m) matrix of independent replicates with noise level ``eps0``.

    Draws are consumed in row-major order from one stream, so
    :func:`replicated_summary` with the same seed sees identical values.
    """
    _check_lengths(problem, truth)
    if int(m) != m or m < 2:
        raise ValueError(f"need at least two replicates, got m={m!r}")
    if eps0 < 0:
        raise ValueError(f"eps0 must be non-negative, got {eps0!r}")
    mean = (problem.k * truth.coeffs)[:, None]
    if eps0 == 0:
        return np.repeat(mean, m, axis=1)
    xi = make_rng(seed, STREAM_REPLICATED).standard_normal((problem.n, m))
    return mean + eps0 * problem.sigma[:, None] * xi


def replicated_summary(problem: SpectralProblem, truth: TruthSpec, eps0: float, m: int,
                       seed: Seed, chunk_rows: int = 64) -> tuple[np.ndarray, np.ndarray]:
    """Row means and unbiased variances of :func:`simulate_replicated` without
    materialising the whole matrix."""
    _check_lengths(problem, truth)
    if int(m) != m or m < 2:
        raise ValueError(f"need at least two replicates, got m={m!r}")
    mean = problem.k * truth.coeffs
    if eps0 == 0:
        return mean.copy(), np.zeros(problem.n)
    rng = make_rng(seed, STREAM_REPLICATED)
    means = np.empty(problem.n)
    s2 = np.empty(problem.n)
    for start in range(0, problem.n, chunk_rows):
        stop = min(start + chunk_rows, problem.n)
        block = mean[start:stop, None] + eps0 * problem.sigma[start:stop, None] * \
            rng.standard_normal((stop - start, m))
        mu = block.mean(axis=1)
        means[start:stop] = mu
        s2[start:stop] = ((block - mu[:, None]) ** 2).sum(axis=1) / (m - 1)
    return means, s2
