"""
Eigensystems of the forward operator and the noise covariance.

Everything downstream works in sequence space: the forward operator is
represented by its singular values ``k_i`` and the noise covariance by the
standard deviations ``sigma_i`` of its eigenvalues, both indexed from 1.
The concrete case is the Volterra integration operator on L2[0, 1]; any other
diagonal problem can be described by supplying the two sequences directly.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from typing import NamedTuple

import numpy as np


class BasisKind(str, Enum):
    """Which Volterra eigenbasis to evaluate.

    ``INPUT`` is the domain basis ``e_i`` (eigenfunctions of K*K, cosines),
    ``OUTPUT`` the range basis ``phi_i`` (eigenfunctions of KK*, sines).
    """

    INPUT = "input"
    OUTPUT = "output"


class ForwardSpectrum(NamedTuple):
    k: np.ndarray
    p: float
    c1: float


def _indices(n: int) -> np.ndarray:
    return np.arange(1, n + 1, dtype=float)


def _check_n(n: int) -> None:
    if int(n) != n or n < 1:
        raise ValueError(f"truncation n must be a positive integer, got {n!r}")


def volterra_spectrum(n: int) -> ForwardSpectrum:
    """Singular values ``k_i = 1 / ((i - 1/2) pi)`` of the Volterra operator.

    The sandwich constant is ``pi``: ``1/pi <= i k_i <= 2/pi`` for all i.
    """
    _check_n(n)
    i = _indices(n)
    return ForwardSpectrum(k=1.0 / ((i - 0.5) * np.pi), p=1.0, c1=float(np.pi))


def power_law_noise(gamma: float, scale: float, n: int) -> np.ndarray:
    """Noise standard deviations ``sigma_i = scale * i**gamma``."""
    if not scale > 0:
        raise ValueError(f"noise scale must be positive, got {scale!r}")
    _check_n(n)
    return scale * _indices(n) ** gamma


def basis_eval(kind: BasisKind | str, i, x):
    """Evaluate the Volterra eigenfunction of index ``i`` at ``x``.

    ``i`` and ``x`` broadcast against each other, so passing a column of
    indices and a row of points returns the (len(i), len(x)) block.
    """
    kind = BasisKind(kind)
    x = np.asarray(x, dtype=float)
    i = np.asarray(i)
    if np.any(i < 1):
        raise ValueError("basis index must be >= 1")
    if np.any((x < 0.0) | (x > 1.0)) or np.any(np.isnan(x)):
        raise ValueError("basis evaluation points must lie in [0, 1]")
    arg = (i - 0.5) * np.pi * x
    if kind is BasisKind.INPUT:
        return np.sqrt(2.0) * np.cos(arg)
    return np.sqrt(2.0) * np.sin(arg)


@lru_cache(maxsize=4)
def _cached_block(kind: BasisKind, n: int, grid_bytes: bytes) -> np.ndarray:
    x = np.frombuffer(grid_bytes, dtype=float)
    block = basis_eval(kind, np.arange(1, n + 1)[:, None], x[None, :])
    block.setflags(write=False)
    return block


def basis_block(kind: BasisKind | str, n: int, x_grid) -> np.ndarray:
    """(n, len(x_grid)) matrix of basis values, cached for reused grids."""
    x = np.ascontiguousarray(x_grid, dtype=float).ravel()
    if np.any((x < 0.0) | (x > 1.0)) or np.any(np.isnan(x)):
        raise ValueError("grid points must lie in [0, 1]")
    return _cached_block(BasisKind(kind), int(n), x.tobytes())


@dataclass(frozen=True)
class SpectralProblem:
    """Diagonal inverse problem ``Y_i ~ N(k_i mu_i, eps^2 sigma_i^2)``.

    ``p`` and ``gamma`` are carried as metadata for the rate calculators and
    are not re-estimated from ``k`` and ``sigma``; call :meth:`satisfies_sandwich`
    to check them against the stored constants.
    """

    k: np.ndarray
    sigma: np.ndarray
    p: float = 1.0
    gamma: float = 0.0
    c1: float = 1.0
    c2: float = 1.0

    def __post_init__(self):
        k = np.asarray(self.k, dtype=float)
        sigma = np.asarray(self.sigma, dtype=float)
        if k.ndim != 1 or sigma.ndim != 1 or k.size == 0:
            raise ValueError("k and sigma must be non-empty 1-d sequences")
        if k.shape != sigma.shape:
            raise ValueError(f"length mismatch: len(k)={k.size}, len(sigma)={sigma.size}")
        if np.any(~(k > 0)) or np.any(~(sigma > 0)):
            raise ValueError("all k_i and sigma_i must be strictly positive")
        object.__setattr__(self, "k", k)
        object.__setattr__(self, "sigma", sigma)

    @property
    def n(self) -> int:
        return self.k.size

    @property
    def indices(self) -> np.ndarray:
        return _indices(self.n)

    @property
    def p_tilde(self) -> float:
        """Effective ill-posedness ``p + gamma``."""
        return self.p + self.gamma

    def satisfies_sandwich(self, rtol: float = 1e-12) -> bool:
        """Check ``k_i`` and ``sigma_i`` against their power laws and constants."""
        i = self.indices
        slack = 1.0 + rtol
        ik = self.k * i**self.p
        isg = self.sigma * i ** (-self.gamma)
        return bool(
            np.all(ik * self.c1 * slack >= 1.0)
            and np.all(ik <= self.c1 * slack)
            and np.all(isg * self.c2 * slack >= 1.0)
            and np.all(isg <= self.c2 * slack)
        )

    def with_sigma(self, sigma) -> "SpectralProblem":
        """Copy of the problem with a different noise spectrum (e.g. a plug-in)."""
        return SpectralProblem(self.k, sigma, self.p, self.gamma, self.c1, self.c2)

    @classmethod
    def volterra(cls, n: int = 2000, gamma: float = 0.5, noise_scale: float = 2.0) -> "SpectralProblem":
        """Volterra operator with power-law noise ``sigma_i = noise_scale * i**gamma``."""
        fwd = volterra_spectrum(n)
        sigma = power_law_noise(gamma, noise_scale, n)
        return cls(fwd.k, sigma, p=fwd.p, gamma=gamma, c1=fwd.c1,
                   c2=max(noise_scale, 1.0 / noise_scale))

    @classmethod
    def power_law(cls, n: int, p: float, gamma: float,
                  k_scale: float = 1.0, noise_scale: float = 1.0) -> "SpectralProblem":
        """Generic mildly ill-posed problem ``k_i = k_scale i^-p``, ``sigma_i = noise_scale i^gamma``."""
        _check_n(n)
        if not k_scale > 0:
            raise ValueError("k_scale must be positive")
        k = k_scale * _indices(n) ** (-p)
        sigma = power_law_noise(gamma, noise_scale, n)
        return cls(k, sigma, p=p, gamma=gamma, c1=max(k_scale, 1.0 / k_scale),
                   c2=max(noise_scale, 1.0 / noise_scale))
