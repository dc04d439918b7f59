"""Bayesian linear inverse problems with heterogeneous noise in the Gaussian sequence model."""

from .ebayes import EbResult, eb_posterior, eb_tau, eb_tau_asymptotic, marginal_gradient, marginal_objective
from .errors import NoFiniteTruncationError, NonMonotoneError, OutOfScopeError
from .model import (Observations, PriorSpec, TruthSpec, paper_truth, power_truth, replicated_summary,
                    simulate, simulate_replicated, sobolev_norm)
from .posterior import (CredibleBands, PosteriorSummary, conjugate_posterior, credible_bands,
                        posterior_l2_risk, reconstruct, sample_posterior)
from .rates import (RateReport, classify_regime, cutoff_index, expected_risk, general_contraction_rate,
                    index_sets, minimax_rate, optimal_prior, plugin_rate_general, plugin_rate_polynomial,
                    polynomial_contraction_rate, projection_estimate)
from .spectral import BasisKind, SpectralProblem, basis_block, basis_eval, power_law_noise, volterra_spectrum
from .varest import (VarianceEstimate, chi_square_tail, consistency_bound, min_truncation, sample_stats,
                     truncated_estimator, truncation_planner)

__version__ = "0.1.0"
