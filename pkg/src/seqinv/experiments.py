"""
Monte Carlo harness for risk curves, contraction probabilities, credible-band
coverage, empirical-Bayes sweeps and plug-in variance studies.

Every cell of the (alpha, eps) grid draws its replicates from seeds
``(seed, cell, replicate)``, and per-cell reductions use compensated
summation, so a result table depends only on the configuration and never on
thread scheduling or replicate order.

Noise levels can be given directly (``eps``) or as equivalent sample sizes
(``n_equiv``), with ``eps = n_equiv ** -0.5``.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from .ebayes import eb_posterior, eb_tau_asymptotic
from .errors import OutOfScopeError
from .model import PriorSpec, TruthSpec, power_truth, replicated_summary, simulate
from .posterior import conjugate_posterior, credible_bands, posterior_l2_risk, reconstruct, sample_posterior
from .rates import expected_risk, minimax_rate, polynomial_contraction_rate
from .spectral import SpectralProblem
from .varest import consistency_bound, min_truncation, truncated_estimator, truncation_planner

MODES = ("risk-curve", "contraction-prob", "coverage", "eb-sweep", "plugin-study")
THREADS_ENV = "SEQINV_THREADS"


@dataclass
class ExperimentConfig:
    mode: str = "risk-curve"
    problem: str = "volterra"
    n: int = 2000
    p: float = 1.0
    gamma: float = 0.5
    noise_scale: float = 2.0
    truth_beta: float = 1.0
    alphas: list = field(default_factory=lambda: [1.0])
    tau: float = 1.0
    eps: list = field(default_factory=lambda: [1e-2, 1e-3, 1e-4])
    n_equiv: list | None = None
    replicates: int = 100
    seed: int = 0
    draws: int = 500
    m_factor: float = 5.0
    level: float = 0.95
    x_points: int = 101
    m: int = 10_000
    eps0: float = 1.0
    c0: float = 1.0
    M: int | None = None
    eps_sigma: float | None = None
    oracle_sigma: bool = False
    eb_bracket: list = field(default_factory=lambda: [1e-8, 1e16])

    def __post_init__(self):
        if self.n_equiv is not None:
            self.eps = [float(v) ** -0.5 for v in self.n_equiv]
        self.alphas = [float(a) for a in np.atleast_1d(self.alphas)]
        self.eps = [float(e) for e in np.atleast_1d(self.eps)]
        self.validate()

    def validate(self) -> None:
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.problem not in ("volterra", "power_law"):
            raise ValueError(f"problem must be 'volterra' or 'power_law', got {self.problem!r}")
        if not self.eps:
            raise ValueError("eps grid is empty")
        if any(b >= a for a, b in zip(self.eps, self.eps[1:])):
            raise ValueError(f"eps grid must be strictly decreasing, got {self.eps}")
        if self.eps[-1] < 0:
            raise ValueError("eps values must be non-negative")
        if int(self.replicates) != self.replicates or self.replicates < 1:
            raise ValueError(f"replicates must be a positive integer, got {self.replicates!r}")
        if not self.alphas or min(self.alphas) <= 0:
            raise ValueError("alphas must be a non-empty list of positive values")
        if not self.tau > 0:
            raise ValueError(f"tau must be positive, got {self.tau!r}")
        if self.mode == "plugin-study" and self.m < 2:
            raise ValueError(f"plugin-study needs m >= 2, got {self.m}")

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)

    def to_dict(self) -> dict:
        return asdict(self)

    def build_problem(self) -> SpectralProblem:
        if self.problem == "volterra":
            return SpectralProblem.volterra(self.n, self.gamma, self.noise_scale)
        return SpectralProblem.power_law(self.n, self.p, self.gamma, noise_scale=self.noise_scale)

    def build_truth(self) -> TruthSpec:
        return power_truth(self.n, self.truth_beta)

    def cells(self) -> list[tuple[int, float, float]]:
        return [(c, a, e) for c, (a, e) in enumerate((a, e) for a in self.alphas for e in self.eps)]


@dataclass
class ExperimentResult:
    mode: str
    rows: list
    theory_exponent: float | None = None
    samples: dict = field(default_factory=dict)
    config: dict = field(default_factory=dict)

    def columns(self) -> list[str]:
        cols: list[str] = []
        for row in self.rows:
            cols.extend(k for k in row if k not in cols)
        return cols

    def column(self, name: str, alpha: float | None = None) -> np.ndarray:
        return np.array([r[name] for r in self._alpha_rows(alpha)], dtype=float)

    def _alpha_rows(self, alpha):
        if alpha is None:
            alpha = self.rows[0]["alpha"]
        return [r for r in self.rows if r["alpha"] == alpha]


@dataclass(frozen=True)
class SlopeFit:
    slope: float
    se: float
    intercept: float
    cells: int
    dropped_eps: float | None

    def to_dict(self) -> dict:
        return asdict(self)


def _mean_se(values) -> tuple[float, float]:
    v = np.asarray(values, dtype=float)
    mean = math.fsum(v) / v.size
    if v.size < 2:
        return mean, 0.0
    var = math.fsum((v - mean) ** 2) / (v.size - 1)
    return mean, math.sqrt(var / v.size)


def _ols(x: np.ndarray, y: np.ndarray) -> tuple[float, float, float, float]:
    xm, ym = math.fsum(x) / x.size, math.fsum(y) / y.size
    sxx = math.fsum((x - xm) ** 2)
    slope = math.fsum((x - xm) * (y - ym)) / sxx
    intercept = ym - slope * xm
    resid = y - intercept - slope * x
    ssr = math.fsum(resid**2)
    se = math.sqrt(ssr / (x.size - 2) / sxx) if x.size > 2 else 0.0
    return slope, intercept, se, math.sqrt(ssr / x.size)


def fit_slope(eps, values) -> SlopeFit:
    """Log-log least squares of ``values`` on ``eps``.

    When at least four cells are present and dropping the largest-eps cell
    cuts the RMS residual by more than 20%, that cell is dropped and its eps
    is reported in ``dropped_eps``.
    """
    x = np.log(np.asarray(eps, dtype=float))
    y = np.log(np.asarray(values, dtype=float))
    if x.size < 3:
        raise ValueError(f"slope fit needs at least 3 cells, got {x.size}")
    if not np.all(np.isfinite(x)) or not np.all(np.isfinite(y)):
        raise ValueError("slope fit needs positive eps and statistics")
    slope, intercept, se, rms = _ols(x, y)
    if x.size >= 4:
        top = int(np.argmax(x))
        keep = np.arange(x.size) != top
        s2, i2, se2, rms2 = _ols(x[keep], y[keep])
        if rms2 < 0.8 * rms:
            return SlopeFit(s2, se2, i2, int(keep.sum()), float(math.exp(x[top])))
    return SlopeFit(slope, se, intercept, x.size, None)


def slope(result: ExperimentResult, alpha: float | None = None, stat: str = "statistic") -> SlopeFit:
    """Slope of log ``stat`` against log eps across the cells of one alpha."""
    return fit_slope(result.column("eps", alpha), result.column(stat, alpha))


def worker_count() -> int:
    raw = os.environ.get(THREADS_ENV, "0").strip() or "0"
    try:
        n = int(raw)
    except ValueError:
        raise ValueError(f"{THREADS_ENV} must be an integer, got {raw!r}") from None
    if n < 0:
        raise ValueError(f"{THREADS_ENV} must be non-negative, got {n}")
    return n or min(8, os.cpu_count() or 1)


def _run_cells(config: ExperimentConfig, fn, cells=None) -> list:
    cells = config.cells() if cells is None else cells
    workers = min(worker_count(), len(cells))
    if workers <= 1:
        return [fn(*cell) for cell in cells]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda cell: fn(*cell), cells))


def _base_row(cell: int, alpha: float, eps: float, tau: float) -> dict:
    return {"cell": cell, "alpha": alpha, "eps": eps,
            "n_equiv": eps**-2 if eps > 0 else math.inf, "tau": tau}


def _require_mode(config: ExperimentConfig, mode: str) -> None:
    if config.mode != mode:
        raise ValueError(f"config mode is {config.mode!r}, expected {mode!r}")


def _risk_exponent(config: ExperimentConfig) -> float | None:
    try:
        return 2.0 * minimax_rate(config.truth_beta, config.p, config.gamma, 0.5).exponent
    except (OutOfScopeError, ValueError):
        return None


def risk_curve(config: ExperimentConfig) -> ExperimentResult:
    """Mean posterior L2 risk at the truth per cell, next to its closed form."""
    _require_mode(config, "risk-curve")
    problem, truth = config.build_problem(), config.build_truth()

    def cell_fn(cell, alpha, eps):
        prior = PriorSpec(alpha, config.tau)
        risks = [posterior_l2_risk(conjugate_posterior(problem, prior, eps,
                                                       simulate(problem, truth, eps, (config.seed, cell, r))),
                                   truth)
                 for r in range(config.replicates)]
        mean, se = _mean_se(risks)
        row = _base_row(cell, alpha, eps, config.tau)
        row.update(statistic=mean, se=se, expected=expected_risk(problem, prior, truth, eps))
        return row

    return ExperimentResult(config.mode, _run_cells(config, cell_fn), _risk_exponent(config),
                            config=config.to_dict())


def contraction_probability(config: ExperimentConfig, m_factor: float | None = None) -> ExperimentResult:
    """Posterior mass outside the ball of radius ``m_factor * rate`` around the truth.

    ``rate`` is the polynomial contraction rate for the cell; the mass is
    estimated from ``config.draws`` posterior draws and averaged over data
    replicates.
    """
    _require_mode(config, "contraction-prob")
    m_factor = config.m_factor if m_factor is None else float(m_factor)
    if not m_factor > 0:
        raise ValueError(f"m_factor must be positive, got {m_factor!r}")
    problem, truth = config.build_problem(), config.build_truth()

    def cell_fn(cell, alpha, eps):
        prior = PriorSpec(alpha, config.tau)
        rate = polynomial_contraction_rate(alpha, config.tau, config.truth_beta,
                                           problem.p, problem.gamma, eps).rate
        radius = m_factor * rate
        probs = []
        for r in range(config.replicates):
            seed = (config.seed, cell, r)
            post = conjugate_posterior(problem, prior, eps, simulate(problem, truth, eps, seed))
            draws = sample_posterior(post, config.draws, seed)
            dist = np.sqrt(((draws - truth.coeffs) ** 2).sum(axis=1))
            probs.append(float(np.count_nonzero(dist >= radius)) / config.draws)
        mean, se = _mean_se(probs)
        row = _base_row(cell, alpha, eps, config.tau)
        row.update(statistic=mean, se=se, rate=rate, m_factor=m_factor)
        return row

    return ExperimentResult(config.mode, _run_cells(config, cell_fn), None, config=config.to_dict())


def coverage_study(config: ExperimentConfig, level: float | None = None,
                   x_grid=None) -> ExperimentResult:
    """Fraction of grid points where the pointwise credible band contains the truth."""
    _require_mode(config, "coverage")
    level = config.level if level is None else float(level)
    x = np.linspace(0.0, 1.0, config.x_points) if x_grid is None else np.asarray(x_grid, dtype=float)
    problem, truth = config.build_problem(), config.build_truth()
    target = reconstruct(truth.coeffs, x)

    def cell_fn(cell, alpha, eps):
        prior = PriorSpec(alpha, config.tau)
        fractions = []
        for r in range(config.replicates):
            post = conjugate_posterior(problem, prior, eps,
                                       simulate(problem, truth, eps, (config.seed, cell, r)))
            band = credible_bands(post, x, level)
            inside = (band.lower <= target) & (target <= band.upper)
            fractions.append(float(np.count_nonzero(inside)) / x.size)
        mean, se = _mean_se(fractions)
        row = _base_row(cell, alpha, eps, config.tau)
        row.update(statistic=mean, se=se, level=level)
        return row

    return ExperimentResult(config.mode, _run_cells(config, cell_fn), None, config=config.to_dict())


def eb_sweep(config: ExperimentConfig) -> ExperimentResult:
    """Empirical-Bayes ``tau_hat`` per cell.

    The statistic is the geometric mean of ``tau_hat``, so log-log slopes
    average ``log tau_hat`` over replicates. Quantiles, the median and the
    posterior risk with the plugged-in estimate are reported alongside; raw
    samples are kept in ``result.samples`` keyed by cell.
    """
    _require_mode(config, "eb-sweep")
    problem, truth = config.build_problem(), config.build_truth()

    def cell_fn(cell, alpha, eps):
        taus, risks, converged = [], [], 0
        for r in range(config.replicates):
            y = simulate(problem, truth, eps, (config.seed, cell, r))
            post, res = eb_posterior(y, problem, alpha, eps, bracket=tuple(config.eb_bracket))
            taus.append(res.tau_hat)
            converged += res.converged
            risks.append(posterior_l2_risk(post, truth))
        taus = np.array(taus)
        log_mean, log_se = _mean_se(np.log(taus))
        risk, risk_se = _mean_se(risks)
        q = np.quantile(taus, [0.025, 0.25, 0.5, 0.75, 0.975])
        row = _base_row(cell, alpha, eps, float("nan"))
        row.update(statistic=math.exp(log_mean), se=math.exp(log_mean) * log_se, converged=converged,
                   median=q[2], q025=q[0], q25=q[1], q75=q[3], q975=q[4],
                   iqr_ratio=(q[3] - q[1]) / q[2], risk=risk, risk_se=risk_se)
        return row, taus

    out = _run_cells(config, cell_fn)
    exponent = eb_tau_asymptotic(config.alphas[0], config.truth_beta,
                                 config.build_problem().p, config.gamma).exponent
    return ExperimentResult(config.mode, [row for row, _ in out], exponent,
                            samples={row["cell"]: taus for row, taus in out},
                            config=config.to_dict())


def plugin_study(config: ExperimentConfig, m: int | None = None, M: int | None = None,
                 eps_sigma: float | None = None) -> ExperimentResult:
    """Risk of the plug-in posterior relative to the known-variance posterior.

    Each replicate simulates ``m`` repeated observations with noise level
    ``eps0``; both posteriors use the same replicate means, so ``eps`` in the
    table is ``eps0 / sqrt(m)`` and the configured eps grid is ignored.
    ``(M, eps_sigma)`` default to the truncation planner with ``c2 = noise_scale^2``.
    The row also reports the empirical probability that every estimated
    variance is within ``c0 eps_sigma`` of the truth, and its lower bound.
    """
    _require_mode(config, "plugin-study")
    m = config.m if m is None else int(m)
    if m < 2:
        raise ValueError(f"plugin-study needs m >= 2, got {m}")
    problem, truth = config.build_problem(), config.build_truth()
    c2 = config.noise_scale**2
    M = config.M if M is None else M
    eps_sigma = config.eps_sigma if eps_sigma is None else eps_sigma
    plan = None
    if M is None or eps_sigma is None:
        plan = truncation_planner(m, config.gamma, c2, config.c0)
        M = plan.M if M is None else M
        eps_sigma = plan.eps_sigma if eps_sigma is None else eps_sigma
    eps = config.eps0 / math.sqrt(m)
    sigma2 = problem.sigma**2
    floor = config.c0 * eps_sigma

    def cell_fn(cell, alpha, _eps):
        prior = PriorSpec(alpha, config.tau)
        ratios, hits = [], 0
        for r in range(config.replicates):
            ybar, s2 = replicated_summary(problem, truth, config.eps0, m, (config.seed, cell, r))
            est = truncated_estimator(s2 / config.eps0**2, M, eps_sigma, config.c0, m)
            hits += bool(np.all(np.abs(est.hat - sigma2) <= floor))
            tilde = sigma2 if config.oracle_sigma else est.tilde
            known = posterior_l2_risk(conjugate_posterior(problem, prior, eps, ybar), truth)
            plug = posterior_l2_risk(conjugate_posterior(problem.with_sigma(np.sqrt(tilde)), prior, eps, ybar),
                                     truth)
            ratios.append(plug / known)
        mean, se = _mean_se(ratios)
        accuracy = hits / config.replicates
        row = _base_row(cell, alpha, eps, config.tau)
        row.update(statistic=mean, se=se, m=m, M=M, eps_sigma=eps_sigma,
                   M_sigma=min_truncation(eps_sigma, config.c0, sigma=problem.sigma),
                   accuracy=accuracy,
                   accuracy_se=math.sqrt(accuracy * (1 - accuracy) / config.replicates),
                   bound=consistency_bound(m, M, eps_sigma, config.c0, c2=c2).bound)
        return row

    rows = _run_cells(config, cell_fn, [(c, a, eps) for c, a in enumerate(config.alphas)])
    result = ExperimentResult(config.mode, rows, None, config=config.to_dict())
    if plan is not None:
        result.samples["plan"] = plan.to_dict()
    return result


RUNNERS = {
    "risk-curve": risk_curve,
    "contraction-prob": contraction_probability,
    "coverage": coverage_study,
    "eb-sweep": eb_sweep,
    "plugin-study": plugin_study,
}


def run(config: ExperimentConfig) -> ExperimentResult:
    return RUNNERS[config.mode](config)
