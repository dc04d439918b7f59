"""Command-line interface: ``seqinv <subcommand> [options]``.

Exit status is 0 on success, 2 on usage errors and 1 when the computation
itself rejects its inputs.
"""

from __future__ import annotations

import argparse
import contextlib
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import experiments, io
from .ebayes import eb_tau, eb_tau_asymptotic
from .model import PriorSpec, power_truth, simulate, simulate_replicated
from .posterior import conjugate_posterior, credible_bands
from .rates import minimax_rate, optimal_prior, polynomial_contraction_rate
from .spectral import SpectralProblem
from .varest import (consistency_bound, min_truncation, sample_stats, truncated_estimator,
                     truncation_planner)

Formatter = argparse.ArgumentDefaultsHelpFormatter


def _problem_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("problem")
    g.add_argument("--problem", choices=["volterra", "power_law"], default="volterra",
                   help="forward operator")
    g.add_argument("--n", type=int, default=2000, help="number of retained coefficients N")
    g.add_argument("--p", type=float, default=1.0, help="ill-posedness (power_law only)")
    g.add_argument("--gamma", type=float, default=0.5, help="noise exponent, sigma_i = scale * i^gamma")
    g.add_argument("--noise-scale", type=float, default=2.0, help="noise scale")


def _build_problem(args) -> SpectralProblem:
    if args.problem == "volterra":
        return SpectralProblem.volterra(args.n, args.gamma, args.noise_scale)
    return SpectralProblem.power_law(args.n, args.p, args.gamma, noise_scale=args.noise_scale)


def _out_flags(p: argparse.ArgumentParser, formats=("csv", "json"), default="csv") -> None:
    p.add_argument("--out", default=None, help="output path (stdout when omitted)")
    if len(formats) > 1:
        p.add_argument("--format", choices=list(formats), default=default, help="output format")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="seqinv", formatter_class=Formatter,
                                     description="Bayesian inverse problems in the Gaussian sequence model")
    sub = parser.add_subparsers(dest="command", required=True, metavar="subcommand")

    p = sub.add_parser("simulate", formatter_class=Formatter, help="draw sequence-space data")
    _problem_flags(p)
    p.add_argument("--beta", type=float, default=1.0, help="truth coefficients i^(-beta-1/2) sin(i)")
    p.add_argument("--eps", type=float, default=None, help="noise level (or use --sample-size)")
    p.add_argument("--sample-size", type=float, default=None, help="equivalent n, eps = n^-1/2")
    p.add_argument("--seed", type=int, required=True, help="random seed")
    p.add_argument("--out", default=None, help="output path (stdout when omitted)")

    p = sub.add_parser("posterior", formatter_class=Formatter, help="conjugate posterior for observed data")
    _problem_flags(p)
    p.add_argument("--input", required=True, help="observations CSV written by 'simulate'")
    p.add_argument("--alpha", type=float, default=1.0, help="prior regularity")
    p.add_argument("--tau", type=float, default=1.0, help="prior scale")
    p.add_argument("--bands", action="store_true", help="emit credible bands on an x grid instead")
    p.add_argument("--level", type=float, default=0.95, help="credible level for --bands")
    p.add_argument("--x-points", type=int, default=101, help="grid size for --bands")
    _out_flags(p)

    p = sub.add_parser("rates", formatter_class=Formatter, help="contraction and minimax rates")
    _rate_flags(p)
    p.add_argument("--alpha", type=float, default=1.0, help="prior regularity")
    p.add_argument("--tau", type=float, default=1.0, help="prior scale")
    _out_flags(p, ("json",), "json")

    p = sub.add_parser("minimax", formatter_class=Formatter, help="minimax rate and optimal priors")
    _rate_flags(p)
    _out_flags(p, ("json",), "json")

    p = sub.add_parser("eb", formatter_class=Formatter, help="empirical-Bayes prior scale")
    _problem_flags(p)
    p.add_argument("--input", required=True, help="observations CSV written by 'simulate'")
    p.add_argument("--alpha", type=float, default=1.0, help="prior regularity")
    p.add_argument("--beta", type=float, default=None, help="truth smoothness for the asymptotic exponent")
    p.add_argument("--lo", type=float, default=1e-8, help="lower end of the tau bracket")
    p.add_argument("--hi", type=float, default=1e8, help="upper end of the tau bracket")
    p.add_argument("--rtol", type=float, default=1e-6, help="relative tolerance")
    _out_flags(p, ("json",), "json")

    p = sub.add_parser("varest", formatter_class=Formatter,
                       help="truncation plan and variance estimation from replicates")
    _problem_flags(p)
    p.add_argument("--m", type=int, default=10_000, help="number of replicates")
    p.add_argument("--c0", type=float, default=1.0, help="floor constant")
    p.add_argument("--c2", type=float, default=None, help="variance bound constant (default noise_scale^2)")
    p.add_argument("--M", type=int, default=None, help="truncation index (planner when omitted)")
    p.add_argument("--eps-sigma", type=float, default=None, help="variance error level (planner when omitted)")
    p.add_argument("--estimate", action="store_true", help="simulate replicates and write the estimate")
    p.add_argument("--eps0", type=float, default=1.0, help="per-replicate noise level for --estimate")
    p.add_argument("--beta", type=float, default=1.0, help="truth smoothness for --estimate")
    p.add_argument("--seed", type=int, default=None, help="random seed (required with --estimate)")
    _out_flags(p)

    p = sub.add_parser("experiment", formatter_class=Formatter, help="Monte Carlo experiment")
    p.add_argument("--config", default=None, help="flat JSON config; flags override its values")
    p.add_argument("--mode", choices=list(experiments.MODES), default=None, help="experiment kind")
    p.add_argument("--gamma", type=float, default=None, help="noise exponent")
    p.add_argument("--n", type=int, default=None, help="number of retained coefficients N")
    p.add_argument("--alphas", type=float, nargs="+", default=None, help="prior regularities")
    p.add_argument("--tau", type=float, default=None, help="prior scale")
    p.add_argument("--eps", type=float, nargs="+", default=None, help="decreasing noise levels")
    p.add_argument("--replicates", type=int, default=None, help="replicates per cell")
    p.add_argument("--m", type=int, default=None, help="replicates for plugin-study")
    p.add_argument("--seed", type=int, default=None, help="random seed (required here or in the config)")
    p.add_argument("--summary", default=None, help="path for the JSON summary")
    p.add_argument("--out", default=None, help="path for the CSV table (stdout when omitted)")
    for action in sub.choices.values():
        action.set_defaults(subparser=action)
    return parser


def _rate_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--beta", type=float, required=True, help="truth smoothness")
    p.add_argument("--p", type=float, default=1.0, help="ill-posedness")
    p.add_argument("--gamma", type=float, default=0.0, help="noise exponent")
    p.add_argument("--eps", type=float, required=True, help="noise level")


def _eps(args, parser) -> float:
    if (args.eps is None) == (args.sample_size is None):
        parser.error("give exactly one of --eps and --sample-size")
    return args.eps if args.eps is not None else args.sample_size ** -0.5


def cmd_simulate(args, parser, out) -> None:
    eps = _eps(args, parser)
    problem = _build_problem(args)
    obs = simulate(problem, power_truth(problem.n, args.beta), eps, args.seed)
    io.emit(io.observations_csv(obs), args.out, out)


def cmd_posterior(args, parser, out) -> None:
    obs = io.read_observations(args.input)
    args.n = obs.n
    problem = _build_problem(args)
    post = conjugate_posterior(problem, PriorSpec(args.alpha, args.tau), obs.eps, obs)
    if args.bands:
        b = credible_bands(post, np.linspace(0.0, 1.0, args.x_points), args.level)
        if args.format == "json":
            text = io.json_text({"x": b.x, "mean": b.mean, "lower": b.lower, "upper": b.upper})
        else:
            text = io.csv_text(["x", "mean", "lower", "upper"], zip(b.x, b.mean, b.lower, b.upper))
    elif args.format == "json":
        text = io.json_text({"eps": post.eps, "mean": post.mean, "variance": post.variance})
    else:
        text = io.csv_text(["i", "mean", "variance"],
                           zip(range(1, post.n + 1), post.mean, post.variance))
    io.emit(text, args.out, out)


def cmd_rates(args, parser, out) -> None:
    contraction = polynomial_contraction_rate(args.alpha, args.tau, args.beta, args.p, args.gamma, args.eps)
    minimax = minimax_rate(args.beta, args.p, args.gamma, args.eps)
    io.emit(io.json_text({"regime": contraction.regime, "contraction": contraction.to_dict(),
                          "minimax": minimax.to_dict()}), args.out, out)


def cmd_minimax(args, parser, out) -> None:
    report = minimax_rate(args.beta, args.p, args.gamma, args.eps)
    choices = [vars(c) for c in optimal_prior(args.beta, args.p, args.gamma)]
    io.emit(io.json_text({"regime": report.regime, "minimax": report.to_dict(),
                          "optimal_prior": choices}), args.out, out)


def cmd_eb(args, parser, out) -> None:
    obs = io.read_observations(args.input)
    args.n = obs.n
    problem = _build_problem(args)
    res = eb_tau(obs, problem, args.alpha, obs.eps, bracket=(args.lo, args.hi), rtol=args.rtol)
    data = res.to_dict()
    data["prior_scale"] = math.sqrt(res.tau_hat)
    if args.beta is not None:
        data["asymptotic"] = eb_tau_asymptotic(args.alpha, args.beta, problem.p, problem.gamma).to_dict()
    io.emit(io.json_text(data), args.out, out)


def cmd_varest(args, parser, out) -> None:
    if args.estimate and args.seed is None:
        parser.error("--seed is required with --estimate")
    problem = _build_problem(args)
    c2 = args.noise_scale**2 if args.c2 is None else args.c2
    M, eps_sigma = args.M, args.eps_sigma
    summary = {}
    if M is None or eps_sigma is None:
        plan = truncation_planner(args.m, args.gamma, c2, args.c0)
        summary["plan"] = plan.to_dict()
        M = plan.M if M is None else M
        eps_sigma = plan.eps_sigma if eps_sigma is None else eps_sigma
    summary.update(M=M, eps_sigma=eps_sigma,
                   M_sigma=min_truncation(eps_sigma, args.c0, sigma=problem.sigma, gamma=args.gamma),
                   consistency=consistency_bound(args.m, M, eps_sigma, args.c0, c2=c2).to_dict())
    if not args.estimate:
        io.emit(io.json_text(summary), args.out, out)
        return
    reps = simulate_replicated(problem, power_truth(problem.n, args.beta), args.eps0, args.m, args.seed)
    _, s2 = sample_stats(reps)
    est = truncated_estimator(s2 / args.eps0**2, M, eps_sigma, args.c0, args.m)
    if args.format == "json":
        summary.update(s2=est.s2, hat=est.hat, tilde=est.tilde)
        io.emit(io.json_text(summary), args.out, out)
    else:
        io.emit(io.csv_text(["i", "s2", "hat", "tilde"], est.rows()), args.out, out)


CONFIG_FLAGS = ("mode", "gamma", "n", "alphas", "tau", "eps", "replicates", "m", "seed")


def cmd_experiment(args, parser, out) -> None:
    data = {}
    if args.config:
        data = json.loads(Path(args.config).read_text(encoding="utf-8"))
        if not isinstance(data, dict):
            raise ValueError("config file must hold a JSON object")
    for key in CONFIG_FLAGS:
        value = getattr(args, key)
        if value is not None:
            data[key] = value
    if data.get("seed") is None:
        parser.error("--seed is required (on the command line or in the config)")
    config = experiments.ExperimentConfig.from_dict(data)
    result = experiments.run(config)
    io.emit(io.result_csv(result), args.out, out)
    if args.summary:
        summary = {"mode": result.mode, "config": config.to_dict(),
                   "theory_exponent": result.theory_exponent}
        if len(config.eps) >= 3 and result.mode in ("risk-curve", "eb-sweep"):
            fits = {}
            for alpha in config.alphas:
                fit = experiments.slope(result, alpha)
                entry = fit.to_dict()
                if result.theory_exponent is not None and alpha == config.alphas[0]:
                    entry["within_0.15"] = abs(fit.slope - result.theory_exponent) <= 0.15
                fits[str(alpha)] = entry
            summary["slopes"] = fits
        summary.update({k: v for k, v in result.samples.items() if isinstance(k, str)})
        io.emit(io.json_text(summary), args.summary, out)


COMMANDS = {
    "simulate": cmd_simulate,
    "posterior": cmd_posterior,
    "rates": cmd_rates,
    "minimax": cmd_minimax,
    "eb": cmd_eb,
    "varest": cmd_varest,
    "experiment": cmd_experiment,
}


def main(argv=None, out=None, err=None) -> int:
    out = sys.stdout if out is None else out
    err = sys.stderr if err is None else err
    parser = build_parser()
    try:
        # argparse reports usage errors on sys.stderr
        with contextlib.redirect_stderr(err):
            args = parser.parse_args(argv)
            COMMANDS[args.command](args, args.subparser, out)
    except SystemExit as exc:
        return int(exc.code or 0)
    except BrokenPipeError:
        # reader went away (e.g. piped into head); silence the flush at exit
        os.dup2(os.open(os.devnull, os.O_WRONLY), sys.stdout.fileno())
        return 1
    except (ValueError, OSError) as exc:
        err.write(f"seqinv {args.command}: error: {exc}\n")
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
