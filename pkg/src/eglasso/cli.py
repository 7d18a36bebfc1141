"""Command-line interface: ``eglasso {estimate,simulate,diagnose,benchmark}``.

Exit codes: 0 success, 2 usage error, 3 data error, 4 solver did not converge.
Nodes are numbered from 1 in every file this tool reads or writes.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import logging
import sys
from pathlib import Path

import numpy as np

from . import io
from .diagnostics import IncoherenceViolation, gamma_upper_bound, incoherence_sweep
from .hr_core import graph_from_theta
from .simulate import (
    MODEL_NAMES,
    PHASE_SAMPLE,
    ExperimentConfig,
    model_theta,
    rng_for,
    run_experiment,
    sample_mvpareto,
)
from .solver import MODES, NumericalBreakdown, SolverConfig, solve
from .tail import DEFAULT_K_FRACTION, aggregate_S, default_k, rank_transform, select_exceedances

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_NOT_CONVERGED = 4


class UsageError(Exception):
    pass


def _positive(name):
    def conv(text):
        try:
            v = float(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"{name} must be a number, got {text!r}") from None
        if not v > 0:
            raise argparse.ArgumentTypeError(f"{name} must be positive, got {text}")
        return v

    return conv


def _nonneg(name):
    def conv(text):
        try:
            v = float(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"{name} must be a number, got {text!r}") from None
        if v < 0:
            raise argparse.ArgumentTypeError(f"{name} must be non-negative, got {text}")
        return v

    return conv


def _fraction(text):
    v = _positive("--k-fraction")(text)
    if v >= 1:
        raise argparse.ArgumentTypeError("--k-fraction must lie in (0, 1)")
    return v


def _epsilon(text):
    v = _positive("--epsilon")(text)
    if v >= 1:
        raise argparse.ArgumentTypeError("--epsilon must lie in (0, 1)")
    return v


def parse_grid(text):
    """``start:stop:num`` (linear grid) or a comma-separated list of values."""
    text = text.strip()
    if not text:
        raise UsageError("M grid is empty")
    try:
        if ":" in text:
            start, stop, num = text.split(":")
            grid = np.linspace(float(start), float(stop), int(num))
        else:
            grid = np.array([float(v) for v in text.split(",") if v.strip()])
    except ValueError:
        raise UsageError(f"cannot parse M grid {text!r}") from None
    if grid.size == 0:
        raise UsageError("M grid is empty")
    if np.any(grid <= 0):
        raise UsageError("M grid values must be positive")
    return grid


def _out_dir(path):
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


# -- estimate ---------------------------------------------------------------


def cmd_estimate(args):
    labels, x = io.read_sample_csv(args.data, min_rows=10, min_cols=1)
    if len(labels) < 2:
        raise UsageError(f"{args.data}: estimation needs at least 2 columns")
    n, d = x.shape
    k_n = args.k if args.k is not None else default_k(n, args.k_fraction)
    if not 1 <= k_n < n:
        raise UsageError(f"k_n={k_n} must satisfy 1 <= k_n < n={n}")
    try:
        tail = aggregate_S(select_exceedances(rank_transform(x), k_n), args.M)
    except (ValueError, np.linalg.LinAlgError) as exc:
        raise io.DataError(str(exc)) from exc
    cfg = SolverConfig(
        gamma=args.gamma, M=args.M, mode=args.mode, edge_threshold=args.threshold
    )
    try:
        fit = solve(tail.S_star, cfg)
    except (np.linalg.LinAlgError, NumericalBreakdown) as exc:
        raise io.DataError(f"solver failed: {exc}") from exc

    out = _out_dir(args.out_dir)
    io.write_json(out / "tail_covariance.json", tail.to_json())
    result = fit.to_json()
    result["labels"] = labels
    io.write_json(out / "fit.json", result)
    (out / "graph.dot").write_text(io.edges_to_dot(fit.edges, labels, fit.theta_lasso))
    edge_names = [f"{labels[i]}--{labels[j]}" for i, j in fit.edges.sorted()]
    summary = "\n".join(
        [
            f"n = {n}, d = {d}, k_n = {k_n}, M = {args.M:g}, gamma = {args.gamma:g}, mode = {args.mode}",
            f"edges found: {len(fit.edges)}",
            *(f"  {e}" for e in edge_names),
            f"objective = {fit.objective:.10g}",
            f"KKT residual = {fit.kkt_residual:.3g}",
            f"converged = {fit.converged} after {fit.sweeps} sweeps",
        ]
    )
    (out / "summary.txt").write_text(summary + "\n")
    print(summary)
    return EXIT_OK if fit.converged else EXIT_NOT_CONVERGED


# -- simulate ---------------------------------------------------------------


def cmd_simulate(args):
    if args.theta is not None:
        model = io.read_matrix(args.theta)
    else:
        model = args.model
        if model == "pa" and args.d is None:
            raise UsageError("--model pa requires --d")
    try:
        theta, edges = model_theta(model, args.d, args.seed)
    except ValueError as exc:
        raise io.DataError(str(exc)) from exc
    x = sample_mvpareto(theta, args.n, rng_for(args.seed, 0, PHASE_SAMPLE))
    out = _out_dir(args.out_dir)
    io.write_sample_csv(out / "sample.csv", x)
    io.write_json(out / "theta.json", io.matrix_to_json(theta))
    io.write_json(out / "edges.json", io.edges_to_json(edges))
    print(f"wrote {args.n} x {theta.shape[0]} sample to {out / 'sample.csv'}")
    return EXIT_OK


# -- diagnose ---------------------------------------------------------------


def cmd_diagnose(args):
    theta = io.read_matrix(args.theta)
    if args.edges is not None:
        edges = io.edges_from_json(io.read_json(args.edges))
        if edges.d != theta.shape[0]:
            raise io.DataError("edge set and theta have different dimensions")
    else:
        edges = graph_from_theta(theta, args.threshold)
    grid = parse_grid(args.m_grid)
    sweep = incoherence_sweep(theta, edges, grid, convention=args.convention)

    out = _out_dir(args.out_dir)
    with open(out / "incoherence.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["M", "value", "satisfied", "gamma_upper"])
        for rep in sweep.reports:
            bound = ""
            if rep.satisfied and len(edges):
                bound = io.fmt_float(
                    gamma_upper_bound(theta, edges, rep.M, args.epsilon, args.convention).upper
                )
            writer.writerow(
                [io.fmt_float(rep.M), io.fmt_float(rep.alpha_complement), int(rep.satisfied), bound]
            )

    summary = {
        "convention": args.convention,
        "epsilon": args.epsilon,
        "crossings": sweep.crossings,
        "satisfied_intervals": [list(iv) for iv in sweep.satisfied_intervals()],
        "any_satisfied": any(r.satisfied for r in sweep.reports),
    }
    if args.M is not None:
        try:
            gb = gamma_upper_bound(theta, edges, args.M, args.epsilon, args.convention)
            summary["gamma_upper_bound"] = {
                "M": args.M,
                **dataclasses.asdict(gb),
            }
        except IncoherenceViolation as exc:
            summary["gamma_upper_bound"] = {"M": args.M, "error": str(exc)}
    io.write_json(out / "diagnose.json", summary)

    if not summary["any_satisfied"]:
        print("mutual incoherence is not satisfied anywhere on the grid")
    for m in sweep.crossings:
        print(f"boundary crossing at M = {m:.4f}")
    return EXIT_OK


# -- benchmark --------------------------------------------------------------

_CONFIG_FIELDS = {f.name for f in dataclasses.fields(ExperimentConfig)}


def load_benchmark_config(path):
    """Parse a JSON config into a list of :class:`ExperimentConfig`, one per ``n``."""
    raw = io.read_json(path)
    if not isinstance(raw, dict):
        raise io.DataError(f"{path}: config must be a JSON object")
    unknown = sorted(set(raw) - _CONFIG_FIELDS)
    if unknown:
        raise io.DataError(f"{path}: unknown config field(s): {', '.join(unknown)}")
    if "n" not in raw:
        raise io.DataError(f"{path}: missing required field: n")
    ns = raw["n"] if isinstance(raw["n"], list) else [raw["n"]]
    reps = raw.get("replications")
    reps_list = reps if isinstance(reps, list) else [reps] * len(ns)
    if len(reps_list) != len(ns):
        raise io.DataError(f"{path}: field replications: list length must match n")
    problems = []
    for key in ("k_fraction", "k_n", "M", "gamma", "edge_threshold", "seed", "d"):
        if key in raw and raw[key] is not None and not isinstance(raw[key], (int, float)):
            problems.append(f"field {key}: expected a number")
    if "mode" in raw and raw["mode"] not in MODES:
        problems.append(f"field mode: expected one of {MODES}")
    model = raw.get("model", "star")
    if isinstance(model, str) and model not in MODEL_NAMES:
        problems.append(f"field model: expected one of {MODEL_NAMES} or a matrix")
    if problems:
        raise io.DataError(f"{path}: " + "; ".join(problems))
    configs = []
    for n, r in zip(ns, reps_list):
        fields = {k: v for k, v in raw.items() if k not in ("n", "replications")}
        if r is not None:
            fields["replications"] = int(r)
        try:
            configs.append(ExperimentConfig(n=int(n), **fields))
        except (TypeError, ValueError) as exc:
            raise io.DataError(f"{path}: n={n}: {exc}") from exc
    return configs


def cmd_benchmark(args):
    configs = load_benchmark_config(args.config)
    out = _out_dir(args.out_dir)
    results = []
    for cfg in configs:
        try:
            results.append(run_experiment(cfg, threads=args.threads))
        except ValueError as exc:
            raise io.DataError(str(exc)) from exc
    io.write_json(out / "result.json", {"results": [r.to_json() for r in results]})
    with open(out / "success_rate.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["n", "k_n", "replications", "success_rate"])
        for r in results:
            writer.writerow(
                [r.config.n, r.config.k(), r.config.replications, io.fmt_float(r.success_rate)]
            )
    io.write_json(
        out / "timing.json",
        [{"n": r.config.n, **r.timing} for r in results],
    )
    header = f"{'n':>10} {'k_n':>8} {'success':>8} {'simulate[s]':>12} {'estimate_S[s]':>14} {'solve[s]':>10}"
    print(header)
    for r in results:
        t = r.timing
        print(
            f"{r.config.n:>10} {r.config.k():>8} {r.success_rate:>8.3f} "
            f"{t['simulate']:>12.3f} {t['estimate_S']:>14.3f} {t['solve']:>10.3f}"
        )
    return EXIT_OK


# -- entry point ------------------------------------------------------------


def build_parser():
    p = argparse.ArgumentParser(prog="eglasso", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    e = sub.add_parser("estimate", help="estimate the extremal graph from a CSV sample")
    e.add_argument("data", help="CSV with a header row of node labels")
    e.add_argument("--gamma", type=_nonneg("--gamma"), required=True)
    k = e.add_mutually_exclusive_group()
    k.add_argument("--k", type=int, default=None, help="number of tail observations k_n")
    k.add_argument("--k-fraction", type=_fraction, default=DEFAULT_K_FRACTION)
    e.add_argument("--M", type=_positive("--M"), default=1.0)
    e.add_argument("--threshold", type=_nonneg("--threshold"), default=0.01)
    e.add_argument("--mode", choices=MODES, default="shifted")
    e.add_argument("--out-dir", default=".")
    e.set_defaults(func=cmd_estimate)

    s = sub.add_parser("simulate", help="simulate a sample from a Husler-Reiss model")
    s.add_argument("--model", choices=MODEL_NAMES, default="star")
    s.add_argument("--theta", default=None, help="explicit precision matrix (JSON or CSV)")
    s.add_argument("--d", type=int, default=None)
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out-dir", default=".")
    s.set_defaults(func=cmd_simulate)

    g = sub.add_parser("diagnose", help="mutual incoherence sweep and gamma upper bound")
    g.add_argument("--theta", required=True, help="precision matrix (JSON or CSV)")
    g.add_argument("--edges", default=None, help="edge-set JSON; default: nonzeros of theta")
    g.add_argument("--m-grid", default="0.001:1:1000", help="start:stop:num or comma list")
    g.add_argument("--M", type=_positive("--M"), default=None, help="M for the gamma bound")
    g.add_argument("--epsilon", type=_epsilon, default=0.5)
    g.add_argument("--threshold", type=_nonneg("--threshold"), default=1e-9)
    g.add_argument("--convention", choices=("offdiag", "augmented"), default="offdiag")
    g.add_argument("--out-dir", default=".")
    g.set_defaults(func=cmd_diagnose)

    b = sub.add_parser("benchmark", help="Monte-Carlo success rates from a JSON config")
    b.add_argument("config")
    b.add_argument("--threads", type=int, default=None, help="default: EGLASSO_THREADS or CPU count")
    b.add_argument("--out-dir", default=".")
    b.set_defaults(func=cmd_benchmark)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    if getattr(args, "n", None) is not None and args.n < 1:
        parser.error("--n must be at least 1")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"eglasso: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (io.DataError, FileNotFoundError) as exc:
        print(f"eglasso: data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
