"""Simulation of data in the domain of attraction of a Husler-Reiss model,
random sparse graphs, and Monte-Carlo success-rate experiments.

Randomness is drawn from ``numpy.random.SeedSequence(seed, spawn_key=...)``
streams keyed by ``(replication, phase)``, so each replication is
reproducible on its own and results do not depend on how replications are
scheduled across threads.
"""
from __future__ import annotations

import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import networkx as nx
import numpy as np

from .hr_core import (
    DIAMOND_THETA,
    STAR_THETA,
    EdgeSet,
    elementwise_max_norm,
    graph_from_theta,
    sigma_from_theta,
    symmetrize,
)
from .solver import NumericalBreakdown, SolverConfig, solve
from .tail import aggregate_S, rank_transform, select_exceedances

PHASE_MODEL = 0
PHASE_SAMPLE = 1

MODEL_NAMES = ("star", "diamond", "pa")


def rng_for(seed, *key):
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=tuple(key)))


def _as_rng(seed):
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def check_precision(theta, tol=1e-8):
    """Validate ``Theta 1 = 0``, positive semidefiniteness and rank ``d - 1``."""
    theta = symmetrize(theta, "theta")
    d = theta.shape[0]
    scale = max(1.0, float(np.max(np.abs(theta))))
    if np.max(np.abs(theta.sum(axis=1))) > tol * scale * d:
        raise ValueError("theta rows must sum to zero")
    eig = np.linalg.eigvalsh(theta)
    if eig[0] < -tol * scale or eig[1] <= tol * scale:
        raise ValueError("theta must be positive semidefinite with rank d - 1")
    return theta


def sample_degenerate_gaussian(sigma, n, seed=None):
    """Draw ``n`` rows from ``N(0, sigma)`` for a possibly singular PSD ``sigma``.

    Samples are generated along eigenvectors with positive eigenvalues, so
    they lie exactly in the range of ``sigma``.
    """
    sigma = symmetrize(sigma, "sigma")
    rng = _as_rng(seed)
    d = sigma.shape[0]
    vals, vecs = np.linalg.eigh(sigma)
    top = max(float(vals[-1]), 0.0)
    if vals[0] < -1e-8 * max(top, 1e-300) and vals[0] < -1e-300:
        raise ValueError(f"sigma has a negative eigenvalue {vals[0]:.3g}")
    keep = vals > 1e-12 * max(top, 1e-300)
    if not np.any(keep):
        return np.zeros((n, d))
    factor = vecs[:, keep] * np.sqrt(vals[keep])
    z = rng.standard_normal((n, int(keep.sum())))
    return z @ factor.T


def sample_mvpareto(theta, n, seed=None):
    """``X = Y exp(W - diag(Sigma)/2)`` with ``W ~ N(0, Sigma)`` and ``Y`` standard Pareto."""
    theta = check_precision(theta)
    rng = _as_rng(seed)
    sigma = sigma_from_theta(theta)
    w = sample_degenerate_gaussian(sigma, n, rng)
    y = 1.0 / (1.0 - rng.random(n))
    return y[:, None] * np.exp(w - np.diag(sigma) / 2.0)


def generate_pa_graph(d, seed=None):
    """Preferential-attachment tree: each new node attaches to one existing node."""
    if d < 2:
        raise ValueError("d must be at least 2")
    rng = _as_rng(seed)
    g = nx.barabasi_albert_graph(d, 1, seed=int(rng.integers(2**32)))
    return EdgeSet(d, g.edges())


def theta_from_graph(edges: EdgeSet, weight_rule="unit", lo=0.5, hi=1.0, seed=None):
    """Weighted graph Laplacian: ``-w_ij`` on edges, weighted degree on the diagonal."""
    if not edges.is_connected():
        raise ValueError("graph must be connected")
    if weight_rule not in ("unit", "uniform"):
        raise ValueError(f"unknown weight rule {weight_rule!r}")
    rng = _as_rng(seed)
    theta = np.zeros((edges.d, edges.d))
    for i, j in edges.sorted():
        w = 1.0 if weight_rule == "unit" else float(rng.uniform(lo, hi))
        theta[i, j] = theta[j, i] = -w
    np.fill_diagonal(theta, -theta.sum(axis=1))
    return theta


def model_theta(model, d=None, seed=0):
    """``(theta, edges)`` for a named model or an explicit matrix."""
    if isinstance(model, str):
        if model == "star":
            theta = STAR_THETA.copy()
        elif model == "diamond":
            theta = DIAMOND_THETA.copy()
        elif model == "pa":
            if d is None:
                raise ValueError("model 'pa' requires d")
            edges = generate_pa_graph(d, rng_for(seed, PHASE_MODEL))
            theta = theta_from_graph(edges, "uniform", seed=rng_for(seed, PHASE_MODEL, 1))
            return theta, edges
        else:
            raise ValueError(f"unknown model {model!r}; expected one of {MODEL_NAMES}")
    else:
        theta = check_precision(np.asarray(model, dtype=float))
    return theta, graph_from_theta(theta, 1e-9)


@dataclass
class ExperimentConfig:
    n: int
    replications: int = 20
    model: object = "star"
    d: int | None = None
    k_fraction: float = 0.05
    k_n: int | None = None
    M: float = 1.0
    gamma: float = 0.2
    edge_threshold: float = 0.01
    mode: str = "shifted"
    seed: int = 0

    def __post_init__(self):
        if self.replications < 1:
            raise ValueError("replications must be at least 1")
        if self.n < 2:
            raise ValueError("n must be at least 2")
        k = self.k()
        if not 1 <= k < self.n:
            raise ValueError(f"k_n must satisfy 1 <= k_n < n, got {k}")
        if self.M <= 0:
            raise ValueError("M must be positive")
        if self.gamma < 0:
            raise ValueError("gamma must be non-negative")

    def k(self):
        return int(self.k_n) if self.k_n is not None else int(math.floor(self.k_fraction * self.n))


@dataclass(frozen=True)
class Replication:
    edges_found: EdgeSet
    exact_match: bool
    theta_error: float
    converged: bool
    failed: bool = False


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    true_edges: EdgeSet
    per_replication: list
    timing: dict = field(default_factory=dict)

    @property
    def success_rate(self):
        return float(np.mean([r.exact_match for r in self.per_replication]))

    def to_json(self):
        from .io import edges_to_json

        cfg = asdict(self.config)
        if not isinstance(cfg["model"], str):
            cfg["model"] = np.asarray(cfg["model"], dtype=float).tolist()
        return {
            "config": cfg,
            "k_n": self.config.k(),
            "true_edges": edges_to_json(self.true_edges),
            "success_rate": self.success_rate,
            "per_replication": [
                {
                    "edges_found": edges_to_json(r.edges_found)["edges"],
                    "exact_match": r.exact_match,
                    "theta_error": r.theta_error,
                    "converged": r.converged,
                    "failed": r.failed,
                }
                for r in self.per_replication
            ],
        }


def default_threads():
    env = os.environ.get("EGLASSO_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def _one_replication(cfg: ExperimentConfig, theta, true_edges, r):
    timing = {}
    t0 = time.perf_counter()
    x = sample_mvpareto(theta, cfg.n, rng_for(cfg.seed, r, PHASE_SAMPLE))
    t1 = time.perf_counter()
    timing["simulate"] = t1 - t0
    solver_cfg = SolverConfig(
        gamma=cfg.gamma, M=cfg.M, mode=cfg.mode, edge_threshold=cfg.edge_threshold
    )
    try:
        tail = aggregate_S(select_exceedances(rank_transform(x), cfg.k()), cfg.M)
        t2 = time.perf_counter()
        timing["estimate_S"] = t2 - t1
        fit = solve(tail.S_star, solver_cfg)
        timing["solve"] = time.perf_counter() - t2
    except (np.linalg.LinAlgError, NumericalBreakdown, ValueError):
        timing.setdefault("estimate_S", time.perf_counter() - t1)
        timing.setdefault("solve", 0.0)
        rep = Replication(EdgeSet(theta.shape[0]), False, float("nan"), False, failed=True)
        return rep, timing
    # non-convergence counts as a failure but keeps the iterate's diagnostics
    exact = fit.converged and fit.edges == true_edges
    rep = Replication(
        edges_found=fit.edges,
        exact_match=bool(exact),
        theta_error=elementwise_max_norm(fit.theta_lasso - theta),
        converged=fit.converged,
    )
    return rep, timing


def run_experiment(cfg: ExperimentConfig, threads=None):
    """Simulate, estimate and compare against the true graph for every replication."""
    theta, true_edges = model_theta(cfg.model, cfg.d, cfg.seed)
    threads = default_threads() if threads is None else max(1, int(threads))
    reps = range(cfg.replications)
    if threads == 1:
        outs = [_one_replication(cfg, theta, true_edges, r) for r in reps]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            outs = list(pool.map(lambda r: _one_replication(cfg, theta, true_edges, r), reps))
    timing = {
        phase: float(sum(t[phase] for _, t in outs)) for phase in ("simulate", "estimate_S", "solve")
    }
    return ExperimentResult(
        config=cfg,
        true_edges=true_edges,
        per_replication=[rep for rep, _ in outs],
        timing=timing,
    )
