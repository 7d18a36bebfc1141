"""Extreme graphical lasso by blockwise coordinate descent.

Solves

    min_T  -log det T + tr(S* T) + gamma * sum_{i != j} |T_ij - c|

over positive definite ``T`` (the shifted precision ``Theta*``), where
``c = 1 / (d^2 M)`` in ``"shifted"`` mode and ``c = 0`` in ``"modified"``
mode. The iteration keeps both ``T`` and its inverse ``W`` and updates one
column at a time: with the target column moved last, ``T11`` is frozen,
``T11^{-1}`` is read off ``W`` by a rank-one downdate, the off-diagonal
column is found from a box-free lasso in ``beta = (t_1d - c) w_dd``, and
``W`` is refreshed by the partitioned inverse formula. After its own
update, ``W_dd`` equals ``S*_dd``.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .hr_core import DEFAULT_EDGE_THRESHOLD, EdgeSet, graph_from_theta, symmetrize

log = logging.getLogger(__name__)

MODES = ("shifted", "modified")


class NumericalBreakdown(FloatingPointError):
    """The column update produced a non-finite or non-positive pivot."""


@dataclass
class SolverConfig:
    gamma: float
    M: float = 1.0
    mode: str = "shifted"
    outer_tol: float | None = None
    inner_tol: float = 1e-8
    max_outer_sweeps: int = 500
    max_inner_iters: int = 10_000
    edge_threshold: float = DEFAULT_EDGE_THRESHOLD

    def __post_init__(self):
        if self.gamma < 0:
            raise ValueError("gamma must be non-negative")
        if self.M <= 0:
            raise ValueError("M must be positive")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.outer_tol is not None and self.outer_tol <= 0:
            raise ValueError("outer_tol must be positive")
        if self.inner_tol <= 0:
            raise ValueError("inner_tol must be positive")
        if self.max_outer_sweeps < 1 or self.max_inner_iters < 1:
            raise ValueError("iteration limits must be at least 1")
        if self.edge_threshold < 0:
            raise ValueError("edge_threshold must be non-negative")

    def center(self, d):
        """Penalty centre: ``1/(d^2 M)`` when shifted, 0 when modified."""
        return 1.0 / (d * d * self.M) if self.mode == "shifted" else 0.0


@dataclass
class SolverState:
    theta_star: np.ndarray
    sigma: np.ndarray
    sweeps: int = 0
    last_max_delta: float = np.inf


@dataclass(frozen=True)
class FitResult:
    theta_lasso: np.ndarray
    theta_star: np.ndarray
    edges: EdgeSet
    objective: float
    kkt_residual: float
    converged: bool
    sweeps: int
    c: float
    history: list = field(default_factory=list, compare=False, repr=False)

    def to_json(self):
        from .io import edges_to_json, matrix_to_json

        return {
            "theta_lasso": matrix_to_json(self.theta_lasso),
            "theta_star": matrix_to_json(self.theta_star),
            "edges": edges_to_json(self.edges),
            "objective": float(self.objective),
            "kkt_residual": float(self.kkt_residual),
            "converged": bool(self.converged),
            "sweeps": int(self.sweeps),
        }


def soft_threshold(x, t):
    return np.sign(x) * max(abs(x) - t, 0.0)


def objective(theta_star, S_star, gamma, c):
    """Penalised negative log-likelihood; ``+inf`` off the positive definite cone."""
    sign, logdet = np.linalg.slogdet(theta_star)
    if sign <= 0:
        return np.inf
    off = theta_star - c
    np.fill_diagonal(off, 0.0)
    return float(-logdet + np.sum(S_star * theta_star) + gamma * np.abs(off).sum())


def inner_lasso(theta11_inv, sigma_dd, s_1d, gamma, c, beta_init=None, tol=1e-8, max_iter=10_000):
    """Cyclic coordinate descent for

        min_b  1/2 b^T Q b + b^T (c sigma_dd Q 1 + s_1d) + gamma ||b||_1

    with ``Q = theta11_inv``. Stops when no coordinate moves more than ``tol``
    in a full pass.
    """
    Q = np.asarray(theta11_inv, dtype=float)
    s_1d = np.asarray(s_1d, dtype=float)
    p = s_1d.shape[0]
    b = np.zeros(p) if beta_init is None else np.array(beta_init, dtype=float)
    lin = c * sigma_dd * Q.sum(axis=1) + s_1d
    grad = Q @ b + lin  # maintained gradient of the smooth part
    qdiag = np.diag(Q).copy()
    if np.any(qdiag <= 0) or not np.all(np.isfinite(Q)):
        raise NumericalBreakdown("inner problem matrix is not positive definite")
    for _ in range(max_iter):
        max_change = 0.0
        for j in range(p):
            bj = b[j]
            r = grad[j] - qdiag[j] * bj
            new = soft_threshold(-r, gamma) / qdiag[j]
            delta = new - bj
            if delta != 0.0:
                b[j] = new
                grad += delta * Q[:, j]
                if abs(delta) > max_change:
                    max_change = abs(delta)
        if not np.all(np.isfinite(b)):
            raise NumericalBreakdown("non-finite lasso coefficients")
        if max_change < tol:
            break
    return b


def column_update(state: SolverState, S_star, col, cfg: SolverConfig, c=None):
    """One block step on column ``col``; modifies ``state`` in place and returns it."""
    W = state.sigma
    T = state.theta_star
    d = W.shape[0]
    if c is None:
        c = cfg.center(d)
    rest = np.concatenate([np.arange(col), np.arange(col + 1, d)])
    w_1d = W[rest, col]
    Q = W[np.ix_(rest, rest)] - np.outer(w_1d, w_1d) / W[col, col]
    # the diagonal of the inverse is pinned to S* by the KKT conditions
    w_dd = S_star[col, col]
    Q = (Q + Q.T) / 2.0

    beta0 = (T[rest, col] - c) * w_dd
    beta = inner_lasso(
        Q, w_dd, S_star[rest, col], cfg.gamma, c, beta0, cfg.inner_tol, cfg.max_inner_iters
    )
    t_1d = beta / w_dd + c
    Qt = Q @ t_1d
    t_dd = 1.0 / w_dd + t_1d @ Qt
    pivot = t_dd - t_1d @ Qt
    if not np.isfinite(pivot) or pivot <= 0 or not np.all(np.isfinite(Qt)):
        raise NumericalBreakdown(
            f"column {col}: pivot theta_dd - t^T Q t = {pivot:.3g} (sweep {state.sweeps})"
        )

    T[rest, col] = t_1d
    T[col, rest] = t_1d
    T[col, col] = t_dd
    # partitioned inverse with Q = T11^{-1} held fixed
    W[np.ix_(rest, rest)] = Q + np.outer(Qt, Qt) / pivot
    W[rest, col] = -Qt / pivot
    W[col, rest] = -Qt / pivot
    W[col, col] = 1.0 / pivot
    return state


def _initial_state(S_star):
    # W0 = S*, T0 = S*^{-1}; a tiny ridge is added when S* is close to singular
    d = S_star.shape[0]
    sigma0 = S_star.copy()
    if np.linalg.cond(S_star) > 1e12:
        sigma0 += 1e-8 * np.trace(S_star) / d * np.eye(d)
    inv_chol = np.linalg.inv(np.linalg.cholesky(sigma0))
    theta0 = inv_chol.T @ inv_chol
    return SolverState(theta_star=(theta0 + theta0.T) / 2.0, sigma=sigma0)


def default_outer_tol(S_star):
    return 1e-6 * float(np.mean(np.abs(np.diag(S_star))))


def kkt_residual(theta_star, S_star, gamma, c, zero_tol=1e-10):
    """Largest violation of ``-(Theta*)^{-1} + S* + gamma Z = 0``.

    On entries with ``Theta*_ij == c`` (within ``zero_tol``) the violation is
    ``max(0, |G_ij| - gamma)``, i.e. ``gamma`` times the distance of
    ``G_ij / gamma`` from ``[-1, 1]``.
    """
    theta_star = np.asarray(theta_star, dtype=float)
    G = S_star - np.linalg.inv(theta_star)
    d = G.shape[0]
    off = ~np.eye(d, dtype=bool)
    dev = theta_star - c
    at_center = off & (np.abs(dev) <= zero_tol)
    free = off & ~at_center
    viol = np.zeros_like(G)
    viol[~off] = np.abs(G[~off])
    viol[free] = np.abs(G[free] + gamma * np.sign(dev[free]))
    viol[at_center] = np.maximum(np.abs(G[at_center]) - gamma, 0.0)
    return float(viol.max())


def solve(S_star, cfg: SolverConfig, init=None, track_objective=False):
    """Fit the extreme graphical lasso on a positive definite ``S_star``.

    ``S_star`` may be a matrix or a :class:`~eglasso.tail.TailCovariance`
    (its ``S_star`` is used). ``init`` optionally warm-starts from a previous
    ``Theta*``. With ``track_objective`` the objective after every column
    update is kept in ``FitResult.history``.
    """
    S_star = getattr(S_star, "S_star", S_star)
    S_star = symmetrize(S_star, "S_star")
    d = S_star.shape[0]
    try:
        np.linalg.cholesky(S_star)
    except np.linalg.LinAlgError:
        eig = float(np.linalg.eigvalsh(S_star)[0])
        raise np.linalg.LinAlgError(
            f"S_star is not positive definite (smallest eigenvalue {eig:.3g})"
        ) from None
    c = cfg.center(d)
    outer_tol = cfg.outer_tol
    if outer_tol is None:
        outer_tol = default_outer_tol(S_star)

    state = _initial_state(S_star)
    if init is not None:
        theta0 = symmetrize(init, "init")
        sigma0 = np.linalg.inv(theta0)
        state = SolverState(theta_star=theta0.copy(), sigma=(sigma0 + sigma0.T) / 2.0)

    history = []
    if track_objective:
        history.append(objective(state.theta_star, S_star, cfg.gamma, c))
    converged = False
    if d == 1:
        converged = True
    while not converged and state.sweeps < cfg.max_outer_sweeps:
        before = state.sigma.copy()
        for col in range(d):
            column_update(state, S_star, col, cfg, c)
            if track_objective:
                history.append(objective(state.theta_star, S_star, cfg.gamma, c))
        state.sweeps += 1
        state.last_max_delta = float(np.max(np.abs(state.sigma - before)))
        converged = state.last_max_delta < outer_tol
    if not converged:
        log.warning(
            "extreme graphical lasso did not converge in %d sweeps (last change %.3g)",
            state.sweeps,
            state.last_max_delta,
        )

    theta_star = (state.theta_star + state.theta_star.T) / 2.0
    theta_lasso = theta_star - c
    return FitResult(
        theta_lasso=theta_lasso,
        theta_star=theta_star,
        edges=graph_from_theta(theta_lasso, cfg.edge_threshold),
        objective=objective(theta_star, S_star, cfg.gamma, c),
        kkt_residual=kkt_residual(theta_star, S_star, cfg.gamma, c),
        converged=converged,
        sweeps=state.sweeps,
        c=c,
        history=history,
    )


def solve_path(S_star, gammas, cfg: SolverConfig):
    """Solve over a sequence of penalties, warm-starting each fit from the previous one."""
    results = []
    prev = None
    for g in gammas:
        step_cfg = SolverConfig(**{**cfg.__dict__, "gamma": float(g)})
        fit = solve(S_star, step_cfg, init=prev)
        results.append(fit)
        prev = fit.theta_star
    return results
