"""Computable support-recovery conditions.

``Omega = Sigma* (x) Sigma*`` indexes rows and columns by ordered node pairs
``(i, j) -> i * d + j``. By default ``E`` is the set of ordered off-diagonal
edge pairs and ``E^c`` the ordered off-diagonal non-edge pairs; diagonal
pairs are left out of both. ``convention="augmented"`` adds the diagonal
pairs to ``E`` instead (and ``E^c`` is then the complement within all pairs).
Only the default gives the admissible ranges ``(0, 0.2768]`` for the 4-node
star and ``[0.0224, 0.1588]`` for the diamond fixture.

``Omega`` has ``d^4`` entries, so exact evaluation is practical for
``d <= 60`` or so.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import bisect

from .hr_core import EdgeSet, operator_inf_norm, sigma_from_theta

CONVENTIONS = ("offdiag", "augmented")


class IncoherenceViolation(ValueError):
    """Mutual incoherence fails at the requested ``M``."""


@dataclass(frozen=True)
class IncoherenceReport:
    M: float
    alpha_complement: float
    satisfied: bool

    @property
    def alpha(self):
        return 1.0 - self.alpha_complement if self.satisfied else None


@dataclass(frozen=True)
class GammaBound:
    upper: float
    epsilon: float
    D: int
    alpha: float
    sigma_star_norm: float
    omega_ee_inv_norm: float


@dataclass(frozen=True)
class SweepResult:
    reports: list
    crossings: list

    def satisfied_intervals(self):
        """Grid-resolution intervals of ``M`` on which the condition holds."""
        out = []
        start = prev = None
        for rep in self.reports:
            if rep.satisfied and start is None:
                start = rep.M
            if not rep.satisfied and start is not None:
                out.append((start, prev))
                start = None
            prev = rep.M
        if start is not None:
            out.append((start, self.reports[-1].M))
        return out


def _pair_index(edges: EdgeSet, convention):
    if convention not in CONVENTIONS:
        raise ValueError(f"convention must be one of {CONVENTIONS}")
    adj = edges.adjacency()
    in_e = adj.copy()
    if convention == "augmented":
        np.fill_diagonal(in_e, True)
        in_ec = ~in_e
    else:
        in_ec = ~adj
        np.fill_diagonal(in_ec, False)
    return np.flatnonzero(in_e.ravel()), np.flatnonzero(in_ec.ravel())


def _sigma_star(theta, M):
    return sigma_from_theta(theta) + M


def _omega_blocks(theta, edges, M, convention):
    s_star = _sigma_star(theta, M)
    e_idx, ec_idx = _pair_index(edges, convention)
    d = s_star.shape[0]
    # rows/cols of kron(A, A) at pair indices without forming d^2 x d^2
    ei, ej = np.divmod(e_idx, d)
    ci, cj = np.divmod(ec_idx, d)
    om_ee = s_star[np.ix_(ei, ei)] * s_star[np.ix_(ej, ej)]
    om_ece = s_star[np.ix_(ci, ei)] * s_star[np.ix_(cj, ej)]
    return s_star, om_ee, om_ece


def incoherence_value(theta, edges: EdgeSet, M, convention="offdiag"):
    """``|||Omega_{E^c E} Omega_{EE}^{-1}|||_inf`` at shift ``M``."""
    _, om_ee, om_ece = _omega_blocks(theta, edges, M, convention)
    if om_ece.shape[0] == 0:
        return 0.0
    try:
        prod = np.linalg.solve(om_ee.T, om_ece.T).T
    except np.linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError(f"Omega_EE is singular at M={M}") from exc
    return operator_inf_norm(prod)


def mutual_incoherence(theta, edges: EdgeSet, M, convention="offdiag"):
    if M <= 0:
        raise ValueError("M must be positive")
    value = incoherence_value(theta, edges, M, convention)
    return IncoherenceReport(M=float(M), alpha_complement=float(value), satisfied=value < 1.0)


def incoherence_sweep(theta, edges: EdgeSet, M_grid, convention="offdiag", xtol=1e-4):
    """Evaluate over ``M_grid`` and bisect every sign change of ``value - 1``."""
    grid = np.asarray(sorted(float(m) for m in M_grid))
    if grid.size == 0:
        raise ValueError("M grid must not be empty")
    if np.any(grid <= 0):
        raise ValueError("M values must be positive")
    reports = [mutual_incoherence(theta, edges, m, convention) for m in grid]
    excess = np.array([r.alpha_complement - 1.0 for r in reports])
    crossings = []
    for a, b, fa, fb in zip(grid[:-1], grid[1:], excess[:-1], excess[1:]):
        if fa == 0.0:
            crossings.append(float(a))
        elif fa * fb < 0:
            root = bisect(
                lambda m: incoherence_value(theta, edges, m, convention) - 1.0, a, b, xtol=xtol
            )
            crossings.append(float(root))
    return SweepResult(reports=reports, crossings=crossings)


def gamma_upper_bound(theta, edges: EdgeSet, M, epsilon=0.5, convention="offdiag"):
    """Largest penalty allowed by the support-recovery condition on ``gamma``.

    ``(1-eps) a (1-a) / (D |||S*||| |||Om_EE^-1||| [(1-eps) a + |||S*|||^2 |||Om_EE^-1|||])``
    with ``a`` the incoherence margin and ``D`` the maximum degree.
    """
    if not 0 < epsilon < 1:
        raise ValueError("epsilon must lie in (0, 1)")
    report = mutual_incoherence(theta, edges, M, convention)
    if not report.satisfied:
        raise IncoherenceViolation(
            f"mutual incoherence fails at M={M} (value {report.alpha_complement:.4f} >= 1)"
        )
    alpha = report.alpha
    D = edges.max_degree()
    if D == 0:
        raise ValueError("edge set is empty; the bound is undefined")
    s_star, om_ee, _ = _omega_blocks(theta, edges, M, convention)
    s_norm = operator_inf_norm(s_star)
    k_norm = operator_inf_norm(np.linalg.inv(om_ee))
    upper = (1 - epsilon) * alpha * (1 - alpha) / (
        D * s_norm * k_norm * ((1 - epsilon) * alpha + s_norm**2 * k_norm)
    )
    return GammaBound(
        upper=float(upper),
        epsilon=float(epsilon),
        D=D,
        alpha=float(alpha),
        sigma_star_norm=s_norm,
        omega_ee_inv_norm=k_norm,
    )


def kron_apply(sigma_star, delta):
    """``Sigma* Delta Sigma*``, the action of ``Sigma* (x) Sigma*`` on ``vec(Delta)``."""
    return sigma_star @ delta @ sigma_star
