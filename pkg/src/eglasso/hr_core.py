"""Husler-Reiss model algebra.

Conversions between the variogram ``Gamma``, the centred covariance ``Sigma``
(with ``Sigma @ 1 = 0``), the per-node covariances ``Sigma^(k)``, and the
rank-deficient precision ``Theta`` together with its shifted, full-rank
counterparts ``Theta* = Theta + c 11^T`` and ``Sigma* = Sigma + M 11^T``
where ``c = 1 / (d^2 M)``.

Node indices are 0-based throughout the library. The CLI and the edge-set
JSON format are 1-based; conversion happens only in :mod:`eglasso.io`.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Iterable

import numpy as np
from scipy.sparse.csgraph import connected_components

ASYM_WARN_TOL = 1e-10
ASYM_ERROR_TOL = 1e-6
DEFAULT_EDGE_THRESHOLD = 0.01


def symmetrize(a, name="matrix"):
    """Return ``(a + a.T) / 2`` after checking that ``a`` is nearly symmetric.

    Asymmetry is measured relative to ``max(1, max|a|)``. Above
    ``ASYM_WARN_TOL`` a warning is emitted, above ``ASYM_ERROR_TOL`` a
    ``ValueError`` is raised.
    """
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"{name} must be a square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} contains non-finite entries")
    scale = max(1.0, float(np.max(np.abs(a)))) if a.size else 1.0
    asym = float(np.max(np.abs(a - a.T))) / scale if a.size else 0.0
    if asym > ASYM_ERROR_TOL:
        raise ValueError(f"{name} is not symmetric (relative asymmetry {asym:.3g})")
    if asym > ASYM_WARN_TOL:
        warnings.warn(f"{name} symmetrized (relative asymmetry {asym:.3g})", stacklevel=3)
    return (a + a.T) / 2.0


def _check_index(k, d):
    k = int(k)
    if not 0 <= k < d:
        raise IndexError(f"node index {k} out of range for d={d}")
    return k


def shift_c(d, M):
    """Penalty centre ``1 / (d^2 M)``."""
    if M <= 0:
        raise ValueError("M must be positive")
    return 1.0 / (d * d * M)


# -- variogram / covariance -------------------------------------------------


def sigma_from_variogram(gamma):
    """Centred covariance ``-1/2 P Gamma P`` with ``P = I - 11^T/d``."""
    gamma = symmetrize(gamma, "variogram")
    d = gamma.shape[0]
    if d < 2:
        raise ValueError("dimension must be at least 2")
    if np.max(np.abs(np.diag(gamma))) > ASYM_ERROR_TOL * max(1.0, np.max(np.abs(gamma))):
        raise ValueError("variogram must have a zero diagonal")
    P = np.eye(d) - np.full((d, d), 1.0 / d)
    sigma = -0.5 * P @ gamma @ P
    return (sigma + sigma.T) / 2.0


def variogram_from_sigma(sigma):
    """``Gamma_ij = Sigma_ii + Sigma_jj - 2 Sigma_ij``."""
    sigma = symmetrize(sigma, "sigma")
    diag = np.diag(sigma)
    gamma = diag[:, None] + diag[None, :] - 2.0 * sigma
    np.fill_diagonal(gamma, 0.0)
    return gamma


def sigma_k_from_variogram(gamma, k):
    """The d x d matrix ``1/2 (Gamma_ik + Gamma_jk - Gamma_ij)``; row and column k vanish."""
    gamma = symmetrize(gamma, "variogram")
    k = _check_index(k, gamma.shape[0])
    g = gamma[:, k]
    out = 0.5 * (g[:, None] + g[None, :] - gamma)
    out[k, :] = 0.0
    out[:, k] = 0.0
    return out


def sigma_from_theta(theta):
    """Centred covariance from a valid precision, i.e. the Moore-Penrose inverse.

    Computed through the shifted inverse at ``M = 1`` which is exact for any
    positive shift.
    """
    theta = symmetrize(theta, "theta")
    d = theta.shape[0]
    J = np.ones((d, d))
    sigma = np.linalg.inv(theta + J / d**2) - J
    return (sigma + sigma.T) / 2.0


def sigma_star(sigma, M):
    sigma = symmetrize(sigma, "sigma")
    if M <= 0:
        raise ValueError("M must be positive")
    return sigma + M


def theta_star_from_sigma(sigma, M):
    """``Theta* = (Sigma + M 11^T)^{-1}``.

    Subtracting ``shift_c(d, M)`` from every entry recovers ``Theta``.
    """
    s_star = sigma_star(sigma, M)
    try:
        chol = np.linalg.cholesky(s_star)
    except np.linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError(
            "Sigma + M 11^T is not positive definite; Sigma is not a valid centred covariance"
        ) from exc
    inv_chol = np.linalg.inv(chol)
    out = inv_chol.T @ inv_chol
    return (out + out.T) / 2.0


def theta_from_sigma(sigma, M=1.0):
    t_star = theta_star_from_sigma(sigma, M)
    return t_star - shift_c(t_star.shape[0], M)


def theta_from_theta_k(theta_k, k):
    """Rebuild the full ``Theta`` from ``Theta^(k)`` using ``Theta 1 = 0``."""
    theta_k = symmetrize(np.atleast_2d(theta_k), "theta_k")
    d = theta_k.shape[0] + 1
    k = _check_index(k, d)
    keep = np.delete(np.arange(d), k)
    theta = np.zeros((d, d))
    theta[np.ix_(keep, keep)] = theta_k
    col = -theta_k.sum(axis=1)
    theta[keep, k] = col
    theta[k, keep] = col
    theta[k, k] = theta_k.sum()
    return theta


def submatrix_drop(theta, k):
    """``Theta^(k)``: drop row and column ``k``."""
    theta = np.asarray(theta, dtype=float)
    k = _check_index(k, theta.shape[0])
    keep = np.delete(np.arange(theta.shape[0]), k)
    return theta[np.ix_(keep, keep)]


def matrix_norms(a):
    """Return ``(max |a_ij|, max_i sum_j |a_ij|)``."""
    a = np.atleast_2d(np.asarray(a, dtype=float))
    if a.size == 0:
        return 0.0, 0.0
    absa = np.abs(a)
    return float(absa.max()), float(absa.sum(axis=1).max())


def elementwise_max_norm(a):
    return matrix_norms(a)[0]


def operator_inf_norm(a):
    return matrix_norms(a)[1]


# -- graphs -----------------------------------------------------------------


@dataclass(frozen=True)
class EdgeSet:
    """Undirected simple graph on nodes ``0..d-1``; pairs stored as ``(i, j)`` with ``i < j``."""

    d: int
    edges: frozenset

    def __init__(self, d: int, edges: Iterable = ()):
        canon = set()
        for i, j in edges:
            i, j = int(i), int(j)
            if i == j:
                raise ValueError(f"self-loop at node {i}")
            if not (0 <= i < d and 0 <= j < d):
                raise ValueError(f"edge ({i}, {j}) out of range for d={d}")
            canon.add((min(i, j), max(i, j)))
        object.__setattr__(self, "d", int(d))
        object.__setattr__(self, "edges", frozenset(canon))

    def __len__(self):
        return len(self.edges)

    def __iter__(self):
        return iter(self.sorted())

    def __contains__(self, pair):
        i, j = pair
        return (min(i, j), max(i, j)) in self.edges

    def sorted(self):
        return sorted(self.edges)

    def degrees(self):
        deg = np.zeros(self.d, dtype=int)
        for i, j in self.edges:
            deg[i] += 1
            deg[j] += 1
        return deg

    def max_degree(self):
        return int(self.degrees().max()) if self.d else 0

    def adjacency(self):
        a = np.zeros((self.d, self.d), dtype=bool)
        for i, j in self.edges:
            a[i, j] = a[j, i] = True
        return a

    def is_connected(self):
        if self.d <= 1:
            return True
        n_comp, _ = connected_components(self.adjacency(), directed=False)
        return n_comp == 1


def graph_from_theta(theta, threshold=DEFAULT_EDGE_THRESHOLD):
    """Edges ``(i, j)`` with ``|Theta_ij| > threshold``."""
    if threshold < 0:
        raise ValueError("threshold must be non-negative")
    theta = np.asarray(theta, dtype=float)
    d = theta.shape[0]
    iu, ju = np.triu_indices(d, k=1)
    mask = np.abs(theta[iu, ju]) > threshold
    return EdgeSet(d, zip(iu[mask].tolist(), ju[mask].tolist()))


# -- reference fixtures -----------------------------------------------------

STAR_THETA = np.array(
    [
        [3.0, -1.0, -1.0, -1.0],
        [-1.0, 1.0, 0.0, 0.0],
        [-1.0, 0.0, 1.0, 0.0],
        [-1.0, 0.0, 0.0, 1.0],
    ]
)

DIAMOND_THETA = np.array(
    [
        [2.0, -1.0, -1.0, 0.0],
        [-1.0, 3.0, -1.0, -1.0],
        [-1.0, -1.0, 3.0, -1.0],
        [0.0, -1.0, -1.0, 2.0],
    ]
)


def star_graph(d=4):
    """Node 0 joined to every other node."""
    return EdgeSet(d, [(0, j) for j in range(1, d)])


def diamond_graph():
    """Zero pattern of ``DIAMOND_THETA``: a 4-cycle 0-1-3-2 plus the chord 1-2."""
    return EdgeSet(4, [(0, 1), (0, 2), (1, 2), (1, 3), (2, 3)])
