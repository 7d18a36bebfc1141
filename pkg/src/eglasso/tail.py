"""Empirical tail covariance from raw multivariate samples.

The pipeline is: per-margin rank transform to approximately standard Pareto
scale, selection of the rows whose largest coordinate exceeds ``n / k_n``,
per-node covariances of log-ratios, and their aggregation into a single
centred covariance ``S`` with ``1^T S 1 = 0``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

DEFAULT_K_FRACTION = 0.05


@dataclass(frozen=True)
class ExceedanceSet:
    """Rows of the rank-transformed sample that exceed the tail threshold.

    ``y_values`` holds ``(k_n / n) * X_hat`` for the selected rows ``index``.
    ``per_margin[k]`` lists positions into ``y_values`` of the rows whose
    margin-``k`` rank is among the top ``k_n``; each has exactly ``k_n``
    entries.
    """

    y_values: np.ndarray
    index: np.ndarray
    per_margin: tuple
    k_n: int
    n: int

    @property
    def d(self):
        return self.y_values.shape[1]

    @property
    def m(self):
        return self.y_values.shape[0]


@dataclass(frozen=True)
class TailCovariance:
    S: np.ndarray
    M: float
    k_n: int
    n: int
    S_star: np.ndarray = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "S_star", self.S + self.M)

    @property
    def d(self):
        return self.S.shape[0]

    def to_json(self):
        from .io import matrix_to_json

        return {
            "S": matrix_to_json(self.S),
            "S_star": matrix_to_json(self.S_star),
            "n": self.n,
            "k_n": self.k_n,
            "M": self.M,
        }


def default_k(n, k_fraction=DEFAULT_K_FRACTION):
    return int(math.floor(k_fraction * n))


def _stable_ranks(x):
    # rank r in 1..n, ties broken by original row order
    n, d = x.shape
    order = np.argsort(x, axis=0, kind="stable")
    ranks = np.empty((n, d), dtype=np.int64)
    cols = np.arange(d)
    ranks[order, cols[None, :]] = np.arange(1, n + 1)[:, None]
    return ranks


def rank_transform(x):
    """Map each margin to ``1 / (1 - F_hat)`` with ``F_hat = rank / (n + 1)``.

    Outputs lie in ``(1, n + 1]``; ties are ranked in row order.
    """
    x = np.asarray(x, dtype=float)
    if x.ndim != 2:
        raise ValueError("sample must be a 2-d array")
    n = x.shape[0]
    if n < 2:
        raise ValueError("need at least two observations")
    ranks = _stable_ranks(x)
    return (n + 1.0) / (n + 1.0 - ranks)


def select_exceedances(x_hat, k_n):
    """Keep rows with ``max_k X_hat_k > n / k_n`` and rescale them by ``k_n / n``."""
    x_hat = np.asarray(x_hat, dtype=float)
    n, d = x_hat.shape
    k_n = int(k_n)
    if not 1 <= k_n < n:
        raise ValueError(f"k_n must satisfy 1 <= k_n < n, got k_n={k_n}, n={n}")
    # recover integer ranks; exact for outputs of rank_transform
    ranks = np.rint((n + 1.0) - (n + 1.0) / x_hat).astype(np.int64)
    top = ranks > n - k_n
    index = np.flatnonzero(top.any(axis=1))
    assert index.size > 0
    y = (k_n / n) * x_hat[index]
    top_sel = top[index]
    per_margin = tuple(np.flatnonzero(top_sel[:, k]) for k in range(d))
    return ExceedanceSet(y_values=y, index=index, per_margin=per_margin, k_n=k_n, n=n)


def sigma_k_hat(exc: ExceedanceSet, k):
    """Covariance (divisor ``k_n``) of ``log Y_{-k} - log Y_k`` over rows with ``Y_k`` in its top ``k_n``."""
    d = exc.d
    if not 0 <= k < d:
        raise IndexError(f"node index {k} out of range for d={d}")
    rows = exc.per_margin[k]
    if rows.size < 2:
        raise ValueError(f"margin {k} has {rows.size} exceedances; k_n too small")
    logy = np.log(exc.y_values[rows])
    w = np.delete(logy, k, axis=1) - logy[:, [k]]
    w = w - w.mean(axis=0)
    cov = w.T @ w / rows.size
    return (cov + cov.T) / 2.0


def combine_sigma_k(sigma_ks):
    """Average per-node ``(d-1) x (d-1)`` covariances embedded with a zero row/column
    at their own node, minus the constant ``(1/d^3) sum_k 1^T Sigma_k 1``."""
    d = len(sigma_ks)
    total = np.zeros((d, d))
    grand = 0.0
    for k, sk in enumerate(sigma_ks):
        keep = np.delete(np.arange(d), k)
        total[np.ix_(keep, keep)] += sk
        grand += float(np.sum(sk))
    S = total / d - grand / d**3
    return (S + S.T) / 2.0


def aggregate_S(exc: ExceedanceSet, M=1.0):
    """Tail covariance ``S`` from all per-node estimates; raises if ``S + M 11^T`` is not PD."""
    if M <= 0:
        raise ValueError("M must be positive")
    S = combine_sigma_k([sigma_k_hat(exc, k) for k in range(exc.d)])
    out = TailCovariance(S=S, M=float(M), k_n=exc.k_n, n=exc.n)
    eig_min = float(np.linalg.eigvalsh(out.S_star)[0])
    if eig_min <= 0:
        raise np.linalg.LinAlgError(
            f"S + M 11^T is not positive definite (smallest eigenvalue {eig_min:.3g})"
        )
    return out


def tail_covariance(x, k_n=None, M=1.0, k_fraction=DEFAULT_K_FRACTION):
    """Raw sample to :class:`TailCovariance` in one call."""
    x = np.asarray(x, dtype=float)
    if k_n is None:
        k_n = default_k(x.shape[0], k_fraction)
    return aggregate_S(select_exceedances(rank_transform(x), k_n), M)
