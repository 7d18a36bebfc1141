"""Independent reference computations used by the tests.

Nothing here imports the solver; the objective is re-implemented from
scratch so the oracle cannot inherit a bug from the code it checks.
"""
import itertools

import numpy as np


def penalized_objective(theta, S, gamma, c):
    sign, logdet = np.linalg.slogdet(theta)
    if sign <= 0:
        return np.inf
    d = theta.shape[0]
    pen = sum(abs(theta[i, j] - c) for i in range(d) for j in range(d) if i != j)
    return -logdet + np.trace(S @ theta) + gamma * pen


def prox_gradient_oracle(S, gamma, c, max_iter=100_000, tol=1e-14):
    """Proximal gradient with backtracking on the full symmetric matrix.

    The smooth part is ``-log det T + tr(S T)``; the prox of the off-diagonal
    penalty is soft-thresholding of ``T_ij - c``.
    """
    d = S.shape[0]
    off = ~np.eye(d, dtype=bool)
    T = np.diag(1.0 / np.diag(S))
    t = 1.0

    def smooth(A):
        try:
            L = np.linalg.cholesky(A)
        except np.linalg.LinAlgError:
            return np.inf
        return -2.0 * np.sum(np.log(np.diag(L))) + np.sum(S * A)

    def prox(A, step):
        out = A.copy()
        dev = A[off] - c
        out[off] = c + np.sign(dev) * np.maximum(np.abs(dev) - step * gamma, 0.0)
        return out

    f_T = smooth(T)
    for _ in range(max_iter):
        grad = S - np.linalg.inv(T)
        t = min(t * 2.0, 10.0)
        while True:
            new = prox(T - t * grad, t)
            new = (new + new.T) / 2.0
            diff = new - T
            f_new = smooth(new)
            if np.isfinite(f_new) and f_new <= f_T + np.sum(grad * diff) + np.sum(diff**2) / (2 * t):
                break
            t /= 2.0
        step = np.max(np.abs(diff))
        T, f_T = new, f_new
        if step < tol:
            break
    return T


def lasso_by_enumeration(Q, lin, gamma):
    """Exact minimiser of ``1/2 b'Qb + b'lin + gamma |b|_1`` by trying every sign pattern."""
    p = len(lin)
    best, best_val = None, np.inf
    for signs in itertools.product((-1, 0, 1), repeat=p):
        s = np.array(signs, dtype=float)
        act = s != 0
        b = np.zeros(p)
        if act.any():
            b[act] = np.linalg.solve(Q[np.ix_(act, act)], -(lin[act] + gamma * s[act]))
            if np.any(np.sign(b[act]) != s[act]):
                continue
        val = 0.5 * b @ Q @ b + b @ lin + gamma * np.abs(b).sum()
        if val < best_val - 1e-15:
            best, best_val = b, val
    return best


def ecdf_rank_transform_loops(x):
    """``1 / (1 - F_hat)`` with ``F_hat(x) = #{X <= x} / (n + 1)``, counted by brute force."""
    n, d = x.shape
    out = np.empty((n, d))
    for k in range(d):
        for i in range(n):
            count = sum(1 for j in range(n) if x[j, k] <= x[i, k])
            out[i, k] = 1.0 / (1.0 - count / (n + 1.0))
    return out


def random_laplacian(d, rng, density=0.5):
    """Weighted Laplacian of a random connected graph (spanning tree plus extra edges)."""
    W = np.zeros((d, d))
    perm = rng.permutation(d)
    for a in range(1, d):
        i, j = perm[a], perm[rng.integers(a)]
        W[i, j] = W[j, i] = rng.uniform(0.5, 2.0)
    for i in range(d):
        for j in range(i + 1, d):
            if W[i, j] == 0 and rng.random() < density / 2:
                W[i, j] = W[j, i] = rng.uniform(0.5, 2.0)
    return np.diag(W.sum(axis=1)) - W


def random_spd(d, rng, df_extra=3):
    A = rng.standard_normal((d, d + df_extra))
    return A @ A.T / (d + df_extra) + 0.1 * np.eye(d)
