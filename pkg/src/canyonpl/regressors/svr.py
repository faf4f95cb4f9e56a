"""epsilon-insensitive support vector regression with an RBF kernel, solved by SMO.

The dual is written over 2n variables ``a = [a+, a-]`` with signs
``z = [+1]*n + [-1]*n``::

    min 1/2 a' Q a + p' a   s.t.  z' a = 0,  0 <= a <= C
    Q_ij = z_i z_j K(x_i, x_j),   p = [eps - y, eps + y]

and the regression coefficients are ``beta = a+ - a-``, so that
``f(x) = sum_i beta_i K(x_i, x) + b``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

log = logging.getLogger(__name__)

TAU = 1e-12
DEFAULT_EPSILON = 0.5


def rbf_kernel(A, B, gamma: float) -> np.ndarray:
    A = np.asarray(A, dtype=np.float64)
    B = np.asarray(B, dtype=np.float64)
    sq = (A * A).sum(1)[:, None] + (B * B).sum(1)[None, :] - 2.0 * A @ B.T
    return np.exp(-gamma * np.maximum(sq, 0.0))


@dataclass(frozen=True, eq=False)
class SvrModel:
    support_vectors: np.ndarray
    dual_coef: np.ndarray
    bias: float
    gamma: float
    C: float
    epsilon: float
    n_iter: int = 0
    kkt_violation: float = 0.0
    dual_objective: float = 0.0

    family = "svr"

    @property
    def n_support(self) -> int:
        return len(self.dual_coef)

    def predict(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or (self.n_support and X.shape[1] != self.support_vectors.shape[1]):
            raise ValueError(f"feature-count mismatch: got shape {X.shape}")
        if self.n_support == 0:
            return np.full(len(X), self.bias)
        return rbf_kernel(X, self.support_vectors, self.gamma) @ self.dual_coef + self.bias


def svr_dual_objective(K, y, beta, epsilon) -> float:
    """1/2 beta'K beta - y'beta + eps*||beta||_1 (minimization form)."""
    return float(0.5 * beta @ K @ beta - y @ beta + epsilon * np.abs(beta).sum())


def solve_svr_dual(K, y, C, epsilon, tol=1e-3, max_iter=200_000, check_box=False):
    """SMO with second-order working-set selection.

    Returns ``(beta, bias, n_iter, violation)`` where ``violation`` is the
    maximal KKT violation m(a) - M(a) at exit.
    """
    n = len(y)
    z = np.concatenate([np.ones(n), -np.ones(n)])
    a = np.zeros(2 * n)
    G = np.concatenate([epsilon - y, epsilon + y])
    sample = np.concatenate([np.arange(n), np.arange(n)])
    Kd = np.diag(K)
    QD = Kd[sample]
    pos = z > 0
    it = 0
    violation = np.inf
    while it < max_iter:
        up = np.where(pos, a < C, a > 0)
        low = np.where(pos, a > 0, a < C)
        minus_zG = -z * G
        cand = np.where(up, minus_zG, -np.inf)
        i = int(np.argmax(cand))
        gmax = cand[i]
        zG = np.where(low, z * G, -np.inf)
        gmax2 = zG.max()
        violation = gmax + gmax2
        if not np.isfinite(gmax) or violation < tol:
            break
        Ki = K[sample[i]][sample]
        grad_diff = gmax + zG  # = gmax - (-z_t G_t) on the low set
        quad = np.maximum(QD[i] + QD - 2.0 * Ki, TAU)
        score = np.where(low & (grad_diff > 0), -(grad_diff ** 2) / quad, np.inf)
        j = int(np.argmin(score))
        if not np.isfinite(score[j]):
            break
        it += 1

        Qi = z[i] * z * Ki
        Qj = z[j] * z * K[sample[j]][sample]
        ai_old, aj_old = a[i], a[j]
        if z[i] != z[j]:
            q = max(QD[i] + QD[j] + 2.0 * Qi[j], TAU)
            delta = (-G[i] - G[j]) / q
            diff = a[i] - a[j]
            a[i] += delta
            a[j] += delta
            if diff > 0:
                if a[j] < 0:
                    a[j], a[i] = 0.0, diff
            elif a[i] < 0:
                a[i], a[j] = 0.0, -diff
            if diff > 0:
                if a[i] > C:
                    a[i], a[j] = C, C - diff
            elif a[j] > C:
                a[j], a[i] = C, C + diff
        else:
            q = max(QD[i] + QD[j] - 2.0 * Qi[j], TAU)
            delta = (G[i] - G[j]) / q
            total = a[i] + a[j]
            a[i] -= delta
            a[j] += delta
            if total > C:
                if a[i] > C:
                    a[i], a[j] = C, total - C
            elif a[j] < 0:
                a[j], a[i] = 0.0, total
            if total > C:
                if a[j] > C:
                    a[j], a[i] = C, total - C
            elif a[i] < 0:
                a[i], a[j] = 0.0, total
        G += Qi * (a[i] - ai_old) + Qj * (a[j] - aj_old)
        if check_box:
            beta = a[:n] - a[n:]
            assert np.all(a >= 0) and np.all(a <= C), "SMO left the box"
            assert np.all(np.abs(beta) <= C)
    else:
        log.warning("SMO stopped at max_iter=%d with KKT violation %.3g", max_iter, violation)

    # bias from free variables, midpoint of the feasible interval otherwise
    zG = z * G
    at_upper, at_lower = a >= C, a <= 0
    free = ~(at_upper | at_lower)
    if free.any():
        rho = float(zG[free].mean())
    else:
        ub_set = (at_upper & ~pos) | (at_lower & pos)
        lb_set = (at_upper & pos) | (at_lower & ~pos)
        ub = zG[ub_set].min() if ub_set.any() else np.inf
        lb = zG[lb_set].max() if lb_set.any() else -np.inf
        rho = float((ub + lb) / 2.0)
    beta = a[:n] - a[n:]
    return beta, -rho, it, float(max(violation, 0.0)) if np.isfinite(violation) else 0.0


def fit_svr(X, y, C: float, gamma: float, epsilon: float = DEFAULT_EPSILON, tol: float = 1e-3,
            max_iter: int = 200_000, check_box: bool = False) -> SvrModel:
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    if not C > 0:
        raise ValueError("C must be > 0")
    if not gamma > 0:
        raise ValueError("gamma must be > 0")
    if epsilon < 0:
        raise ValueError("epsilon must be >= 0")
    if len(X) != len(y) or len(y) < 1:
        raise ValueError("X and y lengths differ")
    K = rbf_kernel(X, X, gamma)
    beta, bias, it, viol = solve_svr_dual(K, y, C, epsilon, tol, max_iter, check_box)
    obj = svr_dual_objective(K, y, beta, epsilon)
    sv = beta != 0
    return SvrModel(X[sv].copy(), beta[sv].copy(), bias, float(gamma), float(C), float(epsilon),
                    it, viol, obj)
