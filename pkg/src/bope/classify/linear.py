"""Logistic regression (Newton with gradient-descent fallback) and ridge regression."""
from __future__ import annotations

import numpy as np
from scipy.special import expit

from ..errors import NonConvergence
from .config import LinearConfig


def _design(x):
    return np.hstack([np.ones((x.shape[0], 1)), x])


def logistic_objective(beta, x, y, l2):
    """Mean log-loss plus ``0.5 * l2 * |w|^2`` and its gradient.

    ``beta[0]`` is the intercept (unpenalized), ``beta[1:]`` the slopes.
    """
    z = _design(x) @ beta
    loss = np.mean(np.logaddexp(0.0, z) - y * z) + 0.5 * l2 * float(beta[1:] @ beta[1:])
    grad = _design(x).T @ (expit(z) - y) / x.shape[0]
    grad[1:] += l2 * beta[1:]
    return float(loss), grad


def fit_logistic(x, y, config: LinearConfig):
    """Return ``(beta, grad_inf_norm)``; raises :class:`NonConvergence`."""
    d = _design(x)
    n, m = d.shape
    beta = np.zeros(m)
    ridge = np.full(m, config.l2)
    ridge[0] = 0.0
    loss, grad = logistic_objective(beta, x, y, config.l2)
    for _ in range(config.max_iters):
        gnorm = float(np.max(np.abs(grad)))
        if gnorm <= config.tol:
            return beta, gnorm
        prob = expit(d @ beta)
        w = prob * (1.0 - prob)
        hess = (d.T * w) @ d / n + np.diag(ridge)
        try:
            chol = np.linalg.cholesky(hess)
            direction = -np.linalg.solve(chol.T, np.linalg.solve(chol, grad))
        except np.linalg.LinAlgError:
            direction = -grad
        # Armijo backtracking keeps both Newton and fallback steps monotone
        t = 1.0
        slope = float(grad @ direction)
        while t > 1e-12:
            cand = beta + t * direction
            cand_loss, cand_grad = logistic_objective(cand, x, y, config.l2)
            if cand_loss <= loss + 1e-4 * t * slope:
                break
            t *= 0.5
        else:
            break
        beta, loss, grad = cand, cand_loss, cand_grad
    gnorm = float(np.max(np.abs(grad)))
    if gnorm <= config.tol:
        return beta, gnorm
    raise NonConvergence(
        f"logistic regression did not reach tol={config.tol:g} in {config.max_iters} iterations "
        f"(final gradient inf-norm {gnorm:.3g})",
        gnorm,
    )


def fit_ridge(x, y, l2):
    d = _design(x)
    if l2 == 0:
        beta, *_ = np.linalg.lstsq(d, y, rcond=None)
        return beta
    ridge = np.full(d.shape[1], l2 * x.shape[0])
    ridge[0] = 0.0
    return np.linalg.solve(d.T @ d + np.diag(ridge), d.T @ y)


def linear_score(beta, x):
    return _design(np.asarray(x, dtype=np.float64)) @ beta
