"""Preconditioned GMRES and MINRES with true-residual stopping.

Both solvers build their Krylov space with the preconditioned operator P^{-1} J but only
report convergence once the unpreconditioned residual ||b - J x|| <= tol ||b|| has been
checked explicitly.

A tolerance below what rounding lets the true residual reach ends the solve early with
``breakdown == ATTAINABLE_ACCURACY``: either the preconditioned residual has dropped to
machine precision, or STALL_CHECKS consecutive true-residual checks failed to improve.
"""
import logging
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.linalg

from .exceptions import NotPositiveDefinite

logger = logging.getLogger(__name__)

Apply = Callable[[np.ndarray], np.ndarray]

DEFAULT_MAX_ITER = 500
# Preconditioned residual reduction treated as machine precision.
ATTAINABLE_REDUCTION = 1e3 * np.finfo(np.float64).eps
# A true-residual check that does not beat STALL_FACTOR * best counts as a stall.
STALL_FACTOR = 0.9
STALL_CHECKS = 3

ATTAINABLE_ACCURACY = "attainable accuracy"


@dataclass
class KrylovStats:
    iterations: int = 0
    final_relative_residual: float = np.inf
    converged: bool = False
    breakdown: str | None = None
    residual_history: list[float] = field(default_factory=list)

    def as_dict(self) -> dict:
        return {
            "iterations": self.iterations,
            "final_relative_residual": self.final_relative_residual,
            "converged": self.converged,
            "breakdown": self.breakdown,
        }


def _identity(v):
    return v


def _true_residual(apply_J, b, x, bnorm) -> float:
    return float(np.linalg.norm(b - apply_J(x))) / bnorm


class _ResidualMonitor:
    """Keeps the iterate with the smallest checked true residual and counts stalled checks."""

    def __init__(self, apply_J, b, bnorm, x0):
        self.apply_J, self.b, self.bnorm = apply_J, b, bnorm
        self.best_x = x0.copy()
        self.best_res = _true_residual(apply_J, b, x0, bnorm)
        self.stalls = 0

    def check(self, x) -> float:
        res = _true_residual(self.apply_J, self.b, x, self.bnorm)
        if res < STALL_FACTOR * self.best_res:
            self.stalls = 0
        else:
            self.stalls += 1
        if res < self.best_res:
            self.best_x, self.best_res = x.copy(), res
        return res

    @property
    def stalled(self) -> bool:
        return self.stalls >= STALL_CHECKS


def gmres(
    apply_J: Apply,
    apply_P_inverse: Apply | None,
    b,
    tol: float,
    max_iter: int = DEFAULT_MAX_ITER,
    x0=None,
):
    """Full (unrestarted) left-preconditioned GMRES with Givens rotations.

    Returns the iterate with the smallest checked true residual.
    """
    apply_P_inverse = apply_P_inverse or _identity
    b = np.asarray(b, dtype=np.float64)
    n = b.shape[0]
    stats = KrylovStats()
    bnorm = float(np.linalg.norm(b))
    x0 = np.zeros(n) if x0 is None else np.asarray(x0, dtype=np.float64).copy()
    if bnorm == 0.0:
        stats.final_relative_residual = 0.0
        stats.converged = True
        return np.zeros(n), stats

    monitor = _ResidualMonitor(apply_J, b, bnorm, x0)
    if monitor.best_res <= tol:
        stats.final_relative_residual = monitor.best_res
        stats.converged = True
        return monitor.best_x, stats

    z = apply_P_inverse(b - apply_J(x0))
    beta = float(np.linalg.norm(z))
    # Preconditioned-norm target; true residual is certified separately.
    target = tol * float(np.linalg.norm(apply_P_inverse(b)))

    max_iter = min(max_iter, n)
    V = np.zeros((max_iter + 1, n))
    H = np.zeros((max_iter + 1, max_iter))
    cs = np.zeros(max_iter)
    sn = np.zeros(max_iter)
    g = np.zeros(max_iter + 1)
    g[0] = beta
    V[0] = z / beta

    def iterate(k):
        y = scipy.linalg.solve_triangular(H[:k, :k], g[:k])
        return x0 + V[:k].T @ y

    k = 0
    for k in range(1, max_iter + 1):
        j = k - 1
        w = apply_P_inverse(apply_J(V[j]))
        # modified Gram-Schmidt
        for i in range(k):
            H[i, j] = V[i] @ w
            w = w - H[i, j] * V[i]
        H[k, j] = float(np.linalg.norm(w))
        happy = H[k, j] <= 1e-14 * beta
        if not happy:
            V[k] = w / H[k, j]
        for i in range(j):
            temp = cs[i] * H[i, j] + sn[i] * H[i + 1, j]
            H[i + 1, j] = -sn[i] * H[i, j] + cs[i] * H[i + 1, j]
            H[i, j] = temp
        denom = np.hypot(H[j, j], H[k, j])
        cs[j], sn[j] = H[j, j] / denom, H[k, j] / denom
        H[j, j] = denom
        H[k, j] = 0.0
        g[k] = -sn[j] * g[j]
        g[j] = cs[j] * g[j]
        estimate = abs(g[k])
        stats.residual_history.append(estimate / beta)
        logger.debug("gmres it=%d preconditioned residual=%.3e", k, estimate / beta)

        floor = estimate <= ATTAINABLE_REDUCTION * beta
        if estimate <= target or happy or floor:
            if monitor.check(iterate(k)) <= tol:
                stats.converged = True
                break
            if happy:
                stats.breakdown = "invariant subspace reached before the true residual met tol"
                break
            if floor or monitor.stalled:
                stats.breakdown = ATTAINABLE_ACCURACY
                break
    else:
        monitor.check(iterate(k))

    stats.iterations = k
    stats.final_relative_residual = monitor.best_res
    if not stats.converged:
        logger.warning(
            "gmres stopped after %d iterations, relative residual %.3e (%s)",
            k,
            monitor.best_res,
            stats.breakdown or "iteration limit",
        )
    return monitor.best_x, stats


def minres(
    apply_J: Apply,
    apply_P_inverse_spd: Apply | None,
    b,
    tol: float,
    max_iter: int = DEFAULT_MAX_ITER,
    x0=None,
):
    """Preconditioned MINRES (Paige-Saunders recurrence) for symmetric J and SPD P."""
    apply_P_inverse_spd = apply_P_inverse_spd or _identity
    b = np.asarray(b, dtype=np.float64)
    n = b.shape[0]
    stats = KrylovStats()
    bnorm = float(np.linalg.norm(b))
    x = np.zeros(n) if x0 is None else np.asarray(x0, dtype=np.float64).copy()
    if bnorm == 0.0:
        stats.final_relative_residual = 0.0
        stats.converged = True
        return np.zeros(n), stats

    monitor = _ResidualMonitor(apply_J, b, bnorm, x)
    if monitor.best_res <= tol:
        stats.final_relative_residual = monitor.best_res
        stats.converged = True
        return monitor.best_x, stats

    r1 = b - apply_J(x)
    y = apply_P_inverse_spd(r1)
    beta1 = float(r1 @ y)
    if beta1 <= 0.0:
        raise NotPositiveDefinite("preconditioner is not positive definite")
    beta1 = np.sqrt(beta1)

    oldb, beta, dbar, epsln = 0.0, beta1, 0.0, 0.0
    phibar = beta1
    cs, sn = -1.0, 0.0
    w = np.zeros(n)
    w2 = np.zeros(n)
    r2 = r1
    eps = np.finfo(np.float64).eps

    k = 0
    for k in range(1, max_iter + 1):
        v = y / beta
        y = apply_J(v)
        if k >= 2:
            y = y - (beta / oldb) * r1
        alfa = float(v @ y)
        y = y - (alfa / beta) * r2
        r1, r2 = r2, y
        y = apply_P_inverse_spd(r2)
        oldb = beta
        beta_sq = float(r2 @ y)
        if beta_sq < 0.0:
            raise NotPositiveDefinite("preconditioner is not positive definite")
        beta = np.sqrt(beta_sq)

        oldeps = epsln
        delta = cs * dbar + sn * alfa
        gbar = sn * dbar - cs * alfa
        epsln = sn * beta
        dbar = -cs * beta
        gamma = max(np.hypot(gbar, beta), eps)
        cs, sn = gbar / gamma, beta / gamma
        phi = cs * phibar
        phibar = sn * phibar

        w1, w2 = w2, w
        w = (v - oldeps * w1 - delta * w2) / gamma
        x = x + phi * w
        stats.residual_history.append(phibar / beta1)
        logger.debug("minres it=%d preconditioned residual=%.3e", k, phibar / beta1)

        invariant = beta <= 1e-14 * beta1
        floor = phibar <= ATTAINABLE_REDUCTION * beta1
        if phibar <= tol * beta1 or invariant or floor:
            if monitor.check(x) <= tol:
                stats.converged = True
                break
            if invariant:
                stats.breakdown = "Lanczos breakdown before the true residual met tol"
                break
            if floor or monitor.stalled:
                stats.breakdown = ATTAINABLE_ACCURACY
                break
    else:
        monitor.check(x)

    stats.iterations = k
    stats.final_relative_residual = monitor.best_res
    if not stats.converged:
        logger.warning(
            "minres stopped after %d iterations, relative residual %.3e (%s)",
            k,
            monitor.best_res,
            stats.breakdown or "iteration limit",
        )
    return monitor.best_x, stats
