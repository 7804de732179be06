"""Newton systems: full 4n form, symmetric augmented form and reduced 2n form.

All operators are matrix-free ``LinearOperator`` objects. Unknowns are ordered
(dy, du, dp, dmu) in the full form, (dy, du, dp, dmu_A) in the augmented form and
(dy, dp) in the reduced form.
"""
import logging
from dataclasses import dataclass
from typing import Literal

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import LinearOperator

from .exceptions import DimensionMismatch
from .optimality import ActiveSetPartition, IterateState, residual_Theta
from .problems import ProblemInstance
from .sparse import write_mtx

logger = logging.getLogger(__name__)

Formulation = Literal["full", "augmented", "reduced"]

# Dense dumps are only produced for small systems.
DUMP_MAX_N = 100


@dataclass(frozen=True)
class StepVector:
    dy: np.ndarray
    du: np.ndarray
    dp: np.ndarray
    dmu: np.ndarray

    def stacked(self) -> np.ndarray:
        return np.concatenate([self.dy, self.du, self.dp, self.dmu])


@dataclass(frozen=True, eq=False)
class RecoveryData:
    """Quantities captured at assembly time that lifting a solution needs."""

    g_u: np.ndarray  # Theta^u + Gamma^u
    theta_mu: np.ndarray
    dmu_inactive: np.ndarray  # mu_{k+1} - mu_k on I, zero on A


@dataclass(frozen=True, eq=False)
class SaddleSystem:
    formulation: Formulation
    operator: LinearOperator
    rhs: np.ndarray
    partition: ActiveSetPartition
    recovery: RecoveryData
    prob: ProblemInstance

    @property
    def size(self) -> int:
        return self.operator.shape[0]

    def apply(self, v) -> np.ndarray:
        return self.operator.matvec(v)

    def residual(self, z) -> np.ndarray:
        """J z - b."""
        return self.operator.matvec(z) - self.rhs

    def to_sparse(self) -> sp.csr_matrix:
        """Explicit sparse assembly of the operator."""
        return _explicit_blocks(self)

    def to_dense(self) -> np.ndarray:
        return self.to_sparse().toarray()

    def dump_dense_mtx(self, path) -> None:
        if self.prob.n > DUMP_MAX_N:
            raise ValueError(f"dense dumps are limited to n <= {DUMP_MAX_N}")
        write_mtx(path, self.to_sparse())


def _inactive_target(
    x: IterateState, part: ActiveSetPartition, prob: ProblemInstance
) -> np.ndarray:
    """mu_{k+1} - mu_k on I with mu_{k+1} = +beta on I_+ and -beta on I_-."""
    target = np.zeros(prob.n)
    target[part.Iplus] = prob.beta - x.mu[part.Iplus]
    target[part.Iminus] = -prob.beta - x.mu[part.Iminus]
    return target


def _blocks(x: IterateState, prob: ProblemInstance):
    res = x.residual if x.residual is not None else residual_Theta(x, prob)
    return res


def _check_partition(part: ActiveSetPartition, prob: ProblemInstance) -> None:
    if part.n != prob.n:
        raise DimensionMismatch(f"partition has n={part.n}, problem has n={prob.n}")


def assemble_full(x: IterateState, part: ActiveSetPartition, prob: ProblemInstance) -> SaddleSystem:
    """Nonsymmetric generalized Jacobian Theta'(x) with rhs -Theta(x)."""
    _check_partition(part, prob)
    n, m, alpha, c = prob.n, prob.m_diag, prob.alpha, prob.c
    L, Mbar = prob.L, prob.Mbar
    act = part.active_mask.astype(np.float64)
    inact = part.inactive_mask.astype(np.float64)
    res = _blocks(x, prob)

    def matvec(v):
        v = np.ravel(v)
        dy, du, dp, dmu = np.split(v, 4)
        return np.concatenate(
            [
                m * dy + L.T @ dp,
                alpha * m * du - Mbar.T @ dp + m * dmu,
                L @ dy - Mbar @ du,
                act * (m * du) - c * inact * (m * dmu),
            ]
        )

    op = LinearOperator((4 * n, 4 * n), matvec=matvec, dtype=np.float64)
    recovery = RecoveryData(
        g_u=res.theta_u, theta_mu=res.theta_mu, dmu_inactive=_inactive_target(x, part, prob)
    )
    return SaddleSystem("full", op, -res.stacked(), part, recovery, prob)


def _recovery(x, part, prob, res) -> RecoveryData:
    dmu_inactive = _inactive_target(x, part, prob)
    gamma_u = prob.m_diag * dmu_inactive
    return RecoveryData(g_u=res.theta_u + gamma_u, theta_mu=res.theta_mu, dmu_inactive=dmu_inactive)


def assemble_augmented(
    x: IterateState, part: ActiveSetPartition, prob: ProblemInstance
) -> SaddleSystem:
    """Symmetric (3n + |A|) system after fixing mu on I to +-beta."""
    _check_partition(part, prob)
    n, m, alpha = prob.n, prob.m_diag, prob.alpha
    L, Mbar = prob.L, prob.Mbar
    A = part.A
    nA = A.size
    res = _blocks(x, prob)
    rec = _recovery(x, part, prob, res)

    def matvec(v):
        v = np.ravel(v)
        dy, du, dp, dmu_a = v[:n], v[n : 2 * n], v[2 * n : 3 * n], v[3 * n :]
        scattered = np.zeros(n)
        scattered[A] = dmu_a
        return np.concatenate(
            [
                m * dy + L.T @ dp,
                alpha * m * du - Mbar.T @ dp + m * scattered,
                L @ dy - Mbar @ du,
                m[A] * du[A],
            ]
        )

    size = 3 * n + nA
    op = LinearOperator((size, size), matvec=matvec, rmatvec=matvec, dtype=np.float64)
    rhs = -np.concatenate([res.theta_y, rec.g_u, res.theta_p, res.theta_mu[A]])
    return SaddleSystem("augmented", op, rhs, part, rec, prob)


def assemble_reduced(
    x: IterateState, part: ActiveSetPartition, prob: ProblemInstance
) -> SaddleSystem:
    """Symmetric 2n system in (dy, dp); the (2,2) block is applied, never formed."""
    _check_partition(part, prob)
    n, m, alpha = prob.n, prob.m_diag, prob.alpha
    L, Mbar = prob.L, prob.Mbar
    act = part.active_mask
    inact = part.inactive_mask.astype(np.float64)
    res = _blocks(x, prob)
    rec = _recovery(x, part, prob, res)

    def matvec(v):
        v = np.ravel(v)
        dy, dp = v[:n], v[n:]
        return np.concatenate(
            [
                m * dy + L.T @ dp,
                L @ dy - (Mbar @ (inact * (Mbar.T @ dp) / m)) / alpha,
            ]
        )

    correction = np.where(act, res.theta_mu, inact * rec.g_u / alpha) / m
    rhs = -np.concatenate([res.theta_y, res.theta_p + Mbar @ correction])
    op = LinearOperator((2 * n, 2 * n), matvec=matvec, rmatvec=matvec, dtype=np.float64)
    return SaddleSystem("reduced", op, rhs, part, rec, prob)


def assemble(
    formulation: Formulation, x: IterateState, part: ActiveSetPartition, prob: ProblemInstance
):
    builders = {"full": assemble_full, "augmented": assemble_augmented, "reduced": assemble_reduced}
    try:
        builder = builders[formulation]
    except KeyError:
        raise ValueError(f"unknown formulation {formulation!r}") from None
    return builder(x, part, prob)


def recover_step(dy, dp, sys: SaddleSystem) -> StepVector:
    """Rebuild du and dmu from a (possibly inexact) reduced solution (dy, dp)."""
    if sys.formulation != "reduced":
        raise ValueError("recover_step needs a reduced system")
    prob, part, rec = sys.prob, sys.partition, sys.recovery
    m, alpha = prob.m_diag, prob.alpha
    A = part.A
    dy = np.asarray(dy, dtype=np.float64)
    dp = np.asarray(dp, dtype=np.float64)

    mbar_t_dp = prob.Mbar.T @ dp
    dmu = rec.dmu_inactive.copy()
    dmu[A] = (mbar_t_dp[A] - rec.g_u[A]) / m[A] + alpha * rec.theta_mu[A] / m[A]
    scattered = np.zeros(prob.n)
    scattered[A] = dmu[A]
    du = (mbar_t_dp / m - scattered - rec.g_u / m) / alpha
    return StepVector(dy=dy, du=du, dp=dp, dmu=dmu)


def lift_solution(sys: SaddleSystem, z) -> StepVector:
    """Full Newton step from a solution vector of any formulation."""
    z = np.asarray(z, dtype=np.float64)
    if z.shape != (sys.size,):
        raise DimensionMismatch(f"solution has shape {z.shape}, system size is {sys.size}")
    n = sys.prob.n
    if sys.formulation == "full":
        return StepVector(*np.split(z, 4))
    if sys.formulation == "augmented":
        dmu = sys.recovery.dmu_inactive.copy()
        dmu[sys.partition.A] = z[3 * n :]
        return StepVector(dy=z[:n], du=z[n : 2 * n], dp=z[2 * n : 3 * n], dmu=dmu)
    return recover_step(z[:n], z[n:], sys)


def residual_equivalence_check(full_sys: SaddleSystem, red_sys: SaddleSystem, approx_solution):
    """Return (||r_red||, ||r_full||) where r_full is the residual of the lifted step."""
    r_red = red_sys.residual(approx_solution)
    step = lift_solution(red_sys, approx_solution)
    r_full = full_sys.residual(step.stacked())
    return float(np.linalg.norm(r_red)), float(np.linalg.norm(r_full))


def _explicit_blocks(sys: SaddleSystem) -> sp.csr_matrix:
    prob, part = sys.prob, sys.partition
    n, alpha, c = prob.n, prob.alpha, prob.c
    M, L, Mbar = prob.M, prob.L, prob.Mbar
    m = prob.m_diag
    if sys.formulation == "full":
        act = sp.diags(part.active_mask.astype(np.float64))
        inact = sp.diags(part.inactive_mask.astype(np.float64))
        blocks = [
            [M, None, L.T, None],
            [None, alpha * M, -Mbar.T, M],
            [L, -Mbar, None, None],
            [None, act @ M, None, -c * (inact @ M)],
        ]
    elif sys.formulation == "augmented" and part.A.size == 0:
        blocks = [
            [M, None, L.T],
            [None, alpha * M, -Mbar.T],
            [L, -Mbar, None],
        ]
    elif sys.formulation == "augmented":
        P_A = sp.identity(n, format="csr")[part.A]
        blocks = [
            [M, None, L.T, None],
            [None, alpha * M, -Mbar.T, M @ P_A.T],
            [L, -Mbar, None, None],
            [None, P_A @ M, None, sp.csr_matrix((part.A.size, part.A.size))],
        ]
    else:
        inact = sp.diags(part.inactive_mask.astype(np.float64) / m)
        blocks = [[M, L.T], [L, -(Mbar @ inact @ Mbar.T) / alpha]]
    return sp.bmat(blocks, format="csr")
