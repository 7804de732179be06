"""Active-set Schur complement approximation and block preconditioners.

The approximation S_hat = K M^{-1} K^T with K = sqrt(alpha) L + Mbar Pi_I replaces the
active-set Schur complement S = alpha L M^{-1} L^T + Mbar Pi_I M^{-1} Mbar^T. Solves with K
go through an ``InnerSolver``; the default is an exact sparse LU.
"""
import logging
from dataclasses import dataclass
from typing import Callable, Literal

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import LinearOperator

from .exceptions import DimensionMismatch
from .optimality import ActiveSetPartition
from .problems import ProblemInstance
from .sparse import InnerSolver, as_csr, factorize

logger = logging.getLogger(__name__)

PreconditionerKind = Literal["bdf", "ipf"]


@dataclass(frozen=True, eq=False)
class SchurApprox:
    factor: InnerSolver
    K: sp.csr_matrix
    m_diag: np.ndarray
    partition: ActiveSetPartition

    def apply(self, v) -> np.ndarray:
        """S_hat v = K M^{-1} K^T v."""
        return self.K @ ((self.K.T @ v) / self.m_diag)

    def solve(self, v) -> np.ndarray:
        """S_hat^{-1} v = K^{-T} M K^{-1} v."""
        return self.factor.solve_transpose(self.m_diag * self.factor.solve(v))


def schur_factor_matrix(
    prob: ProblemInstance, part: ActiveSetPartition, alpha: float
) -> sp.csr_matrix:
    """K = sqrt(alpha) L + Mbar Pi_I."""
    pi_i = sp.diags(part.inactive_mask.astype(np.float64))
    return as_csr(np.sqrt(alpha) * prob.L + prob.Mbar @ pi_i)


def build_schur_approx(
    prob: ProblemInstance,
    part: ActiveSetPartition,
    alpha: float,
    inner: Callable[[sp.csr_matrix], InnerSolver] | None = None,
) -> SchurApprox:
    """Factorize K once per partition; raises SingularMatrix for a degenerate K."""
    K = schur_factor_matrix(prob, part, alpha)
    factor = inner(K) if inner is not None else factorize(K, "lu")
    logger.debug("schur approximation built: n=%d |I|=%d", prob.n, part.n_inactive)
    return SchurApprox(factor=factor, K=K, m_diag=prob.m_diag, partition=part)


class AugmentedSchur:
    """S_hat for the augmented system: (1/alpha) Q blkdiag(S_hat, P_A M P_A^T) Q^T.

    Q = [I, -Mbar Pi_A M^{-1} P_A^T; 0, I]; every block besides S_hat is diagonal.
    """

    def __init__(self, schur: SchurApprox, prob: ProblemInstance, alpha: float):
        self.schur = schur
        self.prob = prob
        self.alpha = alpha
        self.A = schur.partition.A
        self.m_a = prob.m_diag[self.A]

    def _couple(self, v_a):
        """Mbar P_A^T M_A^{-1} v_a."""
        scattered = np.zeros(self.prob.n)
        scattered[self.A] = v_a / self.m_a
        return self.prob.Mbar @ scattered

    def _couple_t(self, v):
        """M_A^{-1} P_A Mbar^T v."""
        return (self.prob.Mbar.T @ v)[self.A] / self.m_a

    def apply(self, v) -> np.ndarray:
        n = self.prob.n
        v1, v2 = v[:n], v[n:]
        # Q^T v, blocks, then Q
        t1 = v1
        t2 = v2 - self._couple_t(v1)
        s1 = self.schur.apply(t1)
        s2 = self.m_a * t2
        out1 = s1 - self._couple(s2)
        return np.concatenate([out1, s2]) / self.alpha

    def solve(self, v) -> np.ndarray:
        n = self.prob.n
        v1, v2 = v[:n], v[n:]
        w1 = v1 + self._couple(v2)
        z1 = self.schur.solve(w1)
        z2 = v2 / self.m_a
        out2 = z2 + self._couple_t(z1)
        return self.alpha * np.concatenate([z1, out2])


@dataclass(eq=False)
class Preconditioner:
    """BDF (block diagonal, SPD) or IPF (indefinite block triangular) preconditioner."""

    kind: PreconditionerKind
    formulation: str
    prob: ProblemInstance
    partition: ActiveSetPartition
    schur: SchurApprox

    def __post_init__(self):
        if self.formulation not in ("augmented", "reduced"):
            raise ValueError(
                f"preconditioners exist for augmented/reduced, got {self.formulation!r}"
            )
        if self.kind not in ("bdf", "ipf"):
            raise ValueError(f"unknown preconditioner kind {self.kind!r}")
        self.augmented_schur = (
            AugmentedSchur(self.schur, self.prob, self.prob.alpha)
            if self.formulation == "augmented"
            else None
        )

    @property
    def label(self) -> str:
        return f"{self.kind}_{'aug' if self.formulation == 'augmented' else 'red'}"

    @property
    def size(self) -> int:
        n = self.prob.n
        return 3 * n + self.partition.n_active if self.formulation == "augmented" else 2 * n

    def apply(self, v) -> np.ndarray:
        """P^{-1} v."""
        return apply_bdf(self, v) if self.kind == "bdf" else apply_ipf(self, v)

    def as_linear_operator(self) -> LinearOperator:
        return LinearOperator((self.size, self.size), matvec=self.apply, dtype=np.float64)

    # J11 = blkdiag(M, alpha M) and J12 = [L, -Mbar; 0, P_A M] for the augmented form
    def _j11_solve(self, v):
        n, m = self.prob.n, self.prob.m_diag
        return np.concatenate([v[:n] / m, v[n:] / (self.prob.alpha * m)])

    def _j12(self, v):
        n, m, A = self.prob.n, self.prob.m_diag, self.partition.A
        dy, du = v[:n], v[n:]
        return np.concatenate([self.prob.L @ dy - self.prob.Mbar @ du, m[A] * du[A]])

    def _j12_t(self, v):
        n, m, A = self.prob.n, self.prob.m_diag, self.partition.A
        dp, dmu_a = v[:n], v[n:]
        scattered = np.zeros(n)
        scattered[A] = m[A] * dmu_a
        return np.concatenate([self.prob.L.T @ dp, -(self.prob.Mbar.T @ dp) + scattered])


def build_preconditioner(
    prob: ProblemInstance,
    part: ActiveSetPartition,
    kind: PreconditionerKind,
    formulation: str,
    inner=None,
) -> Preconditioner:
    schur = build_schur_approx(prob, part, prob.alpha, inner=inner)
    return Preconditioner(
        kind=kind, formulation=formulation, prob=prob, partition=part, schur=schur
    )


def _check(P: Preconditioner, v) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64)
    if v.shape != (P.size,):
        raise DimensionMismatch(f"{P.label}: expected a vector of length {P.size}, got {v.shape}")
    return v


def apply_bdf(P: Preconditioner, v) -> np.ndarray:
    """Inverse of blkdiag(J11, S_hat) (augmented) or blkdiag(M, S_hat / alpha) (reduced)."""
    v = _check(P, v)
    n = P.prob.n
    if P.formulation == "augmented":
        return np.concatenate([P._j11_solve(v[: 2 * n]), P.augmented_schur.solve(v[2 * n :])])
    return np.concatenate([v[:n] / P.prob.m_diag, P.prob.alpha * P.schur.solve(v[n:])])


def apply_ipf(P: Preconditioner, v) -> np.ndarray:
    """Inverse of [I, 0; J12 J11^{-1}, I] blkdiag(J11, -S_hat) [I, J11^{-1} J12^T; 0, I]."""
    v = _check(P, v)
    n = P.prob.n
    if P.formulation == "augmented":
        v1, v2 = v[: 2 * n], v[2 * n :]
        z1 = P._j11_solve(v1)
        w2 = v2 - P._j12(z1)
        x2 = -P.augmented_schur.solve(w2)
        x1 = z1 - P._j11_solve(P._j12_t(x2))
        return np.concatenate([x1, x2])
    m, alpha = P.prob.m_diag, P.prob.alpha
    v1, v2 = v[:n], v[n:]
    z1 = v1 / m
    w2 = v2 - P.prob.L @ z1
    x2 = -alpha * P.schur.solve(w2)
    x1 = z1 - (P.prob.L.T @ x2) / m
    return np.concatenate([x1, x2])
