"""Residual of the discrete optimality system, complementarity function and active sets."""
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .exceptions import DimensionMismatch, StaleResidual
from .problems import ProblemInstance

# Labels of the five index sets, in classification precedence order.
A_B, A_A, A_0, I_PLUS, I_MINUS = 0, 1, 2, 3, 4


@dataclass(frozen=True, eq=False)
class ActiveSetPartition:
    """Five disjoint index sets covering {0, ..., n-1}, stored as one label per index."""

    labels: np.ndarray

    def _indices(self, *codes) -> np.ndarray:
        return np.flatnonzero(np.isin(self.labels, codes))

    @property
    def n(self) -> int:
        return self.labels.shape[0]

    @cached_property
    def Ab(self) -> np.ndarray:
        return self._indices(A_B)

    @cached_property
    def Aa(self) -> np.ndarray:
        return self._indices(A_A)

    @cached_property
    def A0(self) -> np.ndarray:
        return self._indices(A_0)

    @cached_property
    def Iplus(self) -> np.ndarray:
        return self._indices(I_PLUS)

    @cached_property
    def Iminus(self) -> np.ndarray:
        return self._indices(I_MINUS)

    @cached_property
    def A(self) -> np.ndarray:
        return self._indices(A_B, A_A, A_0)

    @cached_property
    def I(self) -> np.ndarray:  # noqa: E741
        return self._indices(I_PLUS, I_MINUS)

    @cached_property
    def active_mask(self) -> np.ndarray:
        return self.labels <= A_0

    @cached_property
    def inactive_mask(self) -> np.ndarray:
        return self.labels >= I_PLUS

    @property
    def n_active(self) -> int:
        return int(self.A.size)

    @property
    def n_inactive(self) -> int:
        return int(self.I.size)

    def same_as(self, other: "ActiveSetPartition") -> bool:
        return np.array_equal(self.labels, other.labels)

    @classmethod
    def all_active(cls, n: int) -> "ActiveSetPartition":
        return cls(np.full(n, A_0, dtype=np.int8))

    @classmethod
    def all_inactive(cls, n: int) -> "ActiveSetPartition":
        return cls(np.full(n, I_PLUS, dtype=np.int8))


@dataclass(frozen=True)
class ResidualBlocks:
    """The four blocks of Theta(x)."""

    theta_y: np.ndarray
    theta_u: np.ndarray
    theta_p: np.ndarray
    theta_mu: np.ndarray

    def stacked(self) -> np.ndarray:
        return np.concatenate([self.theta_y, self.theta_u, self.theta_p, self.theta_mu])

    def norm(self) -> float:
        return float(np.linalg.norm(self.stacked()))


class IterateState:
    """Newton iterate x = (y, u, p, mu) with a cached residual.

    Writing any component drops the cached Theta and merit value.
    """

    _fields = ("y", "u", "p", "mu")

    def __init__(self, y, u, p, mu):
        self._residual = None
        self._theta_val = None
        self._partition = None
        self.y = y
        self.u = u
        self.p = p
        self.mu = mu

    def __setattr__(self, name, value):
        if name in self._fields:
            value = np.array(value, dtype=np.float64)
            value.setflags(write=False)
            super().__setattr__("_residual", None)
            super().__setattr__("_theta_val", None)
            super().__setattr__("_partition", None)
        super().__setattr__(name, value)

    @classmethod
    def zeros(cls, n: int) -> "IterateState":
        z = np.zeros(n)
        return cls(z, z, z, z)

    @classmethod
    def from_vector(cls, x) -> "IterateState":
        return cls(*np.split(np.asarray(x, dtype=np.float64), 4))

    @property
    def n(self) -> int:
        return self.y.shape[0]

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.y, self.u, self.p, self.mu])

    def axpy(self, rho: float, step) -> "IterateState":
        """New iterate x + rho * step."""
        return IterateState(
            self.y + rho * step.dy,
            self.u + rho * step.du,
            self.p + rho * step.dp,
            self.mu + rho * step.dmu,
        )

    @property
    def residual(self) -> ResidualBlocks | None:
        return self._residual

    @property
    def theta_val(self) -> float | None:
        return self._theta_val

    @property
    def partition(self) -> ActiveSetPartition | None:
        return self._partition

    def _store(self, residual: ResidualBlocks, partition: ActiveSetPartition) -> None:
        stacked = residual.stacked()
        super().__setattr__("_residual", residual)
        super().__setattr__("_theta_val", 0.5 * float(stacked @ stacked))
        super().__setattr__("_partition", partition)


def classify(u, mu, prob: ProblemInstance) -> ActiveSetPartition:
    """Assign each index to A_b, A_a, A_0, I_+ or I_- (first matching test wins)."""
    u = np.asarray(u, dtype=np.float64)
    mu = np.asarray(mu, dtype=np.float64)
    if u.shape != (prob.n,) or mu.shape != (prob.n,):
        raise DimensionMismatch("classify: u and mu must have length n")
    c, beta = prob.c, prob.beta
    upper = u + c * (mu - beta)
    lower = u + c * (mu + beta)

    labels = np.full(prob.n, I_MINUS, dtype=np.int8)
    free = np.ones(prob.n, dtype=bool)
    tests = (
        (A_B, c * (mu - beta) + (u - prob.b) > 0),
        # lower-bound region of the min/max form: (u - a) + c(mu + beta) < 0
        (A_A, c * (mu + beta) + (u - prob.a) < 0),
        (A_0, (lower >= 0) & (upper <= 0)),
        (I_PLUS, upper > 0),
    )
    for code, hit in tests:
        sel = free & hit
        labels[sel] = code
        free &= ~sel
    return ActiveSetPartition(labels)


def complementarity_F(u, mu, part: ActiveSetPartition, prob: ProblemInstance) -> np.ndarray:
    """Compact form of F on a fixed partition."""
    u = np.asarray(u, dtype=np.float64)
    mu = np.asarray(mu, dtype=np.float64)
    labels = part.labels
    F = np.zeros(prob.n)
    sel = labels == A_0
    F[sel] = u[sel]
    sel = labels == A_B
    F[sel] = u[sel] - prob.b[sel]
    sel = labels == A_A
    F[sel] = u[sel] - prob.a[sel]
    sel = labels == I_PLUS
    F[sel] = -prob.c * (mu[sel] - prob.beta)
    sel = labels == I_MINUS
    F[sel] = -prob.c * (mu[sel] + prob.beta)
    return F


def complementarity_minmax(u, mu, prob: ProblemInstance) -> np.ndarray:
    """Five-term min/max form of F; independent of any partition."""
    c, beta = prob.c, prob.beta
    return (
        u
        - np.maximum(0.0, u + c * (mu - beta))
        - np.minimum(0.0, u + c * (mu + beta))
        + np.maximum(0.0, (u - prob.b) + c * (mu - beta))
        + np.minimum(0.0, (u - prob.a) + c * (mu + beta))
    )


def residual_Theta(x: IterateState, prob: ProblemInstance) -> ResidualBlocks:
    """Evaluate Theta(x) and refresh the iterate's caches."""
    if x.n != prob.n:
        raise DimensionMismatch(f"iterate has n={x.n}, problem has n={prob.n}")
    m = prob.m_diag
    part = classify(x.u, x.mu, prob)
    blocks = ResidualBlocks(
        theta_y=m * x.y + prob.L.T @ x.p - m * prob.y_d,
        theta_u=prob.alpha * m * x.u - prob.Mbar.T @ x.p + m * x.mu,
        theta_p=prob.L @ x.y - prob.Mbar @ x.u - prob.f,
        theta_mu=m * complementarity_F(x.u, x.mu, part, prob),
    )
    x._store(blocks, part)
    return blocks


def merit(x: IterateState) -> float:
    """theta(x) = 0.5 * ||Theta(x)||^2 from the cache."""
    if x.theta_val is None:
        raise StaleResidual("residual_Theta must be evaluated before merit")
    return x.theta_val
