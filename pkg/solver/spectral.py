"""Dense eigenvalue diagnostics for the Schur complement approximation and preconditioners.

Everything here forms dense matrices, so every entry point refuses problems above the
configured dense threshold.
"""
import csv
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import scipy.linalg
from django.conf import settings

from .exceptions import DenseThresholdExceeded, NotPositiveDefinite
from .linsys import SaddleSystem
from .optimality import ActiveSetPartition
from .precond import Preconditioner, schur_factor_matrix
from .problems import ProblemInstance

logger = logging.getLogger(__name__)

# Relative slack on interval endpoints; the pencil lower end uses an absolute one.
INTERVAL_SLACK = 1e-7
PENCIL_LOWER_SLACK = 1e-9


@dataclass
class BoundReport:
    zeta: float
    xi: float
    intervals: dict[str, tuple[float, float]]
    computed_eigenvalues: list[float]
    violations: list[float] = field(default_factory=list)
    unit_count: int = 0
    unit_lower_bound: int | None = None
    label: str = ""

    @property
    def eig_min(self) -> float:
        return min(self.computed_eigenvalues) if self.computed_eigenvalues else float("nan")

    @property
    def eig_max(self) -> float:
        return max(self.computed_eigenvalues) if self.computed_eigenvalues else float("nan")

    def as_dict(self) -> dict:
        data = asdict(self)
        data["eig_min"] = self.eig_min
        data["eig_max"] = self.eig_max
        return data


def _threshold(threshold: int | None) -> int:
    return settings.SSN_DENSE_THRESHOLD if threshold is None else threshold


def _guard(n: int, threshold: int | None) -> None:
    limit = _threshold(threshold)
    if n > limit:
        raise DenseThresholdExceeded(n, limit)


def xi_from_zeta(zeta: float) -> float:
    return zeta**2 + (1.0 + zeta) ** 2


def schur_exact_dense(prob: ProblemInstance, part: ActiveSetPartition, alpha: float) -> np.ndarray:
    """S = alpha L M^{-1} L^T + Mbar Pi_I M^{-1} Mbar^T."""
    L = prob.L.toarray()
    Mbar = prob.Mbar.toarray()
    m_inv = 1.0 / prob.m_diag
    pi_i = part.inactive_mask.astype(np.float64)
    return alpha * (L * m_inv) @ L.T + (Mbar * (pi_i * m_inv)) @ Mbar.T


def schur_hat_dense(prob: ProblemInstance, part: ActiveSetPartition, alpha: float) -> np.ndarray:
    """S_hat = K M^{-1} K^T with K = sqrt(alpha) L + Mbar Pi_I."""
    K = schur_factor_matrix(prob, part, alpha).toarray()
    return (K / prob.m_diag) @ K.T


def compute_zeta(
    prob: ProblemInstance, part: ActiveSetPartition, alpha: float, threshold: int | None = None
) -> float:
    """|| M^{1/2} (sqrt(alpha) L + Mbar Pi_I)^{-1} sqrt(alpha) L M^{-1/2} ||_2."""
    _guard(prob.n, threshold)
    K = schur_factor_matrix(prob, part, alpha).toarray()
    sqrt_m = np.sqrt(prob.m_diag)
    Z = scipy.linalg.solve(K, np.sqrt(alpha) * prob.L.toarray())
    Z = sqrt_m[:, None] * Z / sqrt_m[None, :]
    return float(np.linalg.norm(Z, 2))


def bdf_intervals(zeta: float, formulation: str) -> dict[str, tuple[float, float]]:
    """Inclusion intervals for the block-diagonally preconditioned augmented/reduced matrix."""
    xi = xi_from_zeta(zeta)
    right_neg = 0.5 * (1.0 - np.sqrt(3.0))
    if formulation == "augmented":
        return {
            "I-": (0.5 * (1.0 - np.sqrt(1.0 + 4.0 * xi)), right_neg),
            "I+": (1.0, 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * xi))),
        }
    if formulation == "reduced":
        return {
            "I-": (0.5 * (-xi + 1.0 - np.sqrt((xi + 1.0) ** 2 + 4.0 * zeta**2)), right_neg),
            "I+": (1.0, 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * zeta**2))),
        }
    raise ValueError(f"no bounds for formulation {formulation!r}")


def _inside(lam: float, lo: float, hi: float) -> bool:
    return lo - INTERVAL_SLACK * max(1.0, abs(lo)) <= lam <= hi + INTERVAL_SLACK * max(1.0, abs(hi))


def _unit_count(eigs: np.ndarray, unit_tol: float) -> int:
    return int(np.sum(np.abs(eigs - 1.0) <= unit_tol))


def eig_pencil_S(
    prob: ProblemInstance,
    part: ActiveSetPartition,
    alpha: float,
    threshold: int | None = None,
    unit_tol: float | None = None,
) -> BoundReport:
    """Generalized eigenvalues of (S, S_hat) against [1/2, xi]."""
    _guard(prob.n, threshold)
    unit_tol = settings.SSN_UNIT_EIG_TOL if unit_tol is None else unit_tol
    S = schur_exact_dense(prob, part, alpha)
    S_hat = schur_hat_dense(prob, part, alpha)
    eigs = np.sort(scipy.linalg.eigh(S, S_hat, eigvals_only=True))
    zeta = compute_zeta(prob, part, alpha, threshold)
    xi = xi_from_zeta(zeta)
    upper = xi + INTERVAL_SLACK * xi
    violations = [float(lam) for lam in eigs if lam < 0.5 - PENCIL_LOWER_SLACK or lam > upper]
    return BoundReport(
        zeta=zeta,
        xi=xi,
        intervals={"pencil": (0.5, xi)},
        computed_eigenvalues=eigs.tolist(),
        violations=violations,
        unit_count=_unit_count(eigs, unit_tol),
        unit_lower_bound=prob.n - 2 * part.n_inactive,
        label="pencil",
    )


def dense_preconditioner_inverse(P: Preconditioner) -> np.ndarray:
    """Columns P^{-1} e_j."""
    eye = np.eye(P.size)
    return np.column_stack([P.apply(eye[:, j]) for j in range(P.size)])


def eig_preconditioned(
    J: SaddleSystem, P: Preconditioner, threshold: int | None = None, unit_tol: float | None = None
) -> BoundReport:
    """Eigenvalues of P^{-1} J checked against the BDF intervals or the IPF structure."""
    prob, part = J.prob, J.partition
    _guard(prob.n, threshold)
    if J.formulation != P.formulation:
        raise ValueError(f"system is {J.formulation}, preconditioner is {P.formulation}")
    unit_tol = settings.SSN_UNIT_EIG_TOL if unit_tol is None else unit_tol
    zeta = compute_zeta(prob, part, prob.alpha, threshold)
    xi = xi_from_zeta(zeta)
    J_dense = J.to_dense()
    P_inv = dense_preconditioner_inverse(P)

    if P.kind == "bdf":
        # P^{-1} = R R^T, so P^{-1} J is similar to the symmetric R^T J R
        try:
            R = np.linalg.cholesky(0.5 * (P_inv + P_inv.T))
        except np.linalg.LinAlgError as exc:
            raise NotPositiveDefinite(f"{P.label} is not positive definite") from exc
        eigs = np.sort(scipy.linalg.eigvalsh(R.T @ (0.5 * (J_dense + J_dense.T)) @ R))
        intervals = bdf_intervals(zeta, J.formulation)
        violations = [
            float(lam)
            for lam in eigs
            if not any(_inside(lam, lo, hi) for lo, hi in intervals.values())
        ]
        unit_lower_bound = None
    else:
        raw = scipy.linalg.eigvals(P_inv @ J_dense)
        eigs = np.sort(raw.real)
        intervals = {"unit": (1.0, 1.0), "pencil": (0.5, xi)}
        scale = np.maximum(1.0, np.abs(raw))
        complex_parts = np.abs(raw.imag) > 1e-6 * scale
        violations = [
            float(lam.real)
            for lam, cplx in zip(raw, complex_parts)
            if cplx or not (abs(lam.real - 1.0) <= unit_tol or _inside(lam.real, 0.5, xi))
        ]
        n, n_a, n_i = prob.n, part.n_active, part.n_inactive
        if J.formulation == "augmented":
            unit_lower_bound = 3 * n + n_a - 2 * n_i
        else:
            unit_lower_bound = 2 * n - 2 * n_i

    report = BoundReport(
        zeta=zeta,
        xi=xi,
        intervals={k: (float(lo), float(hi)) for k, (lo, hi) in intervals.items()},
        computed_eigenvalues=eigs.tolist(),
        violations=violations,
        unit_count=_unit_count(eigs, unit_tol),
        unit_lower_bound=unit_lower_bound,
        label=P.label,
    )
    if violations:
        logger.warning(
            "%s: %d eigenvalues outside the predicted intervals", P.label, len(violations)
        )
    return report


def write_eigenvalues_csv(path, reports: list[tuple[int, BoundReport]]) -> Path:
    """One row per eigenvalue: iteration, label, eigenvalue (plot data)."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["iteration", "label", "eigenvalue"])
        for iteration, report in reports:
            for lam in report.computed_eigenvalues:
                writer.writerow([iteration, report.label, f"{lam:.12e}"])
    return path
