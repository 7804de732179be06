"""Globalized inexact semismooth Newton method.

Each iteration chooses a forcing term, solves the augmented or reduced Newton system with a
preconditioned Krylov method (or directly), lifts the solution to a full step and
backtracks on the merit function theta = 0.5 ||Theta||^2.
"""
import csv
import io
import json
import logging
import time
from dataclasses import asdict, dataclass, field
from typing import Callable, Literal

import numpy as np

from . import krylov
from .exceptions import KrylovStagnation, LineSearchFailure
from .linsys import SaddleSystem, assemble, lift_solution
from .optimality import ActiveSetPartition, IterateState, residual_Theta
from .precond import Preconditioner, build_preconditioner
from .problems import ProblemInstance
from .sparse import factorize

logger = logging.getLogger(__name__)

EXACT_ETA = 1e-10
# Relative threshold below which a control entry counts as zero.
ZERO_CONTROL_TOL = 1e-8

Forcing = Literal["exact", "eisenstat_walker"]


@dataclass(frozen=True)
class NewtonOptions:
    sigma: float = 0.1
    gamma: float = 1e-4
    tau: float = 1e-6
    max_iters: int = 100
    max_backtracks: int = 30
    forcing: Forcing = "exact"
    eta0: float = 1e-1
    eta_max: float = 1e-1
    chi: float = 0.9
    formulation: Literal["augmented", "reduced"] = "reduced"
    preconditioner: Literal["bdf", "ipf"] = "ipf"
    krylov_max: int = 500
    linear_solver: Literal["krylov", "direct"] = "krylov"

    def __post_init__(self):
        if not 0.0 < self.sigma <= 1.0:
            raise ValueError(f"sigma must lie in (0, 1], got {self.sigma}")
        if not 0.0 < self.gamma < 1.0:
            raise ValueError(f"gamma must lie in (0, 1), got {self.gamma}")
        if not self.tau > 0.0:
            raise ValueError(f"tau must be positive, got {self.tau}")
        if not 0.0 < self.eta0 < 1.0:
            raise ValueError(f"eta0 must lie in (0, 1), got {self.eta0}")
        if not 0.0 < self.eta_max < 1.0:
            raise ValueError(f"eta_max must lie in (0, 1), got {self.eta_max}")
        if self.max_iters < 0 or self.max_backtracks < 0 or self.krylov_max < 1:
            raise ValueError("iteration limits must be nonnegative (krylov_max >= 1)")
        if self.forcing not in ("exact", "eisenstat_walker"):
            raise ValueError(f"unknown forcing {self.forcing!r}")
        if self.formulation not in ("augmented", "reduced"):
            raise ValueError(f"unknown formulation {self.formulation!r}")
        if self.preconditioner not in ("bdf", "ipf"):
            raise ValueError(f"unknown preconditioner {self.preconditioner!r}")
        if self.linear_solver not in ("krylov", "direct"):
            raise ValueError(f"unknown linear solver {self.linear_solver!r}")


@dataclass
class NewtonIterationRecord:
    index: int
    merit: float
    merit_next: float
    theta_norm: float
    eta: float
    krylov_iterations: int
    inner_residual: float
    eta_compliant: bool
    inner_breakdown: str | None
    backtracks: int
    step_length: float
    n_active: int
    n_inactive: int
    pct_zero: float
    cpu: float

    def sufficient_decrease(self, sigma: float, gamma: float) -> bool:
        return self.merit_next <= (1.0 - 2.0 * sigma * gamma * self.step_length) * self.merit


@dataclass
class NewtonReport:
    records: list[NewtonIterationRecord] = field(default_factory=list)
    converged: bool = False
    final_theta_norm: float = np.inf
    pct_zero: float = 0.0
    wall_time: float = 0.0
    options: dict = field(default_factory=dict)

    @property
    def nli(self) -> int:
        return len(self.records)

    @property
    def total_krylov(self) -> int:
        return sum(r.krylov_iterations for r in self.records)

    @property
    def average_li(self) -> float:
        return self.total_krylov / self.nli if self.records else 0.0

    @property
    def noncompliant_steps(self) -> list[int]:
        return [r.index for r in self.records if not r.eta_compliant]

    @property
    def backtracks(self) -> int:
        return sum(r.backtracks for r in self.records)

    @property
    def cpu(self) -> float:
        """Average time per inner solve."""
        return sum(r.cpu for r in self.records) / self.nli if self.records else 0.0

    def totals(self) -> dict:
        return {
            "NLI": self.nli,
            "LI": self.average_li,
            "BT": self.backtracks,
            "total_krylov": self.total_krylov,
            "pct_u0": self.pct_zero,
            "CPU": self.cpu,
            "TCPU": self.wall_time,
            "converged": self.converged,
            "eta_noncompliant": len(self.noncompliant_steps),
            "final_theta_norm": self.final_theta_norm,
        }

    def to_json(self) -> str:
        payload = {
            "options": self.options,
            "totals": self.totals(),
            "iterations": [asdict(r) for r in self.records],
        }
        return json.dumps(payload, indent=2, sort_keys=True)

    def to_csv(self) -> str:
        """One row per Newton iteration followed by a totals footer."""
        buf = io.StringIO()
        columns = list(NewtonIterationRecord.__dataclass_fields__)
        writer = csv.writer(buf)
        writer.writerow(columns)
        for record in self.records:
            writer.writerow([getattr(record, name) for name in columns])
        totals = self.totals()
        writer.writerow(["totals", *(f"{k}={v}" for k, v in totals.items())])
        return buf.getvalue()


Callback = Callable[
    [int, IterateState, ActiveSetPartition, SaddleSystem, Preconditioner | None], None
]


def feasible_start(prob: ProblemInstance) -> IterateState:
    """u = 0 and (y, p, mu) solving the three linear blocks of the optimality system."""
    F = factorize(prob.L, "lu")
    m = prob.m_diag
    u0 = np.zeros(prob.n)
    y0 = F.solve(prob.f + prob.Mbar @ u0)
    p0 = F.solve_transpose(-m * (y0 - prob.y_d))
    mu0 = (prob.Mbar.T @ p0 - prob.alpha * m * u0) / m
    return IterateState(y0, u0, p0, mu0)


def forcing_term(history, prev_eta: float | None, opts: NewtonOptions) -> float:
    """Exact mode or the Eisenstat-Walker rule with its two safeguards."""
    if opts.forcing == "exact":
        return EXACT_ETA
    if len(history) < 2 or prev_eta is None:
        return opts.eta0
    ratio = history[-1] / history[-2]
    eta = opts.chi * ratio**2
    floor = opts.chi * prev_eta**2
    if floor > 0.1:
        eta = max(eta, floor)
    return min(eta, opts.eta_max)


def sparsity_percent(u) -> float:
    u = np.asarray(u, dtype=np.float64)
    if u.size == 0:
        return 100.0
    tol = ZERO_CONTROL_TOL * max(1.0, float(np.max(np.abs(u))))
    return 100.0 * np.count_nonzero(np.abs(u) <= tol) / u.size


def _inner_solve(sys: SaddleSystem, P: Preconditioner | None, tol: float, opts: NewtonOptions):
    if opts.linear_solver == "direct":
        F = factorize(sys.to_sparse(), "lu")
        z = F.solve(sys.rhs)
        bnorm = float(np.linalg.norm(sys.rhs)) or 1.0
        stats = krylov.KrylovStats(
            iterations=0,
            final_relative_residual=float(np.linalg.norm(sys.residual(z))) / bnorm,
            converged=True,
        )
        return z, stats
    if opts.preconditioner == "bdf":
        return krylov.minres(sys.apply, P.apply, sys.rhs, tol, max_iter=opts.krylov_max)
    return krylov.gmres(sys.apply, P.apply, sys.rhs, tol, max_iter=opts.krylov_max)


def solve(
    prob: ProblemInstance,
    opts: NewtonOptions | None = None,
    x0: IterateState | None = None,
    callback: Callback | None = None,
) -> tuple[IterateState, NewtonReport]:
    opts = opts or NewtonOptions()
    started = time.process_time()
    x = feasible_start(prob) if x0 is None else x0
    residual_Theta(x, prob)
    norm = float(np.sqrt(2.0 * x.theta_val))
    history = [norm]
    report = NewtonReport(options=asdict(opts))
    eta = None

    for k in range(opts.max_iters + 1):
        if norm <= opts.tau:
            report.converged = True
            break
        if k == opts.max_iters:
            break

        eta = forcing_term(history, eta, opts)
        part = x.partition
        sys = assemble(opts.formulation, x, part, prob)
        P = None
        if opts.linear_solver == "krylov":
            P = build_preconditioner(prob, part, opts.preconditioner, opts.formulation)
        if callback is not None:
            callback(k, x, part, sys, P)

        solve_started = time.process_time()
        bnorm = float(np.linalg.norm(sys.rhs))
        tol = eta * norm / bnorm if bnorm > 0.0 else eta
        z, stats = _inner_solve(sys, P, tol, opts)
        solve_cpu = time.process_time() - solve_started
        if not stats.converged and stats.breakdown is None:
            logger.warning("Krylov stagnation at Newton iteration %d", k)
            raise KrylovStagnation(stats, iteration=k)
        inner_residual = stats.final_relative_residual * bnorm
        compliant = opts.linear_solver == "direct" or inner_residual <= eta * norm * (1.0 + 1e-12)
        if not compliant:
            logger.warning(
                "newton it=%d inner residual %.3e exceeds eta*|Theta| = %.3e (%s)",
                k,
                inner_residual,
                eta * norm,
                stats.breakdown,
            )
        step = lift_solution(sys, z)

        theta0 = x.theta_val
        rho, backtracks = 1.0, 0
        while True:
            trial = x.axpy(rho, step)
            residual_Theta(trial, prob)
            if trial.theta_val - theta0 <= -2.0 * opts.sigma * opts.gamma * rho * theta0:
                break
            backtracks += 1
            if backtracks > opts.max_backtracks:
                logger.warning("line search failed at Newton iteration %d", k)
                raise LineSearchFailure(k, backtracks - 1, rho, theta0)
            rho /= 2.0

        record = NewtonIterationRecord(
            index=k,
            merit=theta0,
            merit_next=trial.theta_val,
            theta_norm=norm,
            eta=eta,
            krylov_iterations=stats.iterations,
            inner_residual=inner_residual,
            eta_compliant=compliant,
            inner_breakdown=stats.breakdown,
            backtracks=backtracks,
            step_length=rho,
            n_active=part.n_active,
            n_inactive=part.n_inactive,
            pct_zero=sparsity_percent(trial.u),
            cpu=solve_cpu,
        )
        report.records.append(record)
        x = trial
        norm = float(np.sqrt(2.0 * x.theta_val))
        history.append(norm)
        logger.info(
            "newton it=%d |Theta|=%.3e eta=%.1e li=%d bt=%d |A|=%d |I|=%d",
            k,
            norm,
            eta,
            stats.iterations,
            backtracks,
            part.n_active,
            part.n_inactive,
        )

    report.final_theta_norm = norm
    report.pct_zero = sparsity_percent(x.u)
    report.wall_time = time.process_time() - started
    if not report.converged:
        logger.warning(
            "newton did not converge in %d iterations (|Theta|=%.3e)", opts.max_iters, norm
        )
    return x, report
