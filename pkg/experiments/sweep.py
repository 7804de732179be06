"""Sweep expansion and the per-point worker.

This module stays free of ORM imports so worker processes can run it without app setup.
"""
import itertools
import logging
import math
from dataclasses import dataclass

from solver import newton
from solver.exceptions import SolverError
from solver.problems import DataSpec, make_problem

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SweepPoint:
    problem: str
    level: int
    points: int | None
    alpha: float
    beta: float
    formulation: str
    preconditioner: str
    forcing: str = "exact"
    eta0: float | None = None
    epsilon: float = 1.0
    delta: float | None = None
    y_d: DataSpec | None = None
    f: DataSpec | None = None
    tau: float = 1e-6
    max_iters: int = 100
    krylov_max: int = 500
    linear_solver: str = "krylov"

    @property
    def sort_key(self) -> tuple:
        return (
            self.problem,
            self.formulation,
            self.preconditioner,
            self.level,
            self.points or 0,
            -self.alpha,
            self.beta,
            self.eta0 or 0.0,
        )

    @property
    def log10_alpha(self) -> float:
        return math.log10(self.alpha)

    @property
    def slug(self) -> str:
        size = f"p{self.points}" if self.points else f"l{self.level}"
        parts = [
            self.problem,
            self.formulation,
            self.preconditioner,
            size,
            f"a{self.alpha:.0e}",
            f"b{self.beta:.0e}",
        ]
        if self.eta0 is not None:
            parts.append(f"eta{self.eta0:.0e}")
        return "_".join(parts)

    def build_problem(self):
        return make_problem(
            self.problem,
            self.level,
            self.alpha,
            self.beta,
            points=self.points,
            epsilon=self.epsilon,
            delta=self.delta,
            y_d=self.y_d,
            f=self.f,
        )

    def newton_options(self) -> newton.NewtonOptions:
        kwargs = {}
        if self.eta0 is not None:
            kwargs = {"eta0": self.eta0, "eta_max": self.eta0}
        return newton.NewtonOptions(
            tau=self.tau,
            max_iters=self.max_iters,
            forcing=self.forcing,
            formulation=self.formulation,
            preconditioner=self.preconditioner,
            krylov_max=self.krylov_max,
            linear_solver=self.linear_solver,
            **kwargs,
        )


@dataclass
class RunResult:
    point: SweepPoint
    n: int
    report: newton.NewtonReport | None = None
    error: str = ""

    @property
    def converged(self) -> bool:
        return self.report is not None and self.report.converged


def expand(config) -> list[SweepPoint]:
    """Cartesian product of the sweep lists in sort-key order."""
    product = itertools.product(
        config.grids,
        config.alphas,
        config.betas,
        config.formulations,
        config.preconditioners,
        config.eta_values,
    )
    points = [
        SweepPoint(
            problem=config.problem,
            level=level,
            points=pts,
            alpha=alpha,
            beta=beta,
            formulation=formulation,
            preconditioner=preconditioner,
            forcing=config.forcing,
            eta0=eta0,
            epsilon=config.epsilon,
            delta=config.delta,
            y_d=config.y_d,
            f=config.f,
            tau=config.tau,
            max_iters=config.max_iters,
            krylov_max=config.krylov_max,
            linear_solver=config.linear_solver,
        )
        for (level, pts), alpha, beta, formulation, preconditioner, eta0 in product
    ]
    return sorted(points, key=lambda p: p.sort_key)


def execute_point(point: SweepPoint) -> RunResult:
    """Solve one sweep point; solver failures are captured, not raised."""
    prob = point.build_problem()
    logger.info("running %s (n=%d)", point.slug, prob.n)
    try:
        _, report = newton.solve(prob, point.newton_options())
    except SolverError as exc:
        logger.warning("%s failed: %s", point.slug, exc)
        return RunResult(point=point, n=prob.n, error=f"{type(exc).__name__}: {exc}")
    return RunResult(point=point, n=prob.n, report=report)
