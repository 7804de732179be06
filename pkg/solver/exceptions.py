"""Exceptions raised by the solver package."""


class SolverError(Exception):
    """Base class for all solver failures."""


class DimensionMismatch(SolverError, ValueError):
    """Operand sizes do not agree."""


class SingularMatrix(SolverError):
    """A factorization hit a zero pivot."""


class NotPositiveDefinite(SolverError):
    """A matrix or preconditioner expected to be SPD is not."""


class StaleResidual(SolverError):
    """The merit value was requested before Theta was evaluated."""


class DenseThresholdExceeded(SolverError):
    """A dense diagnostic was requested on a problem that is too large."""

    def __init__(self, n, threshold):
        self.n = n
        self.threshold = threshold
        super().__init__(
            f"dense diagnostics need n <= {threshold}, got n = {n}; "
            "use a coarser level or raise the dense threshold"
        )


class KrylovStagnation(SolverError):
    """The inner Krylov solver hit its iteration cap without meeting the forcing term."""

    def __init__(self, stats, iteration=None):
        self.stats = stats
        self.iteration = iteration
        super().__init__(
            f"Krylov solver stopped after {stats.iterations} iterations with relative "
            f"residual {stats.final_relative_residual:.3e}"
            + (f" (Newton iteration {iteration})" if iteration is not None else "")
        )


class LineSearchFailure(SolverError):
    """Backtracking did not find a step with sufficient decrease."""

    def __init__(self, iteration, backtracks, step_length, merit):
        self.iteration = iteration
        self.backtracks = backtracks
        self.step_length = step_length
        self.merit = merit
        super().__init__(
            f"line search failed at Newton iteration {iteration} after {backtracks} "
            f"halvings (rho = {step_length:.3e}, theta = {merit:.3e})"
        )
