"""Tests for the full, augmented and reduced Newton systems."""
import numpy as np
import pytest

from solver import krylov
from solver.exceptions import DimensionMismatch
from solver.linsys import (
    assemble,
    assemble_augmented,
    assemble_full,
    assemble_reduced,
    lift_solution,
    recover_step,
    residual_equivalence_check,
)
from solver.optimality import ActiveSetPartition, IterateState, residual_Theta
from solver.problems import CDConfig, GridSpec, make_convection_diffusion, make_poisson

from .conftest import mixed_iterate


def prepared(prob, seed=0):
    x, _ = mixed_iterate(prob, seed)
    residual_Theta(x, prob)
    return x, x.partition


def full_step(prob, x, part):
    sys = assemble_full(x, part, prob)
    return np.linalg.solve(sys.to_dense(), sys.rhs)


class TestOperators:
    """Matrix-free operators agree with their explicit assembly."""

    @pytest.mark.parametrize("formulation", ["full", "augmented", "reduced"])
    def test_matvec_matches_sparse(self, problem, formulation):
        """The matrix-free product equals the assembled matrix."""
        x, part = prepared(problem)
        sys = assemble(formulation, x, part, problem)
        v = np.random.default_rng(1).standard_normal(sys.size)
        A = sys.to_sparse()
        assert A.shape == (sys.size, sys.size)
        np.testing.assert_allclose(sys.apply(v), A @ v, rtol=1e-12, atol=1e-12 * abs(A).max())

    @pytest.mark.parametrize("formulation", ["augmented", "reduced"])
    def test_symmetric(self, problem, formulation):
        """Augmented and reduced systems are symmetric."""
        x, part = prepared(problem)
        J = assemble(formulation, x, part, problem).to_dense()
        np.testing.assert_allclose(J, J.T, atol=1e-14 * np.abs(J).max())

    def test_sizes(self, poisson):
        """System sizes per formulation."""
        x, part = prepared(poisson)
        n = poisson.n
        assert assemble_full(x, part, poisson).size == 4 * n
        assert assemble_augmented(x, part, poisson).size == 3 * n + part.n_active
        assert assemble_reduced(x, part, poisson).size == 2 * n

    def test_augmented_without_active_indices(self, poisson):
        """An empty active set drops the mu_A block."""
        x, _ = prepared(poisson)
        part = ActiveSetPartition.all_inactive(poisson.n)
        sys = assemble_augmented(x, part, poisson)
        assert sys.size == 3 * poisson.n
        assert sys.to_sparse().shape == (3 * poisson.n, 3 * poisson.n)

    def test_full_jacobian_matches_finite_differences(self, convdiff):
        """Theta is affine on a fixed partition, so a small difference quotient is J v."""
        x, part = prepared(convdiff, 2)
        sys = assemble_full(x, part, convdiff)
        v = np.random.default_rng(5).standard_normal(4 * convdiff.n)
        eps = 1e-7
        shifted = IterateState.from_vector(x.as_vector() + eps * v)
        diff = (residual_Theta(shifted, convdiff).stacked() - x.residual.stacked()) / eps
        assert shifted.partition.same_as(part)
        Jv = sys.apply(v)
        np.testing.assert_allclose(diff, Jv, atol=1e-5 * np.linalg.norm(Jv))

    def test_unknown_formulation(self, poisson):
        """Unknown formulations are refused."""
        x, part = prepared(poisson)
        with pytest.raises(ValueError):
            assemble("condensed", x, part, poisson)

    def test_partition_size_checked(self, poisson):
        """The partition must match the problem size."""
        x, _ = prepared(poisson)
        with pytest.raises(DimensionMismatch):
            assemble_reduced(x, ActiveSetPartition.all_active(5), poisson)


class TestStepEquivalence:
    """Every formulation yields the same Newton step."""

    @pytest.mark.parametrize("formulation", ["augmented", "reduced"])
    def test_exact_solve_lifts_to_full_step(self, problem, formulation):
        """Exact reduced and augmented solves lift to the full Newton step."""
        x, part = prepared(problem, 3)
        expected = full_step(problem, x, part)
        sys = assemble(formulation, x, part, problem)
        z = np.linalg.solve(sys.to_dense(), sys.rhs)
        step = lift_solution(sys, z).stacked()
        np.testing.assert_allclose(step, expected, rtol=1e-8, atol=1e-8 * np.abs(expected).max())

    def test_step_sets_inactive_multipliers(self, poisson):
        """After a full step mu is exactly +-beta on I."""
        x, part = prepared(poisson, 4)
        sys = assemble_reduced(x, part, poisson)
        step = lift_solution(sys, np.linalg.solve(sys.to_dense(), sys.rhs))
        mu_next = x.mu + step.dmu
        np.testing.assert_allclose(mu_next[part.Iplus], poisson.beta, rtol=1e-12)
        np.testing.assert_allclose(mu_next[part.Iminus], -poisson.beta, rtol=1e-12)

    def test_recover_step_requires_reduced(self, poisson):
        """Step recovery is defined for the reduced system only."""
        x, part = prepared(poisson)
        sys = assemble_augmented(x, part, poisson)
        with pytest.raises(ValueError):
            recover_step(np.zeros(poisson.n), np.zeros(poisson.n), sys)

    def test_lift_checks_length(self, poisson):
        """The lifted vector must match the system size."""
        x, part = prepared(poisson)
        sys = assemble_reduced(x, part, poisson)
        with pytest.raises(DimensionMismatch):
            lift_solution(sys, np.zeros(3))


class TestResidualEquivalence:
    """The reduced residual norm equals the residual of the lifted full step."""

    @pytest.mark.parametrize("seed", range(50))
    def test_truncated_solves(self, seed):
        """Truncated GMRES and MINRES iterates keep the two residual norms equal."""
        rng = np.random.default_rng(100 + seed)
        alpha = 10.0 ** rng.uniform(-3, -1)
        if seed % 2:
            prob = make_poisson(GridSpec(2, 2), alpha=alpha, beta=1e-4)
        else:
            prob = make_convection_diffusion(GridSpec.from_points(4), CDConfig(), alpha, 1e-4)
        assert prob.n <= 32
        x, part = prepared(prob, seed)
        full = assemble_full(x, part, prob)
        red = assemble_reduced(x, part, prob)
        method = krylov.gmres if seed % 4 < 2 else krylov.minres
        approx, stats = method(red.apply, None, red.rhs, tol=1e-14, max_iter=1 + seed % 5)
        assert stats.iterations >= 1
        r_red, r_full = residual_equivalence_check(full, red, approx)
        assert r_full > 0
        assert abs(r_full - r_red) <= 1e-11 * r_full

    def test_dense_dump_limited_to_small_systems(self, tmp_path):
        """Dense dumps above the size limit are refused."""
        prob = make_poisson(GridSpec(2, 4), alpha=1e-2, beta=1e-4)
        x, part = prepared(prob)
        sys = assemble_reduced(x, part, prob)
        with pytest.raises(ValueError):
            sys.dump_dense_mtx(tmp_path / "J.mtx")

    def test_dense_dump(self, tmp_path, poisson):
        """A small system dumps to a dense Matrix Market file."""
        x, part = prepared(poisson)
        sys = assemble_reduced(x, part, poisson)
        sys.dump_dense_mtx(tmp_path / "J.mtx")
        assert (tmp_path / "J.mtx").exists()
