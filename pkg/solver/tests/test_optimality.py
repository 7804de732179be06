"""Tests for the residual, complementarity function and active-set classification."""
from dataclasses import replace

import numpy as np
import pytest

from solver.exceptions import DimensionMismatch, StaleResidual
from solver.optimality import (
    A_0,
    A_A,
    A_B,
    I_MINUS,
    I_PLUS,
    ActiveSetPartition,
    IterateState,
    classify,
    complementarity_F,
    complementarity_minmax,
    merit,
    residual_Theta,
)
from solver.problems import GridSpec, make_poisson

from .conftest import mixed_iterate


def classify_by_definition(u, mu, prob):
    """Per-index oracle with the same precedence."""
    c, beta = prob.c, prob.beta
    labels = []
    for ui, mi, ai, bi in zip(u, mu, prob.a, prob.b):
        if c * (mi - beta) + (ui - bi) > 0:
            labels.append(A_B)
        elif c * (mi + beta) + (ui - ai) < 0:
            labels.append(A_A)
        elif ui + c * (mi + beta) >= 0 and ui + c * (mi - beta) <= 0:
            labels.append(A_0)
        elif ui + c * (mi - beta) > 0:
            labels.append(I_PLUS)
        else:
            labels.append(I_MINUS)
    return np.array(labels)


class TestClassify:
    """Test the five-set partition."""

    def test_zero_start_is_all_a0(self, poisson):
        """u = mu = 0 puts every index in A_0."""
        part = classify(np.zeros(poisson.n), np.zeros(poisson.n), poisson)
        assert part.A0.size == poisson.n
        assert part.n_inactive == 0

    def test_strict_upper_violation(self, poisson):
        """u beyond b with large mu lands in A_b."""
        prob = poisson.with_params(c=1.0)
        u = np.zeros(prob.n)
        mu = np.zeros(prob.n)
        u[5] = prob.b[5] + 1.0
        mu[5] = prob.beta + 1.0
        part = classify(u, mu, prob)
        assert part.Ab.tolist() == [5]

    def test_mixed_iterate(self, problem):
        """Each label of the mixed iterate is recovered."""
        x, expected = mixed_iterate(problem)
        part = classify(x.u, x.mu, problem)
        np.testing.assert_array_equal(part.labels, expected)

    def test_random_matches_definition(self):
        """1024 random indices: partition is exact and matches the oracle."""
        prob = make_poisson(GridSpec(2, 5), alpha=1e-2, beta=1e-1)
        rng = np.random.default_rng(7)
        u = 40.0 * rng.standard_normal(prob.n)
        mu = 0.3 * rng.standard_normal(prob.n)
        part = classify(u, mu, prob)
        np.testing.assert_array_equal(part.labels, classify_by_definition(u, mu, prob))

        sets = [part.Ab, part.Aa, part.A0, part.Iplus, part.Iminus]
        assert sum(s.size for s in sets) == prob.n
        np.testing.assert_array_equal(np.sort(np.concatenate(sets)), np.arange(prob.n))
        np.testing.assert_array_equal(np.sort(np.concatenate([part.A, part.I])), np.arange(prob.n))
        assert all(s.size > 0 for s in sets)

    def test_length_checked(self, poisson):
        """u and mu must match the problem size."""
        with pytest.raises(DimensionMismatch):
            classify(np.zeros(3), np.zeros(3), poisson)

    def test_partition_helpers(self):
        """All-active and all-inactive partitions."""
        part = ActiveSetPartition.all_active(6)
        assert part.n_active == 6 and part.active_mask.all()
        other = ActiveSetPartition.all_inactive(6)
        assert other.Iplus.size == 6
        assert not part.same_as(other)
        assert part.same_as(ActiveSetPartition.all_active(6))


class TestComplementarity:
    """Test the compact and min/max forms of F."""

    def test_zero_start(self, poisson):
        """F vanishes at u = mu = 0."""
        z = np.zeros(poisson.n)
        part = classify(z, z, poisson)
        np.testing.assert_array_equal(complementarity_F(z, z, part, poisson), 0.0)

    def test_inactive_fixed_point(self, poisson):
        """An inactive index with mu = beta gives F = 0."""
        u = np.zeros(poisson.n)
        mu = np.zeros(poisson.n)
        u[0] = 2.0
        mu[0] = poisson.beta
        part = classify(u, mu, poisson)
        assert part.Iplus.tolist() == [0]
        assert complementarity_F(u, mu, part, poisson)[0] == 0.0

    @pytest.mark.parametrize("seed", range(5))
    def test_compact_form_matches_minmax(self, problem, seed):
        """The partitioned F equals the min/max formula."""
        x, _ = mixed_iterate(problem, seed)
        part = classify(x.u, x.mu, problem)
        compact = complementarity_F(x.u, x.mu, part, problem)
        np.testing.assert_allclose(
            compact, complementarity_minmax(x.u, x.mu, problem), rtol=0, atol=1e-12
        )


class TestResidual:
    """Test Theta, its caches and the merit function."""

    def test_blocks_match_dense_formula(self, convdiff):
        """The four residual blocks match their dense formulas."""
        x, _ = mixed_iterate(convdiff, 1)
        res = residual_Theta(x, convdiff)
        M, L, Mbar = convdiff.M.toarray(), convdiff.L.toarray(), convdiff.Mbar.toarray()
        part = classify(x.u, x.mu, convdiff)
        F = complementarity_F(x.u, x.mu, part, convdiff)
        scale = np.abs(L).max()
        np.testing.assert_allclose(
            res.theta_y, M @ x.y + L.T @ x.p - M @ convdiff.y_d, atol=1e-13 * scale
        )
        np.testing.assert_allclose(
            res.theta_u,
            convdiff.alpha * M @ x.u - Mbar.T @ x.p + M @ x.mu,
            atol=1e-13 * scale,
        )
        np.testing.assert_allclose(
            res.theta_p, L @ x.y - Mbar @ x.u - convdiff.f, atol=1e-13 * scale
        )
        np.testing.assert_allclose(res.theta_mu, M @ F, atol=1e-13 * scale)
        assert x.partition.same_as(part)

    def test_merit_is_half_squared_norm(self, poisson):
        """theta = |Theta|^2 / 2."""
        x, _ = mixed_iterate(poisson, 2)
        res = residual_Theta(x, poisson)
        stacked = res.stacked()
        assert merit(x) == pytest.approx(0.5 * float(stacked @ stacked), rel=1e-14)
        assert res.norm() == pytest.approx(np.sqrt(2.0 * merit(x)), rel=1e-14)

    def test_merit_needs_residual(self, poisson):
        """The merit needs a computed residual."""
        with pytest.raises(StaleResidual):
            merit(IterateState.zeros(poisson.n))

    def test_write_invalidates_cache(self, poisson):
        """Assigning a component drops the cached residual."""
        x, _ = mixed_iterate(poisson, 3)
        residual_Theta(x, poisson)
        assert x.theta_val is not None
        x.u = np.zeros(poisson.n)
        assert x.theta_val is None and x.residual is None and x.partition is None
        with pytest.raises(StaleResidual):
            merit(x)

    def test_components_are_read_only(self, poisson):
        """Component arrays cannot be edited in place."""
        x = IterateState.zeros(poisson.n)
        with pytest.raises(ValueError):
            x.y[0] = 1.0

    def test_zero_data_is_optimal(self, poisson):
        """With f = 0 and y_d = 0 the zero iterate has Theta = 0."""
        prob = replace(poisson, y_d=np.zeros(poisson.n))
        x = IterateState.zeros(prob.n)
        assert residual_Theta(x, prob).norm() == 0.0
        assert merit(x) == 0.0

    def test_vector_round_trip(self, poisson):
        """as_vector and from_vector are inverse."""
        x, _ = mixed_iterate(poisson, 4)
        y = IterateState.from_vector(x.as_vector())
        np.testing.assert_array_equal(y.mu, x.mu)
        assert y.n == poisson.n
