"""Tests for the globalized semismooth Newton driver."""
import json
import logging
from dataclasses import replace

import numpy as np
import pytest

from solver import krylov
from solver.exceptions import KrylovStagnation
from solver.newton import (
    EXACT_ETA,
    NewtonOptions,
    feasible_start,
    forcing_term,
    solve,
    sparsity_percent,
)
from solver.optimality import residual_Theta
from solver.problems import GridSpec, make_poisson


class TestOptions:
    """Test option validation."""

    def test_defaults(self):
        """Default line-search and Newton settings."""
        opts = NewtonOptions()
        assert (opts.sigma, opts.gamma, opts.tau) == (0.1, 1e-4, 1e-6)
        assert opts.max_backtracks == 30
        assert opts.formulation == "reduced" and opts.preconditioner == "ipf"

    @pytest.mark.parametrize(
        "field,value",
        [
            ("sigma", 0.0),
            ("gamma", 1.0),
            ("tau", -1.0),
            ("eta0", 1.0),
            ("eta_max", 0.0),
            ("krylov_max", 0),
            ("forcing", "constant"),
            ("formulation", "full"),
            ("preconditioner", "ilu"),
            ("linear_solver", "cg"),
        ],
    )
    def test_invalid(self, field, value):
        """Out-of-range options are refused."""
        with pytest.raises(ValueError):
            NewtonOptions(**{field: value})


class TestForcingTerm:
    """Test exact mode and the Eisenstat-Walker rule."""

    def test_exact(self):
        """Exact mode always returns the fixed tiny forcing term."""
        assert forcing_term([1.0, 0.5], 0.1, NewtonOptions()) == EXACT_ETA

    def test_first_iteration_uses_eta0(self):
        """The first step uses eta0."""
        opts = NewtonOptions(forcing="eisenstat_walker", eta0=0.05)
        assert forcing_term([1.0], None, opts) == 0.05

    def test_quadratic_ratio(self):
        """The forcing term is chi times the squared residual ratio."""
        opts = NewtonOptions(forcing="eisenstat_walker")
        assert forcing_term([1.0, 0.1], 0.1, opts) == pytest.approx(0.009)

    def test_capped_by_eta_max(self):
        """The forcing term never exceeds eta_max."""
        opts = NewtonOptions(forcing="eisenstat_walker", eta_max=0.1)
        assert forcing_term([1.0, 1.0], 0.1, opts) == pytest.approx(0.1)
        wide = NewtonOptions(forcing="eisenstat_walker", eta_max=0.95)
        assert forcing_term([1.0, 1.0], 0.1, wide) == pytest.approx(0.9)

    def test_safeguard_keeps_previous_term(self):
        """chi * eta_prev^2 > 0.1 stops the forcing term from collapsing."""
        opts = NewtonOptions(forcing="eisenstat_walker", eta0=0.5, eta_max=0.5)
        assert forcing_term([1.0, 0.1], 0.5, opts) == pytest.approx(0.225)


class TestSparsity:
    """Test the zero-control percentage."""

    def test_percentages(self):
        """Exact zeros count towards sparsity, tiny values do not."""
        assert sparsity_percent(np.zeros(4)) == 100.0
        assert sparsity_percent(np.array([0.0, 1.0, -2.0, 0.0])) == 50.0
        assert sparsity_percent(np.array([1e-12, 3.0])) == 50.0
        assert sparsity_percent(np.array([])) == 100.0


class TestFeasibleStart:
    """The starting point solves the three linear blocks."""

    def test_linear_blocks_vanish(self, problem):
        """Theta^y, Theta^u and Theta^p are zero at the start."""
        x = feasible_start(problem)
        res = residual_Theta(x, problem)
        scale = abs(problem.L).max() * max(1.0, np.abs(x.as_vector()).max())
        assert not x.u.any()
        for block in (res.theta_y, res.theta_u, res.theta_p):
            np.testing.assert_allclose(block, 0.0, atol=1e-10 * scale)

    def test_zero_data_is_optimal(self, poisson):
        """Zero data stops before the first step."""
        prob = replace(poisson, y_d=np.zeros(poisson.n))
        x, report = solve(prob)
        assert report.converged
        assert report.nli == 0
        assert not x.as_vector().any()


class TestSolve:
    """End-to-end Newton runs on small problems."""

    def test_converges(self, poisson):
        """Default options reach tau on the Poisson problem."""
        x, report = solve(poisson)
        assert report.converged
        assert report.final_theta_norm <= 1e-6
        assert residual_Theta(x, poisson).norm() == pytest.approx(report.final_theta_norm)
        assert 1 <= report.nli < 20
        assert 0.0 <= report.pct_zero <= 100.0

    @pytest.mark.parametrize("preconditioner", ["bdf", "ipf"])
    @pytest.mark.parametrize("formulation", ["augmented", "reduced"])
    def test_every_combination_converges(self, convdiff, formulation, preconditioner):
        """All formulation and preconditioner pairs converge."""
        opts = NewtonOptions(
            formulation=formulation, preconditioner=preconditioner, forcing="eisenstat_walker"
        )
        _, report = solve(convdiff, opts)
        assert report.converged
        assert report.total_krylov > 0

    def test_sufficient_decrease_on_every_step(self, problem):
        """Every accepted step satisfies the Armijo condition."""
        opts = NewtonOptions(forcing="eisenstat_walker")
        _, report = solve(problem.with_params(alpha=1e-4), opts)
        for record in report.records:
            assert record.sufficient_decrease(opts.sigma, opts.gamma)
            assert 0.0 < record.step_length <= 1.0
            assert record.n_active + record.n_inactive == problem.n

    def test_formulations_give_the_same_iterates(self):
        """With a direct inner solve both formulations visit the same iterates."""
        prob = make_poisson(GridSpec(2, 4), alpha=1e-2, beta=1e-4)

        def run(formulation):
            path = []
            x, report = solve(
                prob,
                NewtonOptions(formulation=formulation, linear_solver="direct"),
                callback=lambda k, x, part, sys, P: path.append(x.as_vector().copy()),
            )
            path.append(x.as_vector())
            return path, report

        aug_path, aug = run("augmented")
        red_path, red = run("reduced")
        assert aug.converged and red.converged
        assert aug.nli == red.nli >= 1
        assert [r.n_active for r in aug.records] == [r.n_active for r in red.records]
        for x_aug, x_red in zip(aug_path, red_path):
            assert np.linalg.norm(x_aug - x_red) <= 1e-8 * np.linalg.norm(x_red)

    def test_direct_solver_reports_no_krylov_iterations(self, poisson):
        """Sparse LU steps count no Krylov iterations."""
        _, report = solve(poisson, NewtonOptions(linear_solver="direct"))
        assert report.converged
        assert report.total_krylov == 0

    def test_eisenstat_walker(self, poisson):
        """Forcing terms start at eta0 and stay below eta_max."""
        opts = NewtonOptions(forcing="eisenstat_walker", eta0=0.1, eta_max=0.1)
        _, report = solve(poisson, opts)
        assert report.converged
        assert report.records[0].eta == 0.1
        assert all(r.eta <= 0.1 for r in report.records)

    def test_callback_sees_every_iteration(self, poisson):
        """The callback runs once per Newton iteration."""
        seen = []

        def callback(k, x, part, sys, P):
            seen.append((k, part.n, sys.formulation, P is not None))

        _, report = solve(poisson, callback=callback)
        assert [s[0] for s in seen] == list(range(report.nli))
        assert all(s[1] == poisson.n and s[2] == "reduced" and s[3] for s in seen)

    @pytest.mark.parametrize("forcing", ["exact", "eisenstat_walker"])
    def test_inner_residual_meets_forcing(self, problem, forcing):
        """Compliant steps satisfy |r| <= eta |Theta|; the rest name their breakdown."""
        _, report = solve(problem, NewtonOptions(forcing=forcing))
        assert report.converged
        for record in report.records:
            bound = record.eta * record.theta_norm * (1.0 + 1e-12)
            assert record.eta_compliant == (record.inner_residual <= bound)
            if not record.eta_compliant:
                assert record.inner_breakdown == krylov.ATTAINABLE_ACCURACY
        assert report.totals()["eta_noncompliant"] == len(report.noncompliant_steps)
        if forcing == "eisenstat_walker":
            assert report.noncompliant_steps == []

    def test_noncompliant_step_is_flagged(self, poisson, monkeypatch, caplog):
        """A breakdown short of the forcing bound is taken, logged and recorded."""
        gmres = krylov.gmres

        def truncated(apply_J, apply_P_inverse, b, tol, max_iter=500, x0=None):
            x, stats = gmres(apply_J, apply_P_inverse, b, tol, max_iter=3)
            stats.breakdown = krylov.ATTAINABLE_ACCURACY
            return x, stats

        monkeypatch.setattr(krylov, "gmres", truncated)
        monkeypatch.setattr(logging.getLogger("solver"), "propagate", True)
        _, report = solve(poisson, NewtonOptions(max_iters=1))
        record = report.records[0]
        assert not record.eta_compliant
        assert record.inner_residual > record.eta * record.theta_norm
        assert record.inner_breakdown == krylov.ATTAINABLE_ACCURACY
        assert report.noncompliant_steps == [0]
        assert "exceeds eta" in caplog.text

    def test_iteration_cap(self, poisson):
        """max_iters = 0 reports nonconvergence without a step."""
        _, report = solve(poisson, NewtonOptions(max_iters=0))
        assert not report.converged
        assert report.nli == 0

    def test_krylov_stagnation(self, poisson):
        """An iteration-limited inner solve raises KrylovStagnation."""
        opts = NewtonOptions(preconditioner="bdf", krylov_max=1)
        with pytest.raises(KrylovStagnation) as excinfo:
            solve(poisson, opts)
        assert excinfo.value.iteration == 0


class TestReport:
    """Test the JSON and CSV renderings of a run."""

    @pytest.fixture
    def report(self, poisson):
        return solve(poisson)[1]

    def test_json(self, report):
        """The JSON report carries totals, options and iterations."""
        data = json.loads(report.to_json())
        assert data["totals"]["NLI"] == report.nli
        assert data["totals"]["converged"] is True
        assert len(data["iterations"]) == report.nli
        assert data["options"]["formulation"] == "reduced"

    def test_csv(self, report):
        """The CSV report has a header, one row per iteration and totals."""
        lines = report.to_csv().strip().splitlines()
        assert lines[0].startswith("index,merit,merit_next")
        assert len(lines) == report.nli + 2
        assert lines[-1].startswith("totals,NLI=")

    def test_averages(self, report):
        """LI is the mean Krylov count per Newton step."""
        assert report.average_li == pytest.approx(report.total_krylov / report.nli)
        assert report.cpu >= 0.0
