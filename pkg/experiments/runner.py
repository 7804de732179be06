"""Sweep orchestration: run, persist, and emit CSV/JSON for experiments and diagnostics."""
import csv
import json
import logging
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from django.db import transaction

from solver import newton, spectral
from solver.exceptions import DenseThresholdExceeded
from solver.linsys import assemble
from solver.optimality import ActiveSetPartition, residual_Theta
from solver.precond import build_preconditioner
from solver.problems import save_problem

from .models import ExperimentRun, NewtonIterationLog
from .sweep import RunResult, SweepPoint, execute_point, expand

logger = logging.getLogger(__name__)

RESULT_COLUMNS = [
    "problem",
    "form",
    "precond",
    "level",
    "n",
    "log10_alpha",
    "beta",
    "LI",
    "NLI",
    "BT",
    "pct_u0",
    "CPU",
    "TCPU",
]

DIAGNOSE_COLUMNS = [
    "problem",
    "form",
    "precond",
    "log10_alpha",
    "iteration",
    "zeta",
    "xi",
    "neg_lo",
    "neg_hi",
    "pos_lo",
    "pos_hi",
    "eig_min",
    "eig_max",
    "unit_count",
    "unit_lower_bound",
    "violations",
]


def result_row(result: RunResult) -> list[str]:
    p = result.point
    head = [p.problem, p.formulation, p.preconditioner, str(p.level), str(result.n)]
    head += [f"{p.log10_alpha:g}", f"{p.beta:g}"]
    if result.report is None:
        return head + ["", "", "", "", "", ""]
    r = result.report
    return head + [
        f"{r.average_li:.1f}",
        str(r.nli),
        str(r.backtracks),
        f"{r.pct_zero:.1f}",
        f"{r.cpu:.3f}",
        f"{r.wall_time:.2f}",
    ]


def write_results_csv(path, results: list[RunResult]) -> Path:
    """Rows sorted by sweep key; only CPU/TCPU vary between identical runs."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(RESULT_COLUMNS)
        for result in sorted(results, key=lambda r: r.point.sort_key):
            writer.writerow(result_row(result))
    return path


def write_run_json(directory, result: RunResult) -> Path:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    path = directory / f"{result.point.slug}.json"
    payload = {"point": vars(result.point), "n": result.n, "error": result.error}
    if result.report is not None:
        payload.update(json.loads(result.report.to_json()))
    path.write_text(json.dumps(payload, indent=2, sort_keys=True))
    return path


@transaction.atomic
def persist_result(result: RunResult, name: str = "") -> ExperimentRun:
    p, r = result.point, result.report
    run = ExperimentRun(
        name=name,
        problem=p.problem,
        formulation=p.formulation,
        preconditioner=p.preconditioner,
        level=p.level,
        n=result.n,
        alpha=p.alpha,
        beta=p.beta,
        forcing=p.forcing,
        eta0=p.eta0,
        error=result.error,
    )
    if r is not None:
        run.li = r.average_li
        run.nli = r.nli
        run.bt = r.backtracks
        run.pct_u0 = r.pct_zero
        run.cpu = r.cpu
        run.tcpu = r.wall_time
        run.converged = r.converged
    run.save()
    for record in r.records if r is not None else []:
        NewtonIterationLog(
            run=run,
            index=record.index,
            merit=record.merit,
            merit_next=record.merit_next,
            theta_norm=record.theta_norm,
            eta=record.eta,
            krylov_iterations=record.krylov_iterations,
            eta_compliant=record.eta_compliant,
            backtracks=record.backtracks,
            step_length=record.step_length,
            n_active=record.n_active,
            n_inactive=record.n_inactive,
            pct_zero=record.pct_zero,
        ).save()
    return run


def execute_all(points: list[SweepPoint], jobs: int = 1) -> list[RunResult]:
    if jobs <= 1 or len(points) <= 1:
        return [execute_point(point) for point in points]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(execute_point, points))


def run_sweep(config, persist: bool = True) -> list[RunResult]:
    """Run every sweep point and write results.csv plus one JSON per run."""
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    points = expand(config)
    logger.info(
        "sweep %s: %d points, %d job(s)", config.name or config.problem, len(points), config.jobs
    )
    results = execute_all(points, config.jobs)
    for result in results:
        write_run_json(out / "runs", result)
        if persist:
            persist_result(result, name=config.name)
    write_results_csv(out / "results.csv", results)
    return results


# Diagnostics


def _diagnose_row(point: SweepPoint, iteration: int, report: spectral.BoundReport) -> list[str]:
    neg = report.intervals.get("I-", (float("nan"), float("nan")))
    pos = report.intervals.get("I+", report.intervals.get("pencil", (float("nan"), float("nan"))))
    unit_bound = "" if report.unit_lower_bound is None else str(report.unit_lower_bound)
    return [
        point.problem,
        point.formulation,
        point.preconditioner,
        f"{point.log10_alpha:g}",
        str(iteration),
        f"{report.zeta:.10e}",
        f"{report.xi:.10e}",
        f"{neg[0]:.10e}",
        f"{neg[1]:.10e}",
        f"{pos[0]:.10e}",
        f"{pos[1]:.10e}",
        f"{report.eig_min:.10e}",
        f"{report.eig_max:.10e}",
        str(report.unit_count),
        unit_bound,
        str(len(report.violations)),
    ]


def diagnose_point(point: SweepPoint, dense_threshold: int, all_active: bool = False):
    """BoundReports along the Newton path, or once at the feasible start when all_active."""
    prob = point.build_problem()
    if prob.n > dense_threshold:
        raise DenseThresholdExceeded(prob.n, dense_threshold)
    reports: list[tuple[int, spectral.BoundReport]] = []

    def evaluate(k, x, part, sys, P):
        if P is None:
            P = build_preconditioner(prob, part, point.preconditioner, point.formulation)
        report = spectral.eig_preconditioned(sys, P, threshold=dense_threshold)
        reports.append((k, report))

    if all_active:
        x = newton.feasible_start(prob)
        residual_Theta(x, prob)
        part = ActiveSetPartition.all_active(prob.n)
        evaluate(0, x, part, assemble(point.formulation, x, part, prob), None)
    else:
        newton.solve(prob, point.newton_options(), callback=evaluate)
    return reports


def diagnose_sweep(config) -> Path:
    """Write diagnose.csv (one row per Newton iteration) and eigenvalue CSVs per point."""
    out = Path(config.output_dir)
    eig_dir = out / "eigenvalues"
    eig_dir.mkdir(parents=True, exist_ok=True)
    path = out / "diagnose.csv"
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(DIAGNOSE_COLUMNS)
        for point in expand(config):
            reports = diagnose_point(point, config.dense_threshold, config.all_active)
            for iteration, report in reports:
                writer.writerow(_diagnose_row(point, iteration, report))
            spectral.write_eigenvalues_csv(eig_dir / f"{point.slug}.csv", reports)
    return path


def export_problems(config) -> list[Path]:
    """One .mtx bundle per distinct (grid, alpha, beta) of the sweep."""
    out = Path(config.output_dir) / "problems"
    seen = set()
    written = []
    for point in expand(config):
        key = (point.level, point.points, point.alpha, point.beta)
        if key in seen:
            continue
        seen.add(key)
        size = f"p{point.points}" if point.points else f"l{point.level}"
        directory = out / f"{point.problem}_{size}_a{point.alpha:.0e}_b{point.beta:.0e}"
        written.append(save_problem(point.build_problem(), directory))
    return written
