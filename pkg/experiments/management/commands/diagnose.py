"""Management command to evaluate eigenvalue bounds along the Newton path."""
from django.core.management.base import BaseCommand, CommandError

from experiments.forms import ConfigError, load_config
from experiments.runner import diagnose_sweep
from solver.exceptions import DenseThresholdExceeded, SolverError


class Command(BaseCommand):
    """Write per-iteration spectral bound reports for small instances."""

    help = "Computes dense eigenvalue diagnostics of the preconditioned Newton systems"

    def add_arguments(self, parser):
        parser.add_argument("config", help="Path to the experiment JSON file")
        parser.add_argument("--out", dest="output_dir", help="Output directory (overrides config)")
        parser.add_argument("--dense-threshold", type=int, help="Largest n for dense diagnostics")
        parser.add_argument(
            "--all-active",
            action="store_true",
            default=None,
            help="Evaluate once at the feasible start with every index active",
        )

    def handle(self, *args, **options):
        """Execute the command."""
        overrides = {
            "output_dir": options["output_dir"],
            "dense_threshold": options["dense_threshold"],
            "all_active": options["all_active"],
        }
        try:
            config = load_config(options["config"], overrides)
        except ConfigError as exc:
            raise CommandError(f"invalid config:\n{exc}", returncode=2) from exc

        try:
            path = diagnose_sweep(config)
        except DenseThresholdExceeded as exc:
            raise CommandError(str(exc), returncode=2) from exc
        except SolverError as exc:
            raise CommandError(f"{type(exc).__name__}: {exc}", returncode=1) from exc

        self.stdout.write(self.style.SUCCESS(f"Diagnostics written to {path}"))
