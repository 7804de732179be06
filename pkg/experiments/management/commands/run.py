"""Management command to run an experiment sweep."""
from django.core.management.base import BaseCommand, CommandError

from experiments.forms import ConfigError, load_config
from experiments.runner import run_sweep


class Command(BaseCommand):
    """Run every point of a sweep and write results.csv and per-run JSON."""

    help = "Runs the semismooth Newton solver over the sweep described by a JSON config"

    def add_arguments(self, parser):
        parser.add_argument("config", help="Path to the experiment JSON file")
        parser.add_argument("--out", dest="output_dir", help="Output directory (overrides config)")
        parser.add_argument("--jobs", type=int, help="Number of worker processes")
        parser.add_argument(
            "--no-db", action="store_true", help="Do not persist runs to the database"
        )

    def handle(self, *args, **options):
        """Execute the command."""
        overrides = {"output_dir": options["output_dir"], "jobs": options["jobs"]}
        try:
            config = load_config(options["config"], overrides)
        except ConfigError as exc:
            raise CommandError(f"invalid config:\n{exc}", returncode=2) from exc

        results = run_sweep(config, persist=not options["no_db"])

        failed = 0
        for result in results:
            if result.converged:
                r = result.report
                self.stdout.write(
                    self.style.SUCCESS(
                        f"✓ {result.point.slug}: NLI={r.nli} LI={r.average_li:.1f} "
                        f"BT={r.backtracks} %u=0={r.pct_zero:.1f}"
                    )
                )
            else:
                failed += 1
                reason = result.error or "not converged"
                self.stdout.write(self.style.ERROR(f"✗ {result.point.slug}: {reason}"))

        self.stdout.write(
            self.style.SUCCESS(f"\nSweep complete! Runs: {len(results)}, Failed: {failed}")
        )
        if failed:
            raise CommandError(f"{failed} run(s) did not converge", returncode=1)
