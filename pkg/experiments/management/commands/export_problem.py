"""Management command to export sweep problems as Matrix Market bundles."""
from django.core.management.base import BaseCommand, CommandError

from experiments.forms import ConfigError, load_config
from experiments.runner import export_problems


class Command(BaseCommand):
    help = "Writes L, M, Mbar, y_d, f, a, b as .mtx files plus manifest.json per sweep problem"

    def add_arguments(self, parser):
        parser.add_argument("config", help="Path to the experiment JSON file")
        parser.add_argument("--out", dest="output_dir", help="Output directory (overrides config)")

    def handle(self, *args, **options):
        try:
            config = load_config(options["config"], {"output_dir": options["output_dir"]})
        except ConfigError as exc:
            raise CommandError(f"invalid config:\n{exc}", returncode=2) from exc

        for directory in export_problems(config):
            self.stdout.write(self.style.SUCCESS(f"✓ Exported {directory}"))
