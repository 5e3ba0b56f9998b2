"""
Management command to integrate one radial configuration.

Usage:
    python manage.py simulate --config configs/cosine_n2.json --out runs/cosine_n2

Writes diagnostics.csv, final_state.csv and summary.json into the output
directory and prints the classification.
"""
import logging

from django.conf import settings
from django.core.exceptions import ValidationError
from django.core.management.base import BaseCommand, CommandError

from radial_ks.csv_io import NonFiniteOutput, write_run
from radial_ks.dynamics import run
from radial_ks.forms import describe, load_sim_config, read_json

logger = logging.getLogger(__name__)


class Command(BaseCommand):
    help = 'Simulate the flux-limited Keller-Segel system for one JSON configuration'

    def add_arguments(self, parser):
        parser.add_argument('--config', required=True, help='Path to the JSON run configuration')
        parser.add_argument('--out', required=True, help='Output directory for the run files')

    def handle(self, *args, **options):
        try:
            config = load_sim_config(read_json(options['config']))
        except ValidationError as exc:
            raise CommandError(f"Invalid configuration {options['config']}: {describe(exc)}")

        self.stdout.write(
            f'Simulating n={config.n} chi={config.chi} N={config.N} up to t={config.t_end} '
            f'({config.u0.family} initial data)'
        )
        try:
            result = run(config)
        except ValidationError as exc:
            raise CommandError(f"Invalid initial data: {describe(exc)}")
        except Exception as exc:
            logger.exception('Simulation failed')
            raise CommandError(f'Simulation failed: {exc}', returncode=2)

        try:
            out_dir = write_run(result, options['out'], settings.RADIAL_KS['BOUNDED_RATIO'])
        except (OSError, NonFiniteOutput) as exc:
            raise CommandError(f"Could not write {options['out']}: {exc}", returncode=2)

        classification = result.classification
        style = self.style.SUCCESS if classification.label == 'GlobalBounded' else self.style.WARNING
        self.stdout.write(f'  Termination: {result.termination} at t={result.final_state.t:.6g}')
        self.stdout.write(f'  Steps: {result.steps} ({result.rejected_steps} rejected), '
                          f'{len(result.records)} samples, {result.wall_clock:.2f}s')
        self.stdout.write(style(f'  {classification.label}: {classification.reason}'))
        self.stdout.write(self.style.SUCCESS(f'✓ Wrote run files to {out_dir}'))
