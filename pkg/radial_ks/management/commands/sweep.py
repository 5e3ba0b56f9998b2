"""
Management command to classify runs over a grid of (chi, mass) pairs.

Usage:
    python manage.py sweep --config configs/sweep_n1.json --out runs/sweep_n1.csv
    python manage.py sweep --config configs/sweep_n2.json --out runs/sweep_n2.csv --workers 4
"""
import logging

from django.core.exceptions import ValidationError
from django.core.management.base import BaseCommand, CommandError

from radial_ks.csv_io import NonFiniteOutput, write_frame
from radial_ks.driver import sweep
from radial_ks.forms import describe, load_sweep_spec, read_json

logger = logging.getLogger(__name__)


class Command(BaseCommand):
    help = 'Run and classify a (chi, mass) parameter sweep'

    def add_arguments(self, parser):
        parser.add_argument('--config', required=True, help='Path to the JSON sweep configuration')
        parser.add_argument('--out', required=True, help='Output CSV file')
        parser.add_argument('--workers', type=int, default=None,
                            help='Worker processes (default: RADIAL_KS["WORKERS"])')

    def handle(self, *args, **options):
        if options['workers'] is not None and options['workers'] < 1:
            raise CommandError(f"--workers must be >= 1, got {options['workers']}")
        try:
            spec = load_sweep_spec(read_json(options['config']))
        except ValidationError as exc:
            raise CommandError(f"Invalid sweep configuration {options['config']}: {describe(exc)}")

        pairs = spec.pairs()
        self.stdout.write(f'Sweeping n={spec.n}: {len(spec.chis)} chi value(s), {len(pairs)} run(s)')
        try:
            table = sweep(spec, workers=options['workers'])
            write_frame(table, options['out'], allow_inf=('m_c',))
        except (OSError, NonFiniteOutput) as exc:
            raise CommandError(f"Could not write {options['out']}: {exc}", returncode=2)

        for row in table.itertuples():
            line = f'  chi={row.chi:<8g} mass={row.mass:<12.6g} {row.classification:<16} ratio={row.peak_ratio:.4g}'
            if row.expected and row.expected != row.classification:
                self.stdout.write(self.style.WARNING(f'{line}  (expected {row.expected})'))
            else:
                self.stdout.write(line)
        self.stdout.write(self.style.SUCCESS(f"✓ Wrote {len(table)} rows to {options['out']}"))
