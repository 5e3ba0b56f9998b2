"""
Management command to summarize a stored run.

Usage:
    python manage.py report --run runs/cosine_n2

Prints the stored classification and the final diagnostics, re-classifies
the run from diagnostics.csv and summary.json, and states whether the stored
label is reproduced.
"""
import logging
from pathlib import Path
from types import SimpleNamespace

from django.core.management.base import BaseCommand, CommandError

from radial_ks.csv_io import DIAGNOSTICS_FILE, SUMMARY_FILE, format_number, read_run
from radial_ks.diagnostics import envelope_violations
from radial_ks.driver import classify, summarize

logger = logging.getLogger(__name__)


class Command(BaseCommand):
    help = 'Print the summary of a stored run and re-check its classification'

    def add_arguments(self, parser):
        parser.add_argument('--run', required=True, help='Run directory written by simulate')

    def handle(self, *args, **options):
        run_dir = Path(options['run'])
        for name in (SUMMARY_FILE, DIAGNOSTICS_FILE):
            if not (run_dir / name).is_file():
                raise CommandError(f'File not found: {run_dir / name}')
        try:
            summary, records = read_run(run_dir)
            stored = summary['classification']
            config = summary['config']
            replay = classify(summarize(
                records, summary['termination'], summary['max_u0'],
                SimpleNamespace(t_end=config['t_end'], blowup_factor=config['blowup_factor']),
                bounded_ratio=summary['bounded_ratio'],
            ))
        except (KeyError, ValueError, TypeError) as exc:
            raise CommandError(f'Malformed run directory {run_dir}: {exc}')

        self.stdout.write(f'Run: {run_dir}')
        self.stdout.write(f"  n={config['n']} chi={config['chi']} N={config['N']} "
                          f"R={config['R']} t_end={config['t_end']}")
        self.stdout.write(f"  Initial data: {config['u0']}")
        self.stdout.write(f"  Termination: {summary['termination']} at t={format_number(summary['t_final'])}")
        self.stdout.write(f"  Steps: {summary['steps']} ({summary['rejected_steps']} rejected), "
                          f"{len(records)} samples")
        self.stdout.write(f"  Classification: {stored['label']} ({stored['reason']})")

        last = records[-1]
        self.stdout.write('  Final sample:')
        for name in ('mass', 'min_u', 'max_u', 'max_abs_ur', 'max_z', 'lower_envelope', 'lp2', 'lp4'):
            self.stdout.write(f'     {name:<16}{format_number(getattr(last, name))}')

        below = envelope_violations(records)
        if below:
            self.stdout.write(self.style.WARNING(
                f'  min u fell below the decay envelope at {len(below)} sample(s), first t={below[0].t:.6g}'
            ))

        if replay.as_dict() == stored:
            self.stdout.write(self.style.SUCCESS(f'✓ Re-classification reproduces {replay.label}'))
        else:
            raise CommandError(
                f"Re-classification gives {replay.label} but summary.json stores {stored['label']}"
            )
