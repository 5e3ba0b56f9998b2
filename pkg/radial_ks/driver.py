"""
Run classification, (chi, m) parameter sweeps and the command-line entry point.

Blow-up of the system is equivalent to the sup norm of u escaping, so the
only signal used to label a run is the recorded max u series together with
the reason the integration stopped.
"""
import logging
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Any, Dict, List, Optional, Sequence, Tuple

import django
import numpy as np
import pandas as pd
from django.conf import settings
from django.core.exceptions import ValidationError
from django.core.management import call_command
from django.core.management.base import CommandError
from django.db import models

from .diagnostics import critical_mass, lambda_factor
from .dynamics import SimConfig, Termination, run
from .initial_data import InitialDataSpec

logger = logging.getLogger(__name__)

SUBCOMMANDS = ('simulate', 'sweep', 'verify', 'report')

SWEEP_COLUMNS = [
    'n', 'chi', 'mass', 'm_c', 'classification', 'peak_ratio', 't_final',
    'termination', 'chi_lambda', 'expected', 'reason',
]


class Label(models.TextChoices):
    GLOBAL_BOUNDED = 'GlobalBounded', 'global and bounded'
    GROWTH_SUSPECTED = 'GrowthSuspected', 'unbounded growth suspected'
    INCONCLUSIVE = 'Inconclusive', 'inconclusive'


@dataclass(frozen=True)
class RunSummary:
    """What classify needs from a finished run."""
    termination: str
    times: Tuple[float, ...]
    max_u: Tuple[float, ...]
    max_u0: float
    t_end: float
    blowup_factor: float
    bounded_ratio: float


@dataclass(frozen=True)
class Classification:
    label: str
    reason: str
    peak_ratio: float
    t_final: float

    def as_dict(self) -> Dict[str, Any]:
        return {
            'label': str(self.label),
            'reason': self.reason,
            'peak_ratio': self.peak_ratio,
            't_final': self.t_final,
        }


def summarize(records, termination: str, max_u0: float, config,
              bounded_ratio: Optional[float] = None) -> RunSummary:
    if bounded_ratio is None:
        bounded_ratio = settings.RADIAL_KS['BOUNDED_RATIO']
    return RunSummary(
        termination=str(termination),
        times=tuple(float(r.t) for r in records),
        max_u=tuple(float(r.max_u) for r in records),
        max_u0=float(max_u0),
        t_end=float(config.t_end),
        blowup_factor=float(config.blowup_factor),
        bounded_ratio=float(bounded_ratio),
    )


def _increasing_tail(values: Sequence[float]) -> bool:
    """max u strictly increasing over the final quarter of samples (at least two)."""
    size = max(2, math.ceil(0.25 * len(values)))
    tail = np.asarray(values[-size:], dtype=float)
    return len(tail) >= 2 and bool(np.all(np.diff(tail) > 0))


def classify(summary: RunSummary) -> Classification:
    """
    GrowthSuspected when max u crossed the blow-up threshold, or the step
    underflowed while max u was strictly increasing over the last quarter of
    samples. GlobalBounded when t_end was reached with peak / initial max u at
    most bounded_ratio. Inconclusive otherwise.
    """
    peak = max(summary.max_u) if summary.max_u else summary.max_u0
    ratio = peak / summary.max_u0
    t_final = summary.times[-1] if summary.times else 0.0

    if summary.termination == Termination.BLOWUP_THRESHOLD or ratio > summary.blowup_factor:
        label, reason = Label.GROWTH_SUSPECTED, (
            f'max u reached {ratio:.6g} x initial max (threshold {summary.blowup_factor:g})'
        )
    elif summary.termination == Termination.DT_UNDERFLOW and _increasing_tail(summary.max_u):
        label, reason = Label.GROWTH_SUSPECTED, (
            f'time step underflowed at t={t_final:.6g} while max u was still increasing'
        )
    elif summary.termination == Termination.T_END and ratio <= summary.bounded_ratio:
        label, reason = Label.GLOBAL_BOUNDED, (
            f'reached t_end={summary.t_end:g} with peak ratio {ratio:.6g} <= {summary.bounded_ratio:g}'
        )
    elif summary.termination == Termination.T_END:
        label, reason = Label.INCONCLUSIVE, (
            f'reached t_end={summary.t_end:g} but peak ratio {ratio:.6g} exceeds {summary.bounded_ratio:g}'
        )
    else:
        label, reason = Label.INCONCLUSIVE, (
            f'stopped at t={t_final:.6g} ({summary.termination}) without a growth signal'
        )
    return Classification(label=label, reason=reason, peak_ratio=ratio, t_final=t_final)


# Sweeps ---------------------------------------------------------------------

@dataclass(frozen=True)
class SweepSpec:
    """
    A grid of runs over chi and mass sharing one geometry and initial shape.

    Masses are either absolute (masses) or multiples of the critical mass
    (mc_fractions, one-dimensional with chi > 1 only).
    """
    n: int
    chis: Tuple[float, ...]
    R: float
    N: int
    t_end: float
    u0: InitialDataSpec = field(default_factory=InitialDataSpec)
    masses: Tuple[float, ...] = ()
    mc_fractions: Tuple[float, ...] = ()
    cfl: float = 0.4
    blowup_factor: float = 1e3
    dt_min: float = 1e-12
    sample_stride: int = 200
    max_retries: int = 20

    def __post_init__(self):
        errors = {}
        if not self.chis:
            errors['chis'] = 'chi list must not be empty'
        elif any(not chi > 0 for chi in self.chis):
            errors['chis'] = f'every chi must be > 0, got {list(self.chis)}'
        if bool(self.masses) == bool(self.mc_fractions):
            errors['masses'] = 'give exactly one non-empty list of masses or mc_fractions'
        elif any(not m > 0 for m in self.masses + self.mc_fractions):
            errors['masses'] = 'every mass and mass fraction must be > 0'
        elif self.mc_fractions:
            if self.n != 1:
                errors['mc_fractions'] = 'mc_fractions are only meaningful for n = 1'
            elif any(not math.isfinite(critical_mass(chi)) for chi in self.chis if chi > 0):
                errors['mc_fractions'] = 'mc_fractions need every chi > 1 (finite critical mass)'
        if errors:
            raise ValidationError(errors)

    def pairs(self) -> List[Tuple[float, float]]:
        """(chi, mass) in deterministic order: chi outer, mass inner."""
        result = []
        for chi in self.chis:
            if self.masses:
                result.extend((chi, m) for m in self.masses)
            else:
                m_c = critical_mass(chi)
                result.extend((chi, fraction * m_c) for fraction in self.mc_fractions)
        return result

    def configs(self):
        return [
            SimConfig(
                n=self.n, R=self.R, N=self.N, chi=chi, u0=replace(self.u0, mass=m),
                t_end=self.t_end, cfl=self.cfl, blowup_factor=self.blowup_factor,
                dt_min=self.dt_min, sample_stride=self.sample_stride, max_retries=self.max_retries,
            )
            for chi, m in self.pairs()
        ]


def expected_label(n: int, chi: float, m: float) -> str:
    """The label global existence theory predicts, or '' where it says nothing."""
    if n >= 2 and chi < 1:
        return str(Label.GLOBAL_BOUNDED)
    if n == 1 and m < critical_mass(chi):
        return str(Label.GLOBAL_BOUNDED)
    return ''


def _sweep_row(config) -> Dict[str, Any]:
    """Run one configuration in a worker; failures become Inconclusive rows."""
    m = config.u0.mass
    row = {
        'n': config.n,
        'chi': config.chi,
        'mass': m,
        'm_c': critical_mass(config.chi),
        'chi_lambda': config.chi * lambda_factor(config.n, m),
        'expected': expected_label(config.n, config.chi, m),
    }
    try:
        result = run(config)
    except Exception as exc:
        logger.exception(f"Sweep run chi={config.chi} mass={m} failed")
        row.update(classification=str(Label.INCONCLUSIVE), peak_ratio=0.0,
                   t_final=0.0, termination='error', reason=f'run failed: {exc}')
        return row
    row.update(
        classification=str(result.classification.label),
        peak_ratio=result.classification.peak_ratio,
        t_final=result.classification.t_final,
        termination=result.termination,
        reason=result.classification.reason,
    )
    return row


def _init_worker():
    os.environ.setdefault('DJANGO_SETTINGS_MODULE', 'chemotaxis_lab.settings')
    django.setup()


def sweep(spec: SweepSpec, workers: Optional[int] = None) -> pd.DataFrame:
    """
    One classified run per (chi, m) pair. Runs execute in a process pool;
    rows come back in the order of spec.pairs() whatever the completion order.
    """
    configs = spec.configs()
    if workers is None:
        workers = settings.RADIAL_KS['WORKERS']
    workers = max(1, min(int(workers), len(configs)))
    logger.info(f"Sweep n={spec.n}: {len(configs)} runs on {workers} worker(s)")

    if workers == 1:
        rows = [_sweep_row(config) for config in configs]
    else:
        with ProcessPoolExecutor(max_workers=workers, initializer=_init_worker) as executor:
            rows = list(executor.map(_sweep_row, configs))

    frame = pd.DataFrame(rows, columns=SWEEP_COLUMNS)
    for label, count in frame['classification'].value_counts().items():
        logger.info(f"Sweep result: {count} x {label}")
    return frame


# CLI ------------------------------------------------------------------------

USAGE = (
    'usage: python -m radial_ks {simulate,sweep,verify,report} [options]\n'
    '  simulate --config FILE --out DIR\n'
    '  sweep    --config FILE --out FILE.csv [--workers K]\n'
    '  verify   --levels K --out FILE.csv\n'
    '  report   --run DIR\n'
)


def run_cli(argv: Optional[Sequence[str]] = None) -> int:
    """Dispatch to a management command; 0 on success, 1 on usage or validation errors, 2 otherwise."""
    os.environ.setdefault('DJANGO_SETTINGS_MODULE', 'chemotaxis_lab.settings')
    django.setup()

    args = list(sys.argv[1:] if argv is None else argv)
    if not args or args[0] not in SUBCOMMANDS:
        sys.stderr.write(USAGE)
        if args:
            sys.stderr.write(f'unknown command: {args[0]}\n')
        return 1

    try:
        call_command(*args)
    except CommandError as exc:
        sys.stderr.write(f'Error: {exc}\n')
        return exc.returncode
    except Exception as exc:
        logger.exception(f"Command {args[0]} failed")
        sys.stderr.write(f'Internal error: {exc}\n')
        return 2
    return 0
