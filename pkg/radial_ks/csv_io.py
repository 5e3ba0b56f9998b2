"""
Flat-file outputs of a run: diagnostics.csv, final_state.csv and summary.json,
plus the sweep and verification tables.

Floats are written with 17 significant digits so that stored output can be
re-read and re-classified without loss.
"""
import json
import logging
import math
from pathlib import Path
from typing import Any, Dict, Union

import numpy as np
import pandas as pd

from .chemo import reconstruct
from .diagnostics import DiagnosticsRecord
from .dynamics import RunResult, gradient

logger = logging.getLogger(__name__)

FLOAT_FORMAT = '%.17g'

DIAGNOSTICS_FILE = 'diagnostics.csv'
FINAL_STATE_FILE = 'final_state.csv'
SUMMARY_FILE = 'summary.json'

# documented order; the integral columns follow
DIAGNOSTIC_COLUMNS = [
    't', 'mass', 'mu', 'min_u', 'max_u', 'min_ur', 'max_abs_ur', 'max_z',
    'lower_envelope', 'lp2', 'lp4', 'dt',
    'max_zplus_history', 'ur_over_zplus_ratio', 'chem_bound_excess',
    'int_u2', 'int_grad2', 'int_diss2', 'int_drift2',
    'int_u4', 'int_grad4', 'int_diss4', 'int_drift4',
]


class NonFiniteOutput(ValueError):
    """A table about to be written contains NaN or Inf."""


def write_frame(frame: pd.DataFrame, path: Union[str, Path], allow_inf=(), optional=()) -> Path:
    """
    Write a table after checking every numeric cell is finite. Columns in
    allow_inf may hold inf; columns in optional may be left blank.
    """
    path = Path(path)
    for column in frame.select_dtypes(include=[np.number]).columns:
        values = frame[column].to_numpy(dtype=float)
        bad = np.isnan(values) if column in allow_inf else ~np.isfinite(values)
        if column in optional:
            bad &= ~np.isnan(values)
        if np.any(bad):
            raise NonFiniteOutput(f'column {column!r} of {path.name} contains non-finite values')
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT)
    logger.info(f"Wrote {len(frame)} rows to {path}")
    return path


def diagnostics_frame(records) -> pd.DataFrame:
    return pd.DataFrame([r.as_row() for r in records], columns=DIAGNOSTIC_COLUMNS)


def final_state_frame(result: RunResult) -> pd.DataFrame:
    grid, state = result.grid, result.final_state
    u_r = gradient(grid, state.u)
    chem = reconstruct(grid, state.u, result.config.chi, u_r=u_r)
    return pd.DataFrame({
        'r': grid.centers,
        'u': state.u,
        'u_r': u_r,
        'v_r': chem.vr,
        'v_rr': chem.vrr,
        'v_rt': chem.vrt,
    })


def summary_dict(result: RunResult, bounded_ratio: float) -> Dict[str, Any]:
    return {
        'classification': result.classification.as_dict(),
        'termination': result.termination,
        't_final': result.final_state.t,
        'max_u0': result.max_u0,
        'bounded_ratio': bounded_ratio,
        'steps': result.steps,
        'rejected_steps': result.rejected_steps,
        'wall_clock': result.wall_clock,
        'samples': len(result.records),
        'config': result.config.as_dict(),
    }


def write_run(result: RunResult, out_dir: Union[str, Path], bounded_ratio: float) -> Path:
    """Write the three run files into out_dir."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_frame(diagnostics_frame(result.records), out_dir / DIAGNOSTICS_FILE)
    write_frame(final_state_frame(result), out_dir / FINAL_STATE_FILE)
    with open(out_dir / SUMMARY_FILE, 'w', encoding='utf-8') as handle:
        json.dump(summary_dict(result, bounded_ratio), handle, indent=2, allow_nan=False)
    return out_dir


def read_run(run_dir: Union[str, Path]):
    """Load summary.json and the diagnostics records of a stored run."""
    run_dir = Path(run_dir)
    with open(run_dir / SUMMARY_FILE, 'r', encoding='utf-8') as handle:
        summary = json.load(handle)
    frame = pd.read_csv(run_dir / DIAGNOSTICS_FILE)
    records = [DiagnosticsRecord.from_row(row) for row in frame.to_dict('records')]
    return summary, records


def format_number(value) -> str:
    if isinstance(value, float) and math.isinf(value):
        return 'inf'
    return f'{value:.6g}' if isinstance(value, float) else str(value)
