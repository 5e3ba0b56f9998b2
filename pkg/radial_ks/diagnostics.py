"""
Scalar formulas and trajectory monitors.

The closed-form quantities (decay rate kappa, phi, the critical mass m_c and
the drift factor Lambda) sit next to the per-sample DiagnosticsRecord that a
run appends to its history, and the two checks of the L^p balance that are
evaluated from a finished history.
"""
import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Any, Dict, List, Sequence

import numpy as np
import pandas as pd
from django.core.exceptions import ValidationError

from .chemo import bound_violations, reconstruct
from .dynamics import SimState, gradient, second_derivative
from .grid import RadialGrid, mass
from .operators import z_from_formula

logger = logging.getLogger(__name__)

LP_EXPONENTS = (2, 4)
PHI_MAX = 2.0 / (3.0 * math.sqrt(3.0))
ENVELOPE_FACTOR = 0.999


# Closed forms -------------------------------------------------------------

def kappa(n: int, chi: float, mu: float) -> float:
    """Exponential decay rate of the lower envelope of u."""
    if n < 1:
        raise ValidationError(f'dimension must be >= 1, got {n}')
    return chi * mu + 2.0 * (n - 1) * chi * mu / (3.0 * math.sqrt(3.0) * n)


def phi(xi):
    """xi / (1 + xi)^(3/2); scalars stay scalars, arrays stay arrays."""
    values = np.asarray(xi, dtype=float)
    if np.any(values < 0) or np.any(np.isnan(values)):
        raise ValidationError('phi is only defined for xi >= 0')
    result = values / (1.0 + values) ** 1.5
    return float(result) if result.ndim == 0 else result


def critical_mass(chi: float) -> float:
    """m_c = 1/sqrt(chi^2 - 1) for chi > 1, infinite otherwise."""
    if chi <= 0:
        raise ValidationError(f'chi must be > 0, got {chi}')
    if chi <= 1:
        return math.inf
    return 1.0 / math.sqrt(chi ** 2 - 1.0)


def lambda_factor(n: int, m: float) -> float:
    """Lambda = m / sqrt(1 + m^2) in one dimension, 1 otherwise."""
    if n >= 2:
        return 1.0
    if not m > 0:
        raise ValidationError(f'mass must be > 0 in one dimension, got {m}')
    return m / math.sqrt(1.0 + m ** 2)


def gradient_gap_density(u, u_r, p: float) -> np.ndarray:
    """Pointwise u^(p-1) u_r^2 / W + u^p - u^(p-1) |u_r|, W = sqrt(u^2 + u_r^2)."""
    if p < 1:
        raise ValidationError(f'p must be >= 1, got {p}')
    u = np.asarray(u, dtype=float)
    u_r = np.asarray(u_r, dtype=float)
    weight = u ** (p - 1)
    return weight * u_r ** 2 / np.hypot(u, u_r) + u ** p - weight * np.abs(u_r)


def gradient_gap(grid: RadialGrid, u, u_r, p: float) -> float:
    """Integral of gradient_gap_density over the ball; nonnegative up to roundoff."""
    u = grid.check_field(u)
    if np.min(u) <= 0:
        raise ValidationError('gradient_gap needs a strictly positive density')
    return grid.integrate(gradient_gap_density(u, grid.check_field(u_r, 'u_r'), p))


# Records --------------------------------------------------------------------

@dataclass
class DiagnosticsRecord:
    t: float
    mass: float
    mu: float
    min_u: float
    max_u: float
    min_ur: float
    max_abs_ur: float
    max_z: float
    max_zplus_history: float
    lower_envelope: float
    lp2: float
    lp4: float
    dt: float
    ur_over_zplus_ratio: float
    chem_bound_excess: float
    # per exponent p: int u^p, int u^(p-1)|u_r|, int u^(p-1) u_r^2/W, int u^(p-1) u_r v_r/sqrt(1+v_r^2)
    power_integrals: Dict[int, float] = field(default_factory=dict)
    gradient_integrals: Dict[int, float] = field(default_factory=dict)
    dissipation_integrals: Dict[int, float] = field(default_factory=dict)
    drift_integrals: Dict[int, float] = field(default_factory=dict)

    def as_row(self) -> Dict[str, float]:
        row = {key: value for key, value in asdict(self).items() if not isinstance(value, dict)}
        for p in LP_EXPONENTS:
            row[f'int_u{p}'] = self.power_integrals[p]
            row[f'int_grad{p}'] = self.gradient_integrals[p]
            row[f'int_diss{p}'] = self.dissipation_integrals[p]
            row[f'int_drift{p}'] = self.drift_integrals[p]
        return row

    @classmethod
    def from_row(cls, row: Dict[str, Any]) -> 'DiagnosticsRecord':
        names = [name for name in cls.__dataclass_fields__ if not name.endswith('_integrals')]
        record = cls(**{name: float(row[name]) for name in names})
        for p in LP_EXPONENTS:
            record.power_integrals[p] = float(row[f'int_u{p}'])
            record.gradient_integrals[p] = float(row[f'int_grad{p}'])
            record.dissipation_integrals[p] = float(row[f'int_diss{p}'])
            record.drift_integrals[p] = float(row[f'int_drift{p}'])
        return record


@dataclass
class DiagnosticsHistory:
    """Append-only record list of one run plus the quantities fixed at t = 0."""
    min_u0: float
    max_u0: float
    initial_mass: float
    kappa: float
    max_zplus: float = 0.0
    records: List[DiagnosticsRecord] = field(default_factory=list)

    @classmethod
    def start(cls, grid: RadialGrid, state: SimState, chi: float) -> 'DiagnosticsHistory':
        return cls(
            min_u0=float(np.min(state.u)),
            max_u0=float(np.max(state.u)),
            initial_mass=mass(grid, state.u),
            kappa=kappa(grid.n, chi, state.mu),
        )

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame([r.as_row() for r in self.records])


def record(grid: RadialGrid, state: SimState, history: DiagnosticsHistory, chi: float,
           dt: float = 0.0) -> DiagnosticsRecord:
    """Evaluate every monitor at one state and append it to the history."""
    u = state.u
    u_r = gradient(grid, u)
    u_rr = second_derivative(grid, u)
    chem = reconstruct(grid, u, chi, u_r=u_r)
    z = z_from_formula(u, u_r, u_rr, chem.vr, chem.mu, chi, grid)

    history.max_zplus = max(history.max_zplus, float(np.max(z)), 0.0)
    max_abs_ur = float(np.max(np.abs(u_r)))
    norm = np.hypot(u, u_r)
    drift = u_r * chem.vr / np.sqrt(1.0 + chem.vr ** 2)

    powers, gradients, dissipations, drifts = {}, {}, {}, {}
    for p in LP_EXPONENTS:
        weight = u ** (p - 1)
        powers[p] = grid.integrate(u ** p)
        gradients[p] = grid.integrate(weight * np.abs(u_r))
        dissipations[p] = grid.integrate(weight * u_r ** 2 / norm)
        drifts[p] = grid.integrate(weight * drift)

    u_max = float(np.max(u))
    excess = max(bound_violations(grid, u, chem).values())
    if excess > 1e-12 * u_max:
        logger.warning(f"Chemoattractant bound exceeded by {excess:.3e} at t={state.t:.6g}")

    entry = DiagnosticsRecord(
        t=state.t,
        mass=mass(grid, u),
        mu=state.mu,
        min_u=float(np.min(u)),
        max_u=u_max,
        min_ur=float(np.min(u_r)),
        max_abs_ur=max_abs_ur,
        max_z=float(np.max(z)),
        max_zplus_history=history.max_zplus,
        lower_envelope=history.min_u0 * math.exp(-history.kappa * state.t),
        lp2=powers[2] ** 0.5,
        lp4=powers[4] ** 0.25,
        dt=float(dt),
        ur_over_zplus_ratio=max_abs_ur / (1.0 + history.max_zplus),
        chem_bound_excess=excess,
        power_integrals=powers,
        gradient_integrals=gradients,
        dissipation_integrals=dissipations,
        drift_integrals=drifts,
    )
    history.records.append(entry)
    logger.debug(
        f"t={entry.t:.6g} max_u={entry.max_u:.6g} min_u={entry.min_u:.6g} "
        f"max_z={entry.max_z:.4g} ratio={entry.ur_over_zplus_ratio:.4g}"
    )
    return entry


# L^p balance checks -----------------------------------------------------------

def _time_series(records: Sequence[DiagnosticsRecord], p: int):
    if p not in LP_EXPONENTS:
        raise ValidationError(f'p must be one of {LP_EXPONENTS}, got {p}')
    if len(records) < 3:
        raise ValidationError(f'need at least 3 samples, got {len(records)}')
    times = np.array([r.t for r in records])
    if np.any(np.diff(times) <= 0):
        raise ValidationError('sample times must be strictly increasing')
    power = np.array([r.power_integrals[p] for r in records])
    return times, power, np.gradient(power, times)


def lp_ode_residual(records: Sequence[DiagnosticsRecord], p: int, chi: float,
                    Lambda: float) -> pd.Series:
    """
    Slack of the differential inequality

        d/dt I + I + p(p-1)(1 - chi Lambda) int u^(p-1)|u_r| <= p^2 I,   I = int u^p,

    at every interior sample. Nonnegative values mean the inequality holds.
    """
    if chi * Lambda >= 1:
        raise ValidationError(f'chi * Lambda = {chi * Lambda:.6g} >= 1; the inequality is not available')
    times, power, rate = _time_series(records, p)
    grad = np.array([r.gradient_integrals[p] for r in records])
    residual = p ** 2 * power - (rate + power + p * (p - 1) * (1.0 - chi * Lambda) * grad)
    return pd.Series(residual[1:-1], index=pd.Index(times[1:-1], name='t'), name=f'lp{p}_ode_residual')


def lp_ode_tolerance(records: Sequence[DiagnosticsRecord], p: int) -> pd.Series:
    """1e-6 p^2 int u^p at the interior samples."""
    times = np.array([r.t for r in records])
    power = np.array([r.power_integrals[p] for r in records])
    return pd.Series(1e-6 * p ** 2 * power[1:-1], index=pd.Index(times[1:-1], name='t'))


def energy_identity_residual(records: Sequence[DiagnosticsRecord], p: int, chi: float) -> pd.Series:
    """
    Defect of the exact balance

        d/dt int u^p + p(p-1) int u^(p-1) u_r^2 / W = p(p-1) chi int u^(p-1) u_r v_r / sqrt(1+v_r^2)

    at every interior sample; it shrinks with the sample spacing and dr.
    """
    times, _, rate = _time_series(records, p)
    dissipation = np.array([r.dissipation_integrals[p] for r in records])
    drift = np.array([r.drift_integrals[p] for r in records])
    residual = rate + p * (p - 1) * dissipation - p * (p - 1) * chi * drift
    return pd.Series(residual[1:-1], index=pd.Index(times[1:-1], name='t'), name=f'lp{p}_energy_residual')


def envelope_violations(records: Sequence[DiagnosticsRecord]) -> List[DiagnosticsRecord]:
    """Samples where min u dropped below ENVELOPE_FACTOR times the lower envelope."""
    return [r for r in records if r.min_u < ENVELOPE_FACTOR * r.lower_envelope]
