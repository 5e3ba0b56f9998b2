"""
Linearized operators acting on u_r and on z = u_t / u, and their residual checks.

Differentiating the expanded u-equation in r gives a linear parabolic
equation for u_r,

    d/dt u_r = A1 u_rrr + A2 u_rr + A3 u_r + A4,

which can also be grouped with the coefficients (A1, A2, At3, At4). The ratio
z = u_t / u solves

    d/dt z = B1 z_rr + B21 z_r + (B22 / r) z_r + B3 z + B4.

The coefficient builders below are literal transcriptions; residual_suite
measures how well simulated or manufactured fields satisfy each identity and
reports the convergence order under refinement.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from django.core.exceptions import ValidationError

from .chemo import reconstruct
from .dynamics import (
    SimState, advance, gradient, rhs_divergence, rhs_expanded,
    second_derivative, stable_dt, step,
)
from .grid import RadialGrid, make_grid
from .initial_data import InitialDataSpec

logger = logging.getLogger(__name__)

IDENTITIES = ('form_equivalence', 'ur_equation', 'ur_equation_regrouped', 'z_equation', 'z_time_difference')

# residuals below this are treated as exact zeros when estimating orders
ZERO_RESIDUAL = 1e-300


@dataclass(frozen=True, eq=False)
class OperatorCoeffs:
    A1: np.ndarray
    A2: np.ndarray
    A3: np.ndarray
    A4: np.ndarray
    At3: np.ndarray
    At4: np.ndarray
    B1: np.ndarray
    B21: np.ndarray
    B22: np.ndarray
    B3: np.ndarray
    B4: np.ndarray


def third_derivative(grid: RadialGrid, u) -> np.ndarray:
    """u_rrr at the centers by the five-point centered stencil with two reflected ghosts."""
    p = np.pad(grid.check_field(u), 2, mode='symmetric')
    return (p[4:] - 2.0 * p[3:-1] + 2.0 * p[1:-3] - p[:-4]) / (2.0 * grid.dr ** 3)


def _as_arrays(*values):
    return tuple(np.asarray(v, dtype=float) for v in values)


def parab_coeffs(u, u_r, u_rr, v_r, v_rr, mu: float, chi: float,
                 grid: RadialGrid) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Coefficients A1..A4 of the u_r-equation at the grid centers."""
    u, u_r, u_rr, v_r, v_rr = _as_arrays(u, u_r, u_rr, v_r, v_rr)
    n, r = grid.n, grid.centers
    W = np.hypot(u, u_r)
    V = 1.0 + v_r ** 2

    A1 = u ** 3 / W ** 3
    A2 = (
        3.0 * u ** 2 * u_r ** 3 / W ** 5
        - 3.0 * u ** 3 * u_r * u_rr / W ** 5
        + 4.0 * u ** 2 * u_r ** 3 / W ** 5
        + u_r ** 5 / W ** 5
        + (n - 1) / r * u ** 3 / W ** 3
        - chi * v_r / np.sqrt(V)
    )
    A3 = (
        -3.0 * u * u_r ** 4 / W ** 5
        - (n - 1) / r ** 2 * u / W
        - chi * mu / V ** 1.5
        + 2.0 * chi * u / V ** 1.5
        - chi * v_rr / np.sqrt(V)
        + chi * v_r ** 2 * v_rr / V ** 1.5
        - chi * (n - 1) / r * v_r ** 3 / V ** 1.5
    )
    A4 = (
        (n - 1) / r * u_r ** 4 / W ** 3
        + 3.0 * chi * mu * u * v_r * v_rr / V ** 2.5
        - 3.0 * chi * u ** 2 * v_r * v_rr / V ** 2.5
        + chi * (n - 1) / r ** 2 * u * v_r ** 3 / V ** 1.5
        - 3.0 * chi * (n - 1) / r * u * v_r ** 2 * v_rr / V ** 2.5
    )
    return A1, A2, A3, A4


def parab_coeffs_regrouped(u, u_r, v_r, v_rr, mu: float, chi: float,
                           grid: RadialGrid) -> Tuple[np.ndarray, np.ndarray]:
    """
    Coefficients At3, At4 of the second grouping, which moves the pure u_r
    powers out of A3 and A4 and pairs with the same A1, A2.
    """
    u, u_r, v_r, v_rr = _as_arrays(u, u_r, v_r, v_rr)
    n, r = grid.n, grid.centers
    W = np.hypot(u, u_r)
    V = 1.0 + v_r ** 2

    At3 = (
        (n - 1) / r * u_r ** 3 / W ** 3
        - chi * mu / V ** 1.5
        + 2.0 * chi * u / V ** 1.5
        - chi * v_rr / np.sqrt(V)
        + chi * v_r ** 2 * v_rr / V ** 1.5
        - chi * (n - 1) / r * v_r ** 3 / V ** 1.5
    )
    # the v_r^3 term carries 1/r^2 like its counterpart in A4
    At4 = (
        -3.0 * u * u_r ** 5 / W ** 5
        - (n - 1) / r ** 2 * u * u_r / W
        + 3.0 * chi * mu * u * v_r * v_rr / V ** 2.5
        - 3.0 * chi * u ** 2 * v_r * v_rr / V ** 2.5
        + chi * (n - 1) / r ** 2 * u * v_r ** 3 / V ** 1.5
        - 3.0 * chi * (n - 1) / r * u * v_r ** 2 * v_rr / V ** 2.5
    )
    return At3, At4


def z_coeffs(u, u_r, u_rr, v_r, v_rr, mu: float, chi: float, grid: RadialGrid):
    """Coefficients B1, B21, B22, B3, B4 of the z-equation."""
    u, u_r, u_rr, v_r, v_rr = _as_arrays(u, u_r, u_rr, v_r, v_rr)
    n, r = grid.n, grid.centers
    W = np.hypot(u, u_r)
    V = 1.0 + v_r ** 2
    gap = mu - u

    B1 = u ** 3 / W ** 3
    B21 = (
        2.0 * u ** 2 * u_r / W ** 3
        - 3.0 * u ** 3 * u_r * u_rr / W ** 5
        + 4.0 * u_r ** 3 / W ** 3
        - 3.0 * u_r ** 5 / W ** 5
        - chi * v_r / np.sqrt(V)
    )
    B22 = (n - 1) * B1
    B3 = chi * u / V ** 1.5
    B4 = (
        -3.0 * chi * u * gap * u_r * v_r / (W * V ** 2.5)
        + 3.0 * chi ** 2 * u * gap * v_r ** 2 / V ** 3
        + chi * u_r ** 2 / (W * V ** 1.5)
        - chi ** 2 * u_r * v_r / V ** 2
        + 3.0 * chi * (n - 1) / r * u * u_r * v_r ** 2 / (W * V ** 2.5)
        - 3.0 * chi ** 2 * (n - 1) / r * u * v_r ** 3 / V ** 3
    )
    return B1, B21, B22, B3, B4


def z_from_formula(u, u_r, u_rr, v_r, mu: float, chi: float, grid: RadialGrid) -> np.ndarray:
    """z = u_t / u from its six-term spatial representation."""
    u, u_r, u_rr, v_r = _as_arrays(u, u_r, u_rr, v_r)
    n, r = grid.n, grid.centers
    W = np.hypot(u, u_r)
    V = 1.0 + v_r ** 2
    return (
        u ** 2 * u_rr / W ** 3
        + u_r ** 4 / (u * W ** 3)
        + (n - 1) / r * u_r / W
        - chi * u_r * v_r / (u * np.sqrt(V))
        - chi * (mu - u) / V ** 1.5
        - chi * (n - 1) / r * v_r ** 3 / V ** 1.5
    )


def operator_coeffs(grid: RadialGrid, u, chi: float) -> OperatorCoeffs:
    """Every coefficient field for a single cell-centered density."""
    u = grid.check_field(u)
    u_r = gradient(grid, u)
    u_rr = second_derivative(grid, u)
    chem = reconstruct(grid, u, chi)
    A1, A2, A3, A4 = parab_coeffs(u, u_r, u_rr, chem.vr, chem.vrr, chem.mu, chi, grid)
    At3, At4 = parab_coeffs_regrouped(u, u_r, chem.vr, chem.vrr, chem.mu, chi, grid)
    B1, B21, B22, B3, B4 = z_coeffs(u, u_r, u_rr, chem.vr, chem.vrr, chem.mu, chi, grid)
    return OperatorCoeffs(A1=A1, A2=A2, A3=A3, A4=A4, At3=At3, At4=At4,
                          B1=B1, B21=B21, B22=B22, B3=B3, B4=B4)


# Residuals ------------------------------------------------------------------

def _interior(grid: RadialGrid, exclude: int) -> slice:
    if exclude < 0 or 2 * exclude >= grid.N:
        raise ValidationError(f'cannot exclude {exclude} cells at each end of a {grid.N}-cell grid')
    return slice(exclude, grid.N - exclude)


def _z_field(grid: RadialGrid, u: np.ndarray, chi: float) -> np.ndarray:
    chem = reconstruct(grid, u, chi)
    return z_from_formula(u, gradient(grid, u), second_derivative(grid, u), chem.vr, chem.mu, chi, grid)


def form_equivalence_residual(grid: RadialGrid, state: SimState, chi: float, exclude: int = 2) -> float:
    """Interior max-norm gap between the conservative and the expanded right-hand sides."""
    inner = _interior(grid, exclude)
    gap = rhs_divergence(grid, state, chi) - rhs_expanded(grid, state, chi)
    return float(np.max(np.abs(gap[inner])))


def identity_residuals(grid: RadialGrid, snapshots: Sequence[SimState], chi: float,
                       exclude: int = 2) -> Dict[str, float]:
    """
    Interior max-norm residual of each identity over the interior snapshots.

    Time derivatives are second-order differences across the stored snapshots
    (np.gradient with the sample times), so the first and last snapshot only
    serve as stencil points.
    """
    if len(snapshots) < 3:
        raise ValidationError(f'need at least 3 snapshots for time differences, got {len(snapshots)}')
    times = np.array([s.t for s in snapshots])
    if np.any(np.diff(times) <= 0):
        raise ValidationError('snapshot times must be strictly increasing')
    for s in snapshots:
        if np.min(s.u) <= 0:
            raise ValidationError(f'snapshot at t={s.t:.6g} is not strictly positive')

    inner = _interior(grid, exclude)
    u_stack = np.array([s.u for s in snapshots])
    ur_stack = np.array([gradient(grid, s.u) for s in snapshots])
    z_stack = np.array([_z_field(grid, s.u, chi) for s in snapshots])
    u_t = np.gradient(u_stack, times, axis=0)
    ur_t = np.gradient(ur_stack, times, axis=0)
    z_t = np.gradient(z_stack, times, axis=0)

    worst = dict.fromkeys(IDENTITIES, 0.0)
    for k in range(1, len(snapshots) - 1):
        state = snapshots[k]
        u = state.u
        u_r = ur_stack[k]
        u_rr = second_derivative(grid, u)
        u_rrr = third_derivative(grid, u)
        chem = reconstruct(grid, u, chi)
        A1, A2, A3, A4 = parab_coeffs(u, u_r, u_rr, chem.vr, chem.vrr, chem.mu, chi, grid)
        At3, At4 = parab_coeffs_regrouped(u, u_r, chem.vr, chem.vrr, chem.mu, chi, grid)
        B1, B21, B22, B3, B4 = z_coeffs(u, u_r, u_rr, chem.vr, chem.vrr, chem.mu, chi, grid)

        z = z_stack[k]
        z_r = gradient(grid, z)
        z_rr = second_derivative(grid, z)

        residuals = {
            'form_equivalence': rhs_divergence(grid, state, chi) - rhs_expanded(grid, state, chi),
            'ur_equation': ur_t[k] - (A1 * u_rrr + A2 * u_rr + A3 * u_r + A4),
            'ur_equation_regrouped': ur_t[k] - (A1 * u_rrr + A2 * u_rr + At3 * u_r + At4),
            'z_equation': z_t[k] - (B1 * z_rr + B21 * z_r + B22 / grid.centers * z_r + B3 * z + B4),
            'z_time_difference': u_t[k] / u - z,
        }
        for name, values in residuals.items():
            worst[name] = max(worst[name], float(np.max(np.abs(values[inner]))))
    return worst


@dataclass
class ResidualLevel:
    N: int
    dt: float
    residuals: Dict[str, float]


@dataclass
class ResidualReport:
    """Residuals per refinement level and the observed orders between successive levels."""
    levels: List[ResidualLevel] = field(default_factory=list)
    orders: Dict[str, List[Optional[float]]] = field(default_factory=dict)

    def min_order(self, identity: str) -> Optional[float]:
        finite = [o for o in self.orders.get(identity, []) if o is not None]
        return min(finite) if finite else None

    def to_frame(self) -> pd.DataFrame:
        rows = []
        for index, level in enumerate(self.levels):
            for identity, residual in level.residuals.items():
                order = self.orders[identity][index - 1] if index > 0 and identity in self.orders else None
                rows.append({
                    'identity': identity,
                    'N': level.N,
                    'dt': level.dt,
                    'residual': residual,
                    'order': order,
                })
        return pd.DataFrame(rows, columns=['identity', 'N', 'dt', 'residual', 'order'])


def observed_order(coarse: float, fine: float, ratio: float) -> Optional[float]:
    """log(coarse / fine) / log(ratio); None when either residual is an exact zero."""
    if coarse <= ZERO_RESIDUAL or fine <= ZERO_RESIDUAL:
        return None
    return math.log(coarse / fine) / math.log(ratio)


def residual_suite(levels: Sequence[Tuple[RadialGrid, Sequence[SimState]]], chi: float,
                   exclude: int = 2, identities: Sequence[str] = IDENTITIES) -> ResidualReport:
    """
    Evaluate the identities on each refinement level (coarse to fine).

    A level is a grid with its snapshots; a single snapshot-free check is not
    possible because every identity but the form equivalence needs time
    differences. Orders are reported once two or more levels are present.
    """
    if not levels:
        raise ValidationError('residual_suite needs at least one refinement level')
    unknown = set(identities) - set(IDENTITIES)
    if unknown:
        raise ValidationError(f'unknown identities: {sorted(unknown)}')

    report = ResidualReport()
    for grid, snapshots in levels:
        computed = identity_residuals(grid, snapshots, chi, exclude)
        times = [s.t for s in snapshots]
        dt = float(np.min(np.diff(times)))
        report.levels.append(ResidualLevel(
            N=grid.N, dt=dt, residuals={name: computed[name] for name in identities},
        ))
        logger.debug(f"Residuals N={grid.N} dt={dt:.3e}: {report.levels[-1].residuals}")

    if len(report.levels) >= 2:
        for name in identities:
            report.orders[name] = [
                observed_order(coarse.residuals[name], fine.residuals[name], fine.N / coarse.N)
                for coarse, fine in zip(report.levels, report.levels[1:])
            ]
    for name, orders in report.orders.items():
        logger.info(f"Observed orders for {name}: {orders}")
    return report


def refinement_trajectories(n: int, chi: float, R: float, base_cells: int, levels: int,
                            u0: InitialDataSpec, t_star: float, cfl: float = 0.4,
                            step_factor: float = 0.1) -> List[Tuple[RadialGrid, List[SimState]]]:
    """
    Snapshot triples at t* - h, t*, t* + h on grids with base_cells * 2^k cells.

    h = step_factor * dr^2 (capped by the stable step at t* - h), so time and
    space errors shrink together under refinement.
    """
    if levels < 1:
        raise ValidationError(f'levels must be >= 1, got {levels}')
    trajectories = []
    for k in range(levels):
        grid = make_grid(n, R, base_cells * 2 ** k)
        h = step_factor * grid.dr ** 2
        if t_star <= h:
            raise ValidationError(f't_star {t_star} must exceed the snapshot spacing {h:.3e}')
        start = SimState.from_density(grid, 0.0, u0.build(grid))
        first = advance(grid, start, chi, t_star - h, cfl)
        h = min(h, stable_dt(grid, first, chi, cfl))
        middle = step(grid, first, chi, h)
        last = step(grid, middle, chi, h)
        trajectories.append((grid, [first, middle, last]))
        logger.debug(f"Refinement level N={grid.N}: snapshots at {[s.t for s in (first, middle, last)]}")
    return trajectories


def constant_trajectory(grid: RadialGrid, value: float, times: Sequence[float]) -> List[SimState]:
    """The steady state u = value sampled at the given times."""
    u = np.full(grid.N, float(value))
    return [SimState.from_density(grid, t, u) for t in times]


def manufactured_form_gaps(n: int, chi: float, R: float, cells: Sequence[int],
                           u0: InitialDataSpec, exclude: int = 2) -> ResidualReport:
    """
    Form-equivalence residual of a static smooth density on several grids.

    The field needs no time evolution, so this isolates the spatial order of
    the conservative scheme against the expanded form.
    """
    report = ResidualReport()
    for N in cells:
        grid = make_grid(n, R, N)
        state = SimState.from_density(grid, 0.0, u0.build(grid))
        report.levels.append(ResidualLevel(
            N=N, dt=0.0, residuals={'form_equivalence': form_equivalence_residual(grid, state, chi, exclude)},
        ))
    if len(report.levels) >= 2:
        report.orders['form_equivalence'] = [
            observed_order(c.residuals['form_equivalence'], f.residuals['form_equivalence'], f.N / c.N)
            for c, f in zip(report.levels, report.levels[1:])
        ]
    return report


def z_consistency(grid: RadialGrid, u, chi: float) -> float:
    """Max relative gap between u * z and the expanded rate."""
    u = grid.check_field(u)
    state = SimState.from_density(grid, 0.0, u)
    rate = rhs_expanded(grid, state, chi)
    gap = u * _z_field(grid, u, chi) - rate
    return float(np.max(np.abs(gap)) / max(1.0, float(np.max(np.abs(rate)))))
