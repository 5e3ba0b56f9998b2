"""
Time evolution of the density u.

The conservative radial form

    u_t = r^(1-n) (r^(n-1) F)_r,
    F   = u u_r / sqrt(u^2 + u_r^2) - chi u v_r / sqrt(1 + v_r^2),

is discretized by finite volumes with zero flux at r = 0 and r = R and
advanced with an explicit two-stage Runge-Kutta (midpoint) method under an
adaptive stability limit. The expanded non-divergence right-hand side is
provided for cross-validation of the two forms.
"""
import logging
import time
from dataclasses import dataclass, field, replace
from typing import List, Optional, Tuple

import numpy as np
from django.db import models

from .chemo import ChemFields, compute_mu, reconstruct
from .grid import RadialGrid, make_grid, mass
from .initial_data import InitialDataSpec

logger = logging.getLogger(__name__)

EPSILON = 1e-300


class SimulationEvent(Exception):
    """Base class for events that interrupt a step."""


class PositivityLoss(SimulationEvent):
    """A stage produced u_i <= 0."""


class TimestepUnderflow(SimulationEvent):
    """The stability limit fell below dt_min."""

    def __init__(self, dt: float, dt_min: float):
        super().__init__(f'stable time step {dt:.3e} below dt_min {dt_min:.3e}')
        self.dt = dt
        self.dt_min = dt_min


class NonFiniteState(SimulationEvent):
    """NaN or Inf appeared in a rate or a state."""


class Termination(models.TextChoices):
    T_END = 't_end', 'reached t_end'
    BLOWUP_THRESHOLD = 'blowup_threshold', 'max u crossed the blow-up threshold'
    DT_UNDERFLOW = 'dt_underflow', 'stable time step underflowed'
    POSITIVITY_LOSS = 'positivity_loss', 'positivity lost after all retries'
    NON_FINITE = 'non_finite', 'non-finite values in the state'


@dataclass(frozen=True)
class SimConfig:
    n: int
    R: float
    N: int
    chi: float
    u0: InitialDataSpec
    t_end: float
    cfl: float = 0.4
    blowup_factor: float = 1e3
    dt_min: float = 1e-12
    sample_stride: int = 200
    max_retries: int = 20

    def as_dict(self):
        return {
            'n': self.n, 'R': self.R, 'N': self.N, 'chi': self.chi,
            't_end': self.t_end, 'cfl': self.cfl, 'blowup_factor': self.blowup_factor,
            'dt_min': self.dt_min, 'sample_stride': self.sample_stride,
            'max_retries': self.max_retries, 'u0': self.u0.as_dict(),
        }


@dataclass(frozen=True, eq=False)
class SimState:
    """Cell-centered density at time t with its cached mean."""
    t: float
    u: np.ndarray
    mu: float

    @classmethod
    def from_density(cls, grid: RadialGrid, t: float, u) -> 'SimState':
        u = grid.check_field(u).copy()
        return cls(t=float(t), u=u, mu=compute_mu(grid, u))


@dataclass(eq=False)
class RunResult:
    classification: object
    final_state: SimState
    records: List[object]
    termination: str
    grid: RadialGrid
    config: SimConfig
    steps: int = 0
    rejected_steps: int = 0
    wall_clock: float = 0.0
    max_u0: float = field(default=0.0)


# Stencils ---------------------------------------------------------------

def gradient(grid: RadialGrid, u) -> np.ndarray:
    """
    u_r at the centers by centered differences.

    Ghost cells are even reflections across r = 0 and r = R, which makes
    u_r = 0 at both ends (radial symmetry and the Neumann condition).
    """
    padded = np.pad(grid.check_field(u), 1, mode='symmetric')
    return (padded[2:] - padded[:-2]) / (2.0 * grid.dr)


def second_derivative(grid: RadialGrid, u) -> np.ndarray:
    """u_rr at the centers by the three-point stencil with reflected ghosts."""
    padded = np.pad(grid.check_field(u), 1, mode='symmetric')
    return (padded[2:] - 2.0 * padded[1:-1] + padded[:-2]) / grid.dr ** 2


# Fluxes and rates ---------------------------------------------------------

def total_flux(u, u_r, v_r, chi: float):
    """
    Flux density F = u u_r / sqrt(u^2 + u_r^2) - chi u v_r / sqrt(1 + v_r^2).

    The diffusive quotient is continued by 0 where u = u_r = 0.
    """
    u = np.asarray(u, dtype=float)
    u_r = np.asarray(u_r, dtype=float)
    v_r = np.asarray(v_r, dtype=float)
    norm = np.hypot(u, u_r)
    diffusive = np.divide(u * u_r, norm, out=np.zeros(np.broadcast(u, u_r).shape), where=norm > 0)
    return diffusive - chi * u * v_r / np.sqrt(1.0 + v_r ** 2)


def face_fluxes(grid: RadialGrid, u: np.ndarray, chi: float, chem: ChemFields) -> np.ndarray:
    """F at all N+1 faces; zero at r = 0 and r = R."""
    fluxes = np.zeros(grid.N + 1)
    u_face = 0.5 * (u[:-1] + u[1:])
    ur_face = np.diff(u) / grid.dr
    fluxes[1:-1] = total_flux(u_face, ur_face, chem.vr_faces[1:-1], chi)
    return fluxes


def rhs_divergence(grid: RadialGrid, state: SimState, chi: float) -> np.ndarray:
    """Finite-volume du/dt; the sum of (du/dt)_i |cell_i| telescopes to zero."""
    u = state.u
    chem = reconstruct(grid, u, chi)
    weighted = grid.omega_n * grid.faces ** (grid.n - 1) * face_fluxes(grid, u, chi, chem)
    rate = np.diff(weighted) / grid.cell_measures
    if not np.all(np.isfinite(rate)):
        raise NonFiniteState(f'non-finite rate at t={state.t:.6g}')
    return rate


def expanded_rate(u, u_r, u_rr, v_r, mu: float, chi: float, n: int, r):
    """Pointwise non-divergence form of the u-equation."""
    u, u_r, u_rr, v_r, r = (np.asarray(x, dtype=float) for x in (u, u_r, u_rr, v_r, r))
    norm = np.hypot(u, u_r)
    drift = 1.0 + v_r ** 2
    return (
        u ** 3 * u_rr / norm ** 3
        + u_r ** 4 / norm ** 3
        + (n - 1) / r * u * u_r / norm
        - chi * u_r * v_r / np.sqrt(drift)
        - chi * u * (mu - u) / drift ** 1.5
        - chi * (n - 1) / r * u * v_r ** 3 / drift ** 1.5
    )


def rhs_expanded(grid: RadialGrid, state: SimState, chi: float) -> np.ndarray:
    """du/dt from the expanded form, evaluated at the centers."""
    u = state.u
    chem = reconstruct(grid, u, chi)
    return expanded_rate(
        u, gradient(grid, u), second_derivative(grid, u), chem.vr, chem.mu, chi, grid.n, grid.centers,
    )


# Time stepping ------------------------------------------------------------

def stable_dt(grid: RadialGrid, state: SimState, chi: float, cfl: float,
              dt_min: Optional[float] = None) -> float:
    """
    Explicit stability limit

        dt = cfl * min(dr^2 / (2 max A1), dr / max |w|),

    with A1 = u^3 / sqrt(u^2 + u_r^2)^3 the effective diffusivity and
    w = chi v_r / sqrt(1 + v_r^2) the chemotactic transport speed.
    """
    u = state.u
    u_r = gradient(grid, u)
    norm = np.hypot(u, u_r)
    a1 = (u / norm) ** 3
    chem = reconstruct(grid, u, chi)
    speed = np.abs(chi * chem.vr / np.sqrt(1.0 + chem.vr ** 2))

    dt = cfl * min(
        grid.dr ** 2 / (2.0 * float(np.max(a1)) + EPSILON),
        grid.dr / (float(np.max(speed)) + EPSILON),
    )
    if dt_min is not None and dt < dt_min:
        raise TimestepUnderflow(dt, dt_min)
    return dt


def _require_admissible(u: np.ndarray, t: float):
    if not np.all(np.isfinite(u)):
        raise NonFiniteState(f'non-finite density at t={t:.6g}')
    if np.min(u) <= 0:
        raise PositivityLoss(f'min u = {np.min(u):.3e} at t={t:.6g}')


def step(grid: RadialGrid, state: SimState, chi: float, dt: float) -> SimState:
    """One explicit midpoint step; the chemoattractant is rebuilt at each stage."""
    k1 = rhs_divergence(grid, state, chi)
    half = state.u + 0.5 * dt * k1
    _require_admissible(half, state.t + 0.5 * dt)

    k2 = rhs_divergence(grid, SimState.from_density(grid, state.t + 0.5 * dt, half), chi)
    advanced = state.u + dt * k2
    _require_admissible(advanced, state.t + dt)
    return SimState.from_density(grid, state.t + dt, advanced)


def guarded_step(grid: RadialGrid, state: SimState, chi: float, dt: float,
                 max_retries: int = 20) -> Tuple[SimState, float, int]:
    """
    Step with reject-and-halve on positivity loss.

    Returns the new state, the dt actually taken and the number of rejected
    attempts; raises PositivityLoss once max_retries halvings have failed.
    """
    for attempt in range(max_retries + 1):
        try:
            return step(grid, state, chi, dt), dt, attempt
        except PositivityLoss as exc:
            logger.warning(f"Rejected step dt={dt:.3e} at t={state.t:.6g}: {exc}")
            dt *= 0.5
    raise PositivityLoss(f'positivity not restored after {max_retries} halvings at t={state.t:.6g}')


def advance(grid: RadialGrid, state: SimState, chi: float, t_target: float,
            cfl: float, max_step: Optional[float] = None) -> SimState:
    """Integrate to exactly t_target, clipping the final step."""
    while state.t < t_target:
        dt = stable_dt(grid, state, chi, cfl)
        if max_step is not None:
            dt = min(dt, max_step)
        clipped = dt >= t_target - state.t
        dt = min(dt, t_target - state.t)
        state, taken, _ = guarded_step(grid, state, chi, dt)
        if clipped and taken == dt:
            state = replace(state, t=t_target)
    return state


def run(config: SimConfig) -> RunResult:
    """
    Integrate one configuration until t_end, the blow-up threshold, a time
    step underflow or an unrecoverable event, sampling diagnostics every
    sample_stride steps. The label comes from driver.classify.
    """
    from .diagnostics import DiagnosticsHistory, record
    from .driver import classify, summarize

    grid = make_grid(config.n, config.R, config.N)
    u0 = config.u0.build(grid)
    state = SimState.from_density(grid, 0.0, u0)
    max_u0 = float(np.max(u0))
    threshold = config.blowup_factor * max_u0
    history = DiagnosticsHistory.start(grid, state, config.chi)

    logger.info(
        f"Run start: n={config.n} chi={config.chi} N={config.N} t_end={config.t_end} "
        f"mass={mass(grid, u0):.6g} max_u0={max_u0:.6g}"
    )
    started = time.perf_counter()
    record(grid, state, history, config.chi, dt=0.0)

    steps = 0
    rejected = 0
    dt = 0.0
    termination = Termination.T_END
    while state.t < config.t_end:
        try:
            dt = stable_dt(grid, state, config.chi, config.cfl, config.dt_min)
            clipped = dt >= config.t_end - state.t
            planned = min(dt, config.t_end - state.t)
            state, dt, retries = guarded_step(grid, state, config.chi, planned, config.max_retries)
            if clipped and dt == planned:
                state = replace(state, t=config.t_end)
        except TimestepUnderflow as exc:
            logger.warning(f"Run stopped: {exc}")
            termination = Termination.DT_UNDERFLOW
            break
        except PositivityLoss as exc:
            logger.warning(f"Run stopped: {exc}")
            termination = Termination.POSITIVITY_LOSS
            break
        except NonFiniteState as exc:
            logger.error(f"Run stopped: {exc}")
            termination = Termination.NON_FINITE
            break

        steps += 1
        rejected += retries
        crossed = float(np.max(state.u)) > threshold
        if steps % config.sample_stride == 0 or crossed:
            record(grid, state, history, config.chi, dt=dt)
        if crossed:
            termination = Termination.BLOWUP_THRESHOLD
            break

    if history.records[-1].t != state.t:
        record(grid, state, history, config.chi, dt=dt)

    wall_clock = time.perf_counter() - started
    classification = classify(summarize(history.records, termination, max_u0, config))
    logger.info(
        f"Run finished: {termination} at t={state.t:.6g} after {steps} steps "
        f"({rejected} rejected, {wall_clock:.2f}s) -> {classification.label}"
    )
    return RunResult(
        classification=classification,
        final_state=state,
        records=history.records,
        termination=str(termination),
        grid=grid,
        config=config,
        steps=steps,
        rejected_steps=rejected,
        wall_clock=wall_clock,
        max_u0=max_u0,
    )
