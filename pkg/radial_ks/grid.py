"""
Radial geometry of the ball B_R(0) in R^n: a uniform cell-centered grid,
the n-dimensional cell measures and the midpoint mass functional.
"""
import logging
import math
from dataclasses import dataclass, field

import numpy as np
from django.core.exceptions import ValidationError

logger = logging.getLogger(__name__)


def sphere_measure(n: int) -> float:
    """Surface measure of the unit sphere in R^n (2 for n=1, 2*pi for n=2, ...)"""
    if n == 1:
        return 2.0
    if n == 2:
        return 2.0 * math.pi
    if n == 3:
        return 4.0 * math.pi
    return 2.0 * math.pi ** (n / 2.0) / math.gamma(n / 2.0)


@dataclass(frozen=True, eq=False)
class RadialGrid:
    """Uniform cell-centered discretization of [0, R]; r = 0 is never a sample point."""
    n: int
    R: float
    N: int
    dr: float = field(init=False)
    faces: np.ndarray = field(init=False, repr=False)
    centers: np.ndarray = field(init=False, repr=False)
    omega_n: float = field(init=False)
    cell_measures: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        dr = self.R / self.N
        faces = np.arange(self.N + 1, dtype=float) * dr
        # pin the outer face so f_N == R exactly
        faces[-1] = self.R
        centers = (np.arange(self.N, dtype=float) + 0.5) * dr
        omega_n = sphere_measure(self.n)
        cell_measures = omega_n * np.diff(faces ** self.n) / self.n

        for array in (faces, centers, cell_measures):
            array.setflags(write=False)

        object.__setattr__(self, 'dr', dr)
        object.__setattr__(self, 'faces', faces)
        object.__setattr__(self, 'centers', centers)
        object.__setattr__(self, 'omega_n', omega_n)
        object.__setattr__(self, 'cell_measures', cell_measures)

    @property
    def volume(self) -> float:
        """|Omega| = omega_n R^n / n"""
        return self.omega_n * self.R ** self.n / self.n

    @property
    def reduced_measures(self) -> np.ndarray:
        """Cell measures without the omega_n factor: (f_{i+1}^n - f_i^n) / n"""
        return self.cell_measures / self.omega_n

    def check_field(self, u, name: str = 'u') -> np.ndarray:
        """Return u as a float array, rejecting length mismatches."""
        values = np.asarray(u, dtype=float)
        if values.shape != (self.N,):
            raise ValidationError(
                f'{name} has shape {values.shape}, expected ({self.N},) for this grid'
            )
        return values

    def integrate(self, values) -> float:
        """Midpoint rule for the integral over Omega of a cell-centered field."""
        return float(np.dot(self.check_field(values, 'integrand'), self.cell_measures))


def make_grid(n: int, R: float, N: int) -> RadialGrid:
    """Build a RadialGrid after validating n >= 1, R > 0, N >= 2."""
    errors = {}
    if not isinstance(n, (int, np.integer)) or n < 1:
        errors['n'] = f'dimension must be an integer >= 1, got {n!r}'
    if not isinstance(R, (int, float, np.floating)) or not math.isfinite(R) or R <= 0:
        errors['R'] = f'radius must be finite and > 0, got {R!r}'
    if not isinstance(N, (int, np.integer)) or N < 2:
        errors['N'] = f'cell count must be an integer >= 2, got {N!r}'
    if errors:
        raise ValidationError(errors)

    grid = RadialGrid(n=int(n), R=float(R), N=int(N))
    logger.debug(f"Built radial grid n={grid.n} R={grid.R} N={grid.N} dr={grid.dr:.3e}")
    return grid


def mass(grid: RadialGrid, u) -> float:
    """Total mass sum_i u_i * |cell_i|, exact for cellwise-constant fields."""
    return grid.integrate(u)
