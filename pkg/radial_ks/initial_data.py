"""
Initial-data families for the density u_0.

Both families are smooth, positive, radially symmetric and satisfy the
Neumann condition at r = 0 and r = R exactly:

    cosine:  u_0(r) = c0 * (1 + a cos(pi r / R)),            |a| < 1
    bump:    u_0(r) = c0 + c1 * (1 + cos(pi r / R))^k,       k >= 2, c1 >= 0

When a target mass m is given, c0 is solved from m on the grid quadrature so
that mass(grid, u_0) == m to roundoff.
"""
import logging
import math
from dataclasses import dataclass, asdict
from typing import Any, Dict, Optional

import numpy as np
from django.core.exceptions import ValidationError

from .grid import RadialGrid, mass

logger = logging.getLogger(__name__)

FAMILIES = ('cosine', 'bump')


@dataclass(frozen=True)
class InitialDataSpec:
    family: str = 'cosine'
    mass: Optional[float] = None
    amplitude: float = 0.5
    k: int = 2

    def __post_init__(self):
        errors = {}
        if self.family not in FAMILIES:
            errors['family'] = f'unknown family {self.family!r}; expected one of {FAMILIES}'
        elif self.family == 'cosine' and not abs(self.amplitude) < 1:
            errors['amplitude'] = f'cosine amplitude must satisfy |a| < 1, got {self.amplitude}'
        elif self.family == 'bump':
            if self.k < 2:
                errors['k'] = f'bump exponent must be >= 2, got {self.k}'
            if self.amplitude < 0:
                errors['amplitude'] = f'bump amplitude must be >= 0, got {self.amplitude}'
        if self.mass is not None and not self.mass > 0:
            errors['mass'] = f'target mass must be > 0, got {self.mass}'
        if errors:
            raise ValidationError(errors)

    def as_dict(self) -> Dict[str, Any]:
        return asdict(self)

    def _phase(self, grid: RadialGrid, r):
        return math.pi * np.asarray(r, dtype=float) / grid.R

    def base_level(self, grid: RadialGrid) -> float:
        """The constant c0, solved from the target mass when one is set."""
        if self.family == 'cosine':
            if self.mass is None:
                return 1.0
            shape = 1.0 + self.amplitude * np.cos(self._phase(grid, grid.centers))
            return self.mass / mass(grid, shape)

        if self.mass is None:
            return 1.0
        bump = (1.0 + np.cos(self._phase(grid, grid.centers))) ** self.k
        c0 = (self.mass - self.amplitude * mass(grid, bump)) / grid.volume
        if c0 <= 0:
            raise ValidationError(
                f'bump amplitude {self.amplitude} leaves no positive base level for mass {self.mass}'
            )
        return c0

    def profile(self, grid: RadialGrid, r) -> np.ndarray:
        """u_0 evaluated at radii r."""
        c0 = self.base_level(grid)
        phase = self._phase(grid, r)
        if self.family == 'cosine':
            return c0 * (1.0 + self.amplitude * np.cos(phase))
        return c0 + self.amplitude * (1.0 + np.cos(phase)) ** self.k

    def slope(self, grid: RadialGrid, r) -> np.ndarray:
        """Analytic derivative of u_0 with respect to r."""
        c0 = self.base_level(grid)
        phase = self._phase(grid, r)
        scale = math.pi / grid.R
        if self.family == 'cosine':
            return -c0 * self.amplitude * scale * np.sin(phase)
        return -self.amplitude * self.k * (1.0 + np.cos(phase)) ** (self.k - 1) * scale * np.sin(phase)

    def build(self, grid: RadialGrid) -> np.ndarray:
        """Sample u_0 at the cell centers after checking positivity and the Neumann condition."""
        u0 = self.profile(grid, grid.centers)
        if not np.all(np.isfinite(u0)):
            raise ValidationError('initial density contains non-finite values')
        if np.min(u0) <= 0:
            raise ValidationError(f'initial density must be positive, min is {np.min(u0):.3e}')

        end_slopes = np.abs(self.slope(grid, np.array([0.0, grid.R])))
        if np.max(end_slopes) > 1e-9 * max(1.0, float(np.max(u0))):
            raise ValidationError(
                f'initial density violates the Neumann condition: end slopes {end_slopes.tolist()}'
            )
        logger.debug(
            f"Initial data {self.family}: min={np.min(u0):.6g} max={np.max(u0):.6g} "
            f"mass={mass(grid, u0):.6g}"
        )
        return u0


def initial_data_from_dict(raw: Dict[str, Any]) -> InitialDataSpec:
    """Build a spec from already-validated fields, dropping unset optionals."""
    values = {key: value for key, value in raw.items() if value is not None}
    return InitialDataSpec(**values)
