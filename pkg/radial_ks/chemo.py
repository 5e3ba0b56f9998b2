"""
Chemoattractant reconstruction for the quasi-static equation 0 = Lap v - mu + u.

In the radial setting the elliptic problem is solved in closed form,

    v_r(r)  = mu r / n - r^(1-n) * S(r),
    v_rr(r) = mu / n - u + (n-1) r^(-n) * S(r),      S(r) = int_0^r rho^(n-1) u drho,

and v_rt follows from the flux of the u-equation. Only derivatives of v are
represented; v itself is fixed up to a constant and never needed.

Every integral uses the same midpoint rule as grid.mass, so v_r vanishes at
r = R to roundoff whenever mu is recomputed from the current u.
"""
import logging
from dataclasses import dataclass
from typing import Dict, Optional

import numpy as np

from .grid import RadialGrid, mass

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class ChemFields:
    """v_r, v_rr and v_rt sampled on the grid together with the mean used to build them."""
    vr_faces: np.ndarray
    vr: np.ndarray
    vrr: np.ndarray
    vrt: Optional[np.ndarray]
    mu: float


def compute_mu(grid: RadialGrid, u) -> float:
    """Mean density mu = mass / |Omega| with both sides on the same quadrature."""
    u = grid.check_field(u)
    return mass(grid, u) / float(np.sum(grid.cell_measures))


def _cumulative_faces(grid: RadialGrid, u: np.ndarray) -> np.ndarray:
    """S(f_i) for i = 0..N, exact for cellwise-constant u."""
    partial = np.empty(grid.N + 1)
    partial[0] = 0.0
    np.cumsum(u * grid.reduced_measures, out=partial[1:])
    return partial


def _cumulative_centers(grid: RadialGrid, u: np.ndarray) -> np.ndarray:
    """S(r_i): the face sum below r_i plus the half cell [f_i, r_i]."""
    n = grid.n
    half_cell = (grid.centers ** n - grid.faces[:-1] ** n) / n
    return _cumulative_faces(grid, u)[:-1] + u * half_cell


def compute_vr_faces(grid: RadialGrid, u, mu: float) -> np.ndarray:
    """v_r at all N+1 faces; v_r(0) = 0 by symmetry."""
    u = grid.check_field(u)
    n = grid.n
    f = grid.faces[1:]
    vr = np.zeros(grid.N + 1)
    vr[1:] = mu * f / n - f ** (1 - n) * _cumulative_faces(grid, u)[1:]
    return vr


def compute_vr(grid: RadialGrid, u, mu: float) -> np.ndarray:
    """v_r at the cell centers."""
    u = grid.check_field(u)
    n = grid.n
    r = grid.centers
    return mu * r / n - r ** (1 - n) * _cumulative_centers(grid, u)


def compute_vrr(grid: RadialGrid, u, mu: float) -> np.ndarray:
    """v_rr at the cell centers, sharing the cumulative quadrature of compute_vr."""
    u = grid.check_field(u)
    n = grid.n
    r = grid.centers
    return mu / n - u + (n - 1) * r ** (-n) * _cumulative_centers(grid, u)


def compute_vrt(u, u_r, v_r, chi: float) -> np.ndarray:
    """v_rt = -u u_r / sqrt(u^2 + u_r^2) + chi u v_r / sqrt(1 + v_r^2), pointwise."""
    u = np.asarray(u, dtype=float)
    u_r = np.asarray(u_r, dtype=float)
    v_r = np.asarray(v_r, dtype=float)
    norm = np.hypot(u, u_r)
    diffusive = np.divide(u * u_r, norm, out=np.zeros(np.broadcast(u, u_r).shape), where=norm > 0)
    return -diffusive + chi * u * v_r / np.sqrt(1.0 + v_r ** 2)


def reconstruct(grid: RadialGrid, u, chi: float, u_r=None) -> ChemFields:
    """
    Rebuild every chemoattractant derivative from u.

    mu is recomputed from u on each call; v_rt is only filled in when the
    density gradient u_r is supplied.
    """
    u = grid.check_field(u)
    mu = compute_mu(grid, u)
    vr = compute_vr(grid, u, mu)
    vrt = None
    if u_r is not None:
        vrt = compute_vrt(u, grid.check_field(u_r, 'u_r'), vr, chi)
    return ChemFields(
        vr_faces=compute_vr_faces(grid, u, mu),
        vr=vr,
        vrr=compute_vrr(grid, u, mu),
        vrt=vrt,
        mu=mu,
    )


def bound_violations(grid: RadialGrid, u, fields: ChemFields) -> Dict[str, float]:
    """
    Largest excess over each pointwise bound on v_r and v_rr (zero when satisfied).

    Checked at centers and interior faces:
        -mu R^n / n * r^(1-n) <= v_r <= mu r / n,
        |v_r| <= max(u) r / n,   |v_rr| <= max(u),
    plus |v_r(R)|, and in one dimension the a priori bound |v_r| <= m.
    """
    u = grid.check_field(u)
    n, R, mu = grid.n, grid.R, fields.mu
    u_max = float(np.max(u))

    r = np.concatenate([grid.centers, grid.faces[1:-1]])
    vr = np.concatenate([fields.vr, fields.vr_faces[1:-1]])

    excess = {
        'vr_upper': float(np.max(vr - mu * r / n, initial=0.0)),
        'vr_lower': float(np.max(-mu * R ** n / n * r ** (1 - n) - vr, initial=0.0)),
        'vr_linear': float(np.max(np.abs(vr) - u_max * r / n, initial=0.0)),
        'vrr_sup': float(np.max(np.abs(fields.vrr) - u_max, initial=0.0)),
        'vr_outer_face': abs(float(fields.vr_faces[-1])),
    }
    if n == 1:
        excess['vr_mass_bound'] = float(np.max(np.abs(vr) - mass(grid, u), initial=0.0))
    return excess
