"""Reference temperature profiles: discrete harmonic fields and cross-checks.

The steady-state mean energy profile solves the discrete mean-value problem
``u(v) = average of u over the 2d neighbors``, with bath neighbors
contributing their boundary temperature. This module solves that system by
Gauss-Seidel relaxation, provides the closed-form 1d solution, and offers an
independent Monte Carlo cross-check through random-walk hitting values (the
discrete field is exactly the expected boundary temperature at the walk's
first bath contact).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .errors import NoConvergenceError
from .lattice import BoundaryTemperature, LatticeDomain, Site, bath_values
from .rng import Rng

DEFAULT_TOL = 1e-10
DEFAULT_SWEEP_CAP = 10**6


@dataclass(frozen=True)
class HarmonicField:
    """A solved mean-value field over the interior sites.

    ``residual`` is the max over sites of the deviation from the neighbor
    average (bath neighbors contributing their temperature); it is at most
    the tolerance the solve was asked for.
    """

    lattice: LatticeDomain
    values: np.ndarray  # float64[nsites]
    residual: float
    sweeps: int

    def value_at(self, site: Site) -> float:
        return float(self.values[self.lattice.site_index[site]])

    def as_dict(self) -> dict[Site, float]:
        return {s: float(v) for s, v in zip(self.lattice.sites, self.values)}


def solve_discrete_harmonic(
    lattice: LatticeDomain,
    temp: BoundaryTemperature,
    tol: float = DEFAULT_TOL,
    max_sweeps: int = DEFAULT_SWEEP_CAP,
) -> HarmonicField:
    """Gauss-Seidel solve of the discrete mean-value system to ``tol``.

    Initialized at the mid-bath temperature; every update is a neighbor
    average, so iterates respect the discrete maximum principle throughout.
    Raises :class:`NoConvergenceError` if the sweep cap is hit first.
    """
    if not (tol > 0):
        raise ValueError("tol must be positive")
    temps = bath_values(lattice, temp)
    u = np.full(
        lattice.n_sites, 0.5 * (float(temps.min()) + float(temps.max())),
        dtype=np.float64,
    )
    sweeps, residual = _kernels.gauss_seidel(
        lattice.neighbor_codes, temps, u, tol, max_sweeps
    )
    if sweeps < 0:
        raise NoConvergenceError(
            f"Gauss-Seidel residual {residual:.3e} > tol {tol:.1e} "
            f"after {max_sweeps} sweeps"
        )
    return HarmonicField(
        lattice=lattice, values=u, residual=float(residual), sweeps=int(sweeps)
    )


def continuum_solution_1d(T0: float, T1: float, x: float) -> float:
    """The 1d continuum profile on the unit interval: linear between the ends."""
    if not (0.0 <= x <= 1.0):
        raise ValueError(f"x must lie in [0, 1], got {x}")
    return T0 + (T1 - T0) * x


def hitting_estimate_ssrw(
    lattice: LatticeDomain,
    temp: BoundaryTemperature,
    start: Site,
    replicas: int,
    rng: Rng,
) -> tuple[float, float]:
    """Monte Carlo mean of the boundary temperature where a simple random
    walk from ``start`` first touches the bath, with its standard error.

    In expectation this equals the discrete harmonic field at ``start``
    exactly, which makes it an independent cross-check on the solver.
    """
    if replicas < 1:
        raise ValueError("replicas must be >= 1")
    start_id = lattice.site_index[start]
    temps = bath_values(lattice, temp)
    out = np.empty(replicas, dtype=np.float64)
    _kernels.ssrw_hit_values(
        rng.state, lattice.neighbor_codes, temps, start_id, out
    )
    est = float(out.mean())
    se = float(out.std(ddof=1) / np.sqrt(replicas)) if replicas > 1 else float("nan")
    return est, se
