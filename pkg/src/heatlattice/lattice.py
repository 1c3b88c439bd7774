"""Discrete domains: interior sites, bath layer, adjacency, boundary data.

A continuum region ``D`` (interval, axis-aligned rectangle, or ball) is
scaled by ``L`` and intersected with the integer lattice. Interior sites are
the lattice points whose scaled-down image lies strictly inside ``D``; the
bath is the layer of outside lattice points adjacent to an interior site.
Every neighbor of an interior site is therefore either interior or bath, and
simulation kernels can walk the graph through a dense neighbor-code table
without geometry tests.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import product
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import (
    DisconnectedDomainError,
    EmptyDomainError,
    ProjectionAmbiguousError,
)

Site = tuple[int, ...]
Point = tuple[float, ...]


def nearest_lattice_point(x: float | Sequence[float]) -> Site:
    """Componentwise rounding to the nearest integer point; ties round up.

    Accepts a scalar as shorthand for a 1d point. Always returns a tuple.
    """
    if np.isscalar(x):
        coords = (float(x),)
    else:
        coords = tuple(float(c) for c in x)
    return tuple(int(math.floor(c + 0.5)) for c in coords)


@dataclass(frozen=True)
class DomainSpec:
    """A bounded open region: interval (d=1), rectangle (d>=1), or ball (d>=2).

    ``bounds`` holds per-axis open intervals for interval/rectangle shapes;
    ``center``/``radius`` describe the ball. Membership is strict (open
    region), so boundary points are never interior.
    """

    kind: str
    dimension: int
    bounds: tuple[tuple[float, float], ...] = ()
    center: tuple[float, ...] = ()
    radius: float = 0.0

    @classmethod
    def interval(cls, a: float, b: float) -> "DomainSpec":
        if not (a < b):
            raise ValueError(f"interval needs a < b, got ({a}, {b})")
        return cls(kind="interval", dimension=1, bounds=((float(a), float(b)),))

    @classmethod
    def rectangle(cls, bounds: Iterable[tuple[float, float]]) -> "DomainSpec":
        bounds = tuple((float(a), float(b)) for a, b in bounds)
        if not bounds:
            raise ValueError("rectangle needs at least one axis")
        for a, b in bounds:
            if not (a < b):
                raise ValueError(f"rectangle axis needs a < b, got ({a}, {b})")
        return cls(kind="rectangle", dimension=len(bounds), bounds=bounds)

    @classmethod
    def ball(cls, center: Sequence[float], radius: float) -> "DomainSpec":
        center = tuple(float(c) for c in center)
        if len(center) < 2:
            raise ValueError("ball preset requires dimension >= 2")
        if not (radius > 0):
            raise ValueError(f"ball radius must be positive, got {radius}")
        return cls(
            kind="ball", dimension=len(center), center=center, radius=float(radius)
        )

    def contains(self, x: Point) -> bool:
        """Strict membership of a point in the open region."""
        if self.kind in ("interval", "rectangle"):
            return all(a < c < b for c, (a, b) in zip(x, self.bounds))
        dist2 = sum((c - m) ** 2 for c, m in zip(x, self.center))
        return dist2 < self.radius**2

    def bounding_box(self) -> tuple[tuple[float, ...], tuple[float, ...]]:
        if self.kind in ("interval", "rectangle"):
            return (
                tuple(a for a, _ in self.bounds),
                tuple(b for _, b in self.bounds),
            )
        return (
            tuple(c - self.radius for c in self.center),
            tuple(c + self.radius for c in self.center),
        )

    def project_boundary(self, x: Point) -> Point:
        """Nearest point of the region's boundary.

        For boxes this is the clamp onto the closed box when ``x`` is outside
        (or on the boundary already); a strictly interior point is pushed to
        its nearest face, lowest axis on ties. For balls it is the radial
        projection, undefined at the exact center.
        """
        if self.kind in ("interval", "rectangle"):
            clamped = tuple(
                min(max(c, a), b) for c, (a, b) in zip(x, self.bounds)
            )
            if not self.contains(clamped):
                return clamped
            best_axis, best_dist, best_val = 0, math.inf, 0.0
            for axis, (c, (a, b)) in enumerate(zip(clamped, self.bounds)):
                for wall in (a, b):
                    d = abs(c - wall)
                    if d < best_dist:
                        best_axis, best_dist, best_val = axis, d, wall
            out = list(clamped)
            out[best_axis] = best_val
            return tuple(out)
        delta = tuple(c - m for c, m in zip(x, self.center))
        norm = math.sqrt(sum(t * t for t in delta))
        if norm == 0.0:
            raise ProjectionAmbiguousError(
                "cannot project the exact ball center onto the boundary"
            )
        return tuple(m + self.radius * t / norm for m, t in zip(self.center, delta))


@dataclass(frozen=True)
class LatticeDomain:
    """The discretized domain: interior sites, bath layer, adjacency.

    ``sites`` and ``bath`` are lexicographically sorted tuples of integer
    points. ``neighbor_codes[i, k]`` encodes the neighbor of site ``i`` in
    direction ``k``: a value ``>= 0`` is an interior site index, a negative
    value ``-(b+1)`` is bath index ``b``. Direction ``2*a`` is ``+e_a`` and
    ``2*a + 1`` is ``-e_a`` for axis ``a``; kernels and reference code share
    this convention, so random streams line up draw for draw.
    """

    spec: DomainSpec
    scale: float
    sites: tuple[Site, ...]
    bath: tuple[Site, ...]
    site_index: dict[Site, int] = field(repr=False)
    bath_index: dict[Site, int] = field(repr=False)
    site_coords: np.ndarray = field(repr=False)
    bath_coords: np.ndarray = field(repr=False)
    neighbor_codes: np.ndarray = field(repr=False)

    @property
    def dimension(self) -> int:
        return self.spec.dimension

    @property
    def n_sites(self) -> int:
        return len(self.sites)

    @property
    def n_bath(self) -> int:
        return len(self.bath)

    def neighbors_of(self, site: Site) -> list[tuple[Site, bool]]:
        """All 2d neighbors of an interior site as (point, is_bath) pairs."""
        i = self.site_index[site]
        out = []
        for code in self.neighbor_codes[i]:
            code = int(code)
            if code >= 0:
                out.append((self.sites[code], False))
            else:
                out.append((self.bath[-code - 1], True))
        return out

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, LatticeDomain):
            return NotImplemented
        return (
            self.spec == other.spec
            and self.scale == other.scale
            and self.sites == other.sites
            and self.bath == other.bath
        )

    def __hash__(self) -> int:
        return hash((self.spec, self.scale, self.sites, self.bath))


def _unit_steps(d: int) -> list[tuple[int, ...]]:
    steps = []
    for axis in range(d):
        for sign in (1, -1):
            e = [0] * d
            e[axis] = sign
            steps.append(tuple(e))
    return steps


def build_lattice(spec: DomainSpec, L: float) -> LatticeDomain:
    """Discretize ``L * D`` over the integer lattice and attach the bath layer.

    Raises :class:`EmptyDomainError` when no lattice point falls inside and
    :class:`DisconnectedDomainError` when the interior graph is disconnected.
    """
    if not (L > 0):
        raise ValueError(f"scale L must be positive, got {L}")
    d = spec.dimension
    lo, hi = spec.bounding_box()
    axis_ranges = [
        range(math.floor(L * a) - 1, math.ceil(L * b) + 2) for a, b in zip(lo, hi)
    ]
    sites = sorted(
        v for v in product(*axis_ranges) if spec.contains(tuple(c / L for c in v))
    )
    if not sites:
        raise EmptyDomainError(
            f"no lattice points inside the scaled domain at L={L}"
        )
    site_index = {v: i for i, v in enumerate(sites)}
    steps = _unit_steps(d)

    bath_set: set[Site] = set()
    for v in sites:
        for e in steps:
            w = tuple(a + b for a, b in zip(v, e))
            if w not in site_index:
                bath_set.add(w)
    bath = sorted(bath_set)
    bath_index = {w: b for b, w in enumerate(bath)}

    codes = np.empty((len(sites), 2 * d), dtype=np.int32)
    for i, v in enumerate(sites):
        for k, e in enumerate(steps):
            w = tuple(a + b for a, b in zip(v, e))
            j = site_index.get(w)
            codes[i, k] = j if j is not None else -(bath_index[w] + 1)

    # connectivity of the interior graph (BFS over site indices)
    seen = np.zeros(len(sites), dtype=bool)
    stack = [0]
    seen[0] = True
    while stack:
        i = stack.pop()
        for code in codes[i]:
            if code >= 0 and not seen[code]:
                seen[code] = True
                stack.append(int(code))
    if not seen.all():
        missing = int((~seen).sum())
        raise DisconnectedDomainError(
            f"interior graph is disconnected: {missing} of {len(sites)} sites "
            f"unreachable at L={L}"
        )

    return LatticeDomain(
        spec=spec,
        scale=float(L),
        sites=tuple(sites),
        bath=tuple(bath),
        site_index=site_index,
        bath_index=bath_index,
        site_coords=np.array(sites, dtype=np.int64).reshape(len(sites), d),
        bath_coords=np.array(bath, dtype=np.int64).reshape(len(bath), d),
        neighbor_codes=codes,
    )


@dataclass(frozen=True)
class BoundaryTemperature:
    """Temperature data on (a neighborhood of) the continuum boundary.

    Presets: a constant field, an endpoint pair for 1d intervals, or an
    arbitrary continuous callable. Bath vertices are evaluated at the nearest
    boundary point of the continuum region; ``projected=False`` on the
    callable variant skips that projection and evaluates at the scaled vertex
    itself, which is useful when verifying against functions defined on all
    of space (it is not the default evaluation rule).
    """

    kind: str
    value: float = 0.0
    left: float = 0.0
    right: float = 0.0
    fn: Callable[[Point], float] | None = None
    projected: bool = True

    @classmethod
    def constant(cls, value: float) -> "BoundaryTemperature":
        _check_value(float(value))
        return cls(kind="constant", value=float(value))

    @classmethod
    def endpoints(cls, left: float, right: float) -> "BoundaryTemperature":
        _check_value(float(left))
        _check_value(float(right))
        return cls(kind="endpoints", left=float(left), right=float(right))

    @classmethod
    def from_callable(
        cls, fn: Callable[[Point], float], projected: bool = True
    ) -> "BoundaryTemperature":
        return cls(kind="callable", fn=fn, projected=projected)

    def evaluate(self, point: Point, spec: DomainSpec) -> float:
        if self.kind == "constant":
            return self.value
        if self.kind == "endpoints":
            if spec.kind != "interval":
                raise ValueError("endpoint temperatures require an interval domain")
            (a, b) = spec.bounds[0]
            return self.left if abs(point[0] - a) <= abs(point[0] - b) else self.right
        assert self.fn is not None
        return float(self.fn(point))


def _check_value(value: float) -> None:
    # zero is tolerated (degenerate data used by verification runs)
    if not (value >= 0 and math.isfinite(value)):
        raise ValueError(f"temperature values must be finite and >= 0, got {value}")


def bath_temperature(
    temp: BoundaryTemperature, spec: DomainSpec, w: Site, L: float
) -> float:
    """Temperature assigned to bath vertex ``w``: T at the projection of w/L.

    The scaled vertex is projected onto the continuum boundary and the field
    is evaluated there (except for the explicit unprojected-callable variant).
    """
    x = tuple(c / L for c in w)
    if temp.kind == "callable" and not temp.projected:
        val = float(temp.fn(x))  # type: ignore[misc]
    else:
        val = temp.evaluate(spec.project_boundary(x), spec)
    _check_value(val)
    return val


def bath_values(lattice: LatticeDomain, temp: BoundaryTemperature) -> np.ndarray:
    """Temperatures of every bath vertex, in bath order (kernel input)."""
    return np.array(
        [
            bath_temperature(temp, lattice.spec, w, lattice.scale)
            for w in lattice.bath
        ],
        dtype=np.float64,
    )
