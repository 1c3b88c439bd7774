"""The dual packet chain and its boundary-hitting estimators.

Instead of energies, the dual process tracks ``N`` indivisible packets that
sit at sites, ride on particles, or rest permanently at bath vertices. Per
event a uniformly chosen particle picks a uniform direction; moving to an
interior site pools its carried packets with the packets at the target and
resplits them (``split_packets``); moving toward a bath vertex drops every
carried packet there for good, then resplits the packets at the particle's
own (unchanged) site. The particle always re-pools at its site after a bath
event, whether or not it carried anything into it.

Absorption statistics of the packets (which bath vertex each one ends at)
estimate products of boundary temperatures; the forward chain's steady state
matches these through the duality identity checked in :mod:`heatlattice.stats`.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

from . import _kernels
from .errors import InsufficientSamplesError, StepLimitExceededError
from .lattice import BoundaryTemperature, LatticeDomain, Site, bath_values
from .rng import Rng, replica_states

# ---------------------------------------------------------------------------
# packet locations (tagged union)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AtSite:
    site: Site


@dataclass(frozen=True)
class AtBath:
    point: Site


@dataclass(frozen=True)
class CarriedBy:
    particle: int


PacketLocation = Union[AtSite, AtBath, CarriedBy]


def location_code(lattice: LatticeDomain, loc: PacketLocation, M: int) -> int:
    """Integer encoding shared with the kernels."""
    if isinstance(loc, AtSite):
        return lattice.site_index[loc.site]
    if isinstance(loc, AtBath):
        return lattice.n_sites + lattice.bath_index[loc.point]
    if not (0 <= loc.particle < M):
        raise ValueError(f"carrier index {loc.particle} out of range for M={M}")
    return lattice.n_sites + lattice.n_bath + loc.particle


def location_from_code(lattice: LatticeDomain, code: int) -> PacketLocation:
    if code < lattice.n_sites:
        return AtSite(lattice.sites[code])
    if code < lattice.n_sites + lattice.n_bath:
        return AtBath(lattice.bath[code - lattice.n_sites])
    return CarriedBy(code - lattice.n_sites - lattice.n_bath)


@dataclass
class PacketState:
    """Mutable dual-chain state: packet locations plus particle positions."""

    lattice: LatticeDomain
    packet_location: list[PacketLocation]
    particle_position: np.ndarray  # int64[M], site indices
    event_count: int = 0

    @property
    def n_packets(self) -> int:
        return len(self.packet_location)

    @property
    def n_particles(self) -> int:
        return len(self.particle_position)

    def all_absorbed(self) -> bool:
        return all(isinstance(l, AtBath) for l in self.packet_location)

    def codes(self) -> np.ndarray:
        M = self.n_particles
        return np.array(
            [location_code(self.lattice, l, M) for l in self.packet_location],
            dtype=np.int64,
        )


# ---------------------------------------------------------------------------
# the split law
# ---------------------------------------------------------------------------


def split_packets(pooled: Sequence, rng: Rng) -> tuple[tuple, tuple]:
    """Resplit a pooled set: uniform stay-count, then a uniform subset stays.

    Returns (stay, carry). Every particular subset of size ``l`` ends up
    carried with probability l!(n-l)!/(n+1)!. An empty pool returns two empty
    tuples without consuming randomness.

    Stream consumption: one draw for the stay-count ``q``, then exactly ``q``
    draws for the partial shuffle that picks the staying subset.
    """
    n = len(pooled)
    if n == 0:
        return (), ()
    buf = list(pooled)
    q = rng.randint(n + 1)
    for t in range(q):
        r = t + rng.randint(n - t)
        buf[t], buf[r] = buf[r], buf[t]
    return tuple(buf[:q]), tuple(buf[q:])


# ---------------------------------------------------------------------------
# single-event reference implementation
# ---------------------------------------------------------------------------


def step_dual(state: PacketState, rng: Rng) -> PacketState:
    """One dual-chain event, in place. Returns the same state object.

    Stream consumption order: particle index, direction, then the
    :func:`split_packets` draws (only if the pool is nonempty). Pools are
    assembled carried-packets-first, each group in packet-index order; the
    kernels build the identical order.
    """
    lat = state.lattice
    M = state.n_particles
    j = rng.randint(M)
    direction = rng.randint(2 * lat.dimension)
    v = int(state.particle_position[j])
    code = int(lat.neighbor_codes[v, direction])
    locs = state.packet_location

    if code >= 0:
        w_site = lat.sites[code]
        state.particle_position[j] = code
        pooled = [
            i for i, l in enumerate(locs)
            if isinstance(l, CarriedBy) and l.particle == j
        ]
        pooled += [
            i for i, l in enumerate(locs)
            if isinstance(l, AtSite) and l.site == w_site
        ]
        stay, carry = split_packets(pooled, rng)
        for i in stay:
            locs[i] = AtSite(w_site)
        for i in carry:
            locs[i] = CarriedBy(j)
    else:
        w_bath = lat.bath[-code - 1]
        for i, l in enumerate(locs):
            if isinstance(l, CarriedBy) and l.particle == j:
                locs[i] = AtBath(w_bath)
        v_site = lat.sites[v]
        pooled = [
            i for i, l in enumerate(locs)
            if isinstance(l, AtSite) and l.site == v_site
        ]
        stay, carry = split_packets(pooled, rng)
        for i in carry:
            locs[i] = CarriedBy(j)

    state.event_count += 1
    return state


# ---------------------------------------------------------------------------
# run configuration
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class UniformParticles:
    """Particles i.i.d. uniform over the interior sites."""


@dataclass(frozen=True)
class RestrictedUniform:
    """Uniform over position tuples with exactly ``count`` particles at ``site``."""

    site: Site = ()
    count: int = 0


ParticleInit = Union[UniformParticles, RestrictedUniform]

DEFAULT_STEP_CAP = 10**9


@dataclass(frozen=True)
class DualRunConfig:
    lattice: LatticeDomain
    temperature: BoundaryTemperature
    particles: int
    packets: tuple[PacketLocation, ...]
    seed: int
    replicas: int = 1
    initial_particles: ParticleInit = field(default_factory=UniformParticles)
    step_cap: int = DEFAULT_STEP_CAP

    def __post_init__(self):
        if self.particles < 1:
            raise ValueError("particles must be >= 1")
        if not self.packets:
            raise ValueError("need at least one packet")
        if self.replicas < 1:
            raise ValueError("replicas must be >= 1")
        if self.step_cap < 1:
            raise ValueError("step_cap must be >= 1")
        for loc in self.packets:
            location_code(self.lattice, loc, self.particles)  # validates
        init = self.initial_particles
        if isinstance(init, RestrictedUniform):
            if init.site not in self.lattice.site_index:
                raise ValueError(f"restricted site {init.site} is not interior")
            if not (0 <= init.count <= self.particles):
                raise ValueError("restricted count must lie in [0, M]")
            if self.lattice.n_sites == 1 and init.count < self.particles:
                raise ValueError(
                    "single-site domain cannot hold particles away from it"
                )

    @property
    def n_packets(self) -> int:
        return len(self.packets)


def _init_positions(config: DualRunConfig, rng: Rng) -> np.ndarray:
    """Draw initial particle positions, mirroring the kernel initializers."""
    M = config.particles
    nsites = config.lattice.n_sites
    pos = np.empty(M, dtype=np.int64)
    init = config.initial_particles
    if isinstance(init, UniformParticles):
        for j in range(M):
            pos[j] = rng.randint(nsites)
        return pos
    site = config.lattice.site_index[init.site]
    idx = list(range(M))
    for t in range(init.count):
        r = t + rng.randint(M - t)
        idx[t], idx[r] = idx[r], idx[t]
    for t in range(M):
        if t < init.count:
            pos[idx[t]] = site
        else:
            r = rng.randint(nsites - 1)
            pos[idx[t]] = r if r < site else r + 1
    return pos


def initial_packet_state(config: DualRunConfig, rng: Rng) -> PacketState:
    return PacketState(
        lattice=config.lattice,
        packet_location=list(config.packets),
        particle_position=_init_positions(config, rng),
    )


# ---------------------------------------------------------------------------
# absorption runs
# ---------------------------------------------------------------------------


def run_to_absorption(config: DualRunConfig, rng: Rng) -> tuple[Site, ...]:
    """Iterate the dual chain until every packet rests at a bath vertex.

    Returns the bath points in packet order. One replica; the caller owns
    the stream. Raises :class:`StepLimitExceededError` at the step cap.
    """
    lat = config.lattice
    loc = np.array(
        [location_code(lat, l, config.particles) for l in config.packets],
        dtype=np.int64,
    )
    pos = _init_positions(config, rng)
    steps = _kernels.dual_absorb(
        rng.state, lat.neighbor_codes, loc, pos, lat.n_sites, lat.n_bath,
        config.step_cap,
    )
    if steps < 0:
        raise StepLimitExceededError(
            f"dual chain not absorbed within {config.step_cap} events"
        )
    return tuple(lat.bath[int(c) - lat.n_sites] for c in loc)


@dataclass(frozen=True)
class HittingRecords:
    """Per-replica absorption data: where each packet ended and its T value."""

    bath_indices: np.ndarray  # int64[R, N]
    t_values: np.ndarray  # float64[R, N]
    products: np.ndarray  # float64[R]


def hitting_records(
    config: DualRunConfig,
    temperature: BoundaryTemperature | None = None,
    workers: int = 1,
) -> HittingRecords:
    """Run all replicas to absorption on independent streams.

    Replica ``r`` uses stream ``r`` of the config seed, so results do not
    depend on scheduling and any prefix of replicas is reproducible; in
    particular ``workers`` (a thread pool over replica ranges, viable because
    the compiled chain releases the GIL) never changes the output.
    """
    if isinstance(config.initial_particles, RestrictedUniform):
        raise ValueError(
            "absorption statistics use the uniform particle initialization"
        )
    lat = config.lattice
    temp = temperature if temperature is not None else config.temperature
    R, N = config.replicas, config.n_packets
    loc0 = np.array(
        [location_code(lat, l, config.particles) for l in config.packets],
        dtype=np.int64,
    )
    states = replica_states(config.seed, R)
    out_loc = np.empty((R, N), dtype=np.int64)

    def run_range(lo: int, hi: int) -> int:
        bad = _kernels.dual_absorb_replicas(
            states[lo:hi], lat.neighbor_codes, loc0, config.particles,
            lat.n_sites, lat.n_bath, config.step_cap, out_loc[lo:hi],
        )
        return -1 if bad < 0 else lo + int(bad)

    if workers <= 1 or R < 2 * workers:
        bad = run_range(0, R)
    else:
        bounds = np.linspace(0, R, workers + 1).astype(int)
        with ThreadPoolExecutor(max_workers=workers) as pool:
            bad = max(
                pool.map(run_range, bounds[:-1], bounds[1:]),
                default=-1,
            )
    if bad >= 0:
        raise StepLimitExceededError(
            f"replica {int(bad)} not absorbed within {config.step_cap} events"
        )
    bath_idx = out_loc - lat.n_sites
    temps = bath_values(lat, temp)
    t_values = temps[bath_idx]
    return HittingRecords(
        bath_indices=bath_idx,
        t_values=t_values,
        products=t_values.prod(axis=1),
    )


def estimate_moment_product(
    config: DualRunConfig,
    temperature: BoundaryTemperature | None = None,
    workers: int = 1,
) -> tuple[float, float]:
    """Monte Carlo estimate of the product of boundary temperatures at the
    packets' absorption points, with its standard error over replicas.

    ``temperature`` overrides the config's field when given (the hitting
    locations do not depend on it, only the products do).
    """
    if config.replicas < 2:
        raise InsufficientSamplesError(
            "need at least 2 replicas for a standard error"
        )
    recs = hitting_records(config, temperature, workers=workers)
    products = recs.products
    est = float(products.mean())
    se = float(products.std(ddof=1) / np.sqrt(len(products)))
    return est, se


# ---------------------------------------------------------------------------
# sticking times of a packet pair
# ---------------------------------------------------------------------------


def pair_sticking_time_sample(
    lattice: LatticeDomain,
    M: int,
    rng: Rng,
    episodes: int = 10_000,
    start: Site | None = None,
    step_cap: int = DEFAULT_STEP_CAP,
) -> np.ndarray:
    """Sticking durations of a packet pair started together at ``start``.

    Every coincidence of the two packets' projected locations at a non-bath
    location opens an episode; the returned value is the number of collapsed
    steps (events whose pool touches a packet) until the projections differ.
    Joint absorption at a single bath vertex is reported as -1 (the pair
    never separated). Fresh replicas are started until ``episodes`` samples
    are collected. ``start`` defaults to the site nearest the domain center.
    """
    if M < 1:
        raise ValueError("M must be >= 1")
    if start is None:
        lo, hi = lattice.spec.bounding_box()
        center = np.array(
            [(a + b) / 2 * lattice.scale for a, b in zip(lo, hi)]
        )
        d2 = ((lattice.site_coords - center) ** 2).sum(axis=1)
        start_id = int(np.argmin(d2))
    else:
        start_id = lattice.site_index[start]
    out = np.empty(episodes, dtype=np.int64)
    filled = _kernels.sticking_episodes(
        rng.state, lattice.neighbor_codes, start_id, M,
        lattice.n_sites, lattice.n_bath, episodes, out, step_cap,
    )
    return out[: int(filled)]
