"""The forward chain: particles mixing energy with sites and boundary baths.

The continuous-time process attaches a rate-1 exponential clock to each of
``M`` particles. Because all clocks have equal rates, the embedded jump chain
simply picks a uniformly random particle per event, and event averages of
state observables equal time averages; physical time is therefore never
tracked. Per event the chosen particle picks one of the ``2d`` directions
uniformly, draws a mixing fraction ``p``, and either mixes-and-moves (interior
target) or mixes-and-refreshes from the bath (boundary target).

:func:`step_forward` is the readable single-event reference; sampling runs
use the compiled kernels, which consume the random stream identically.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Union

import numpy as np

from . import _kernels
from .lattice import BoundaryTemperature, LatticeDomain, Site, bath_values
from .rng import Rng

# ---------------------------------------------------------------------------
# state
# ---------------------------------------------------------------------------


@dataclass
class SystemState:
    """Mutable forward-chain state over a fixed lattice.

    Arrays are indexed in lattice order: ``site_energy[i]`` belongs to
    ``lattice.sites[i]`` and positions are site indices. ``bath_temps`` holds
    the per-bath-vertex temperature so the dynamics is self-contained.
    """

    lattice: LatticeDomain
    site_energy: np.ndarray  # float64[nsites]
    particle_energy: np.ndarray  # float64[M]
    particle_position: np.ndarray  # int64[M], site indices
    bath_temps: np.ndarray  # float64[nbath]
    event_count: int = 0

    @property
    def n_particles(self) -> int:
        return len(self.particle_energy)

    def energy_at(self, site: Site) -> float:
        return float(self.site_energy[self.lattice.site_index[site]])

    def positions_as_sites(self) -> list[Site]:
        return [self.lattice.sites[i] for i in self.particle_position]

    def total_energy(self) -> float:
        return float(self.site_energy.sum() + self.particle_energy.sum())

    def copy(self) -> "SystemState":
        return SystemState(
            lattice=self.lattice,
            site_energy=self.site_energy.copy(),
            particle_energy=self.particle_energy.copy(),
            particle_position=self.particle_position.copy(),
            bath_temps=self.bath_temps,
            event_count=self.event_count,
        )


def initial_state(
    lattice: LatticeDomain,
    temperature: BoundaryTemperature,
    particles: int,
    rng: Rng,
) -> SystemState:
    """Declared initial condition: flat energies at the mid-bath temperature,
    particle positions i.i.d. uniform over the interior sites.

    Consumes exactly ``particles`` draws from ``rng`` (the positions), so a
    compiled run can continue the same stream afterwards.
    """
    if particles < 1:
        raise ValueError("need at least one particle")
    temps = bath_values(lattice, temperature)
    level = 0.5 * (float(temps.min()) + float(temps.max()))
    pos = np.empty(particles, dtype=np.int64)
    for j in range(particles):
        pos[j] = rng.randint(lattice.n_sites)
    return SystemState(
        lattice=lattice,
        site_energy=np.full(lattice.n_sites, level, dtype=np.float64),
        particle_energy=np.full(particles, level, dtype=np.float64),
        particle_position=pos,
        bath_temps=temps,
    )


# ---------------------------------------------------------------------------
# single-event reference implementation
# ---------------------------------------------------------------------------


def interior_exchange(
    site_e: float, particle_e: float, p: float
) -> tuple[float, float]:
    """Split the pooled energy: fraction ``p`` to the site, rest to the particle.

    The site share is recanonicalized as pooled minus the particle share, so
    the two outputs sum back to the pooled value bitwise: whichever of the
    shares is >= pooled/2 makes the other subtraction exact (Sterbenz), and
    one extra subtraction settles both into that exact pairing.
    """
    pooled = site_e + particle_e
    new_particle = pooled - p * pooled
    new_site = pooled - new_particle
    return new_site, new_particle


def bath_exchange(
    site_e: float, particle_e: float, p: float, bath_draw: float
) -> tuple[float, float]:
    """Boundary variant: site keeps ``p`` of the pool, the particle's share is
    discarded to the bath and its energy is replaced by the bath draw.

    Returns (new site energy, new particle energy); the discarded amount is
    ``(site_e + particle_e) - new_site_e``, accounted by the caller.
    """
    pooled = site_e + particle_e
    new_site = p * pooled
    return new_site, bath_draw


def step_forward(state: SystemState, rng: Rng) -> SystemState:
    """One embedded-chain event, in place. Returns the same state object.

    Stream consumption order: particle index, direction, mixing fraction,
    then one exponential draw only if the target is a bath vertex. The
    compiled kernels replicate this exactly.
    """
    lat = state.lattice
    k = rng.randint(state.n_particles)
    v = int(state.particle_position[k])
    direction = rng.randint(2 * lat.dimension)
    p = rng.uniform()
    code = int(lat.neighbor_codes[v, direction])
    if code >= 0:
        new_site, new_particle = interior_exchange(
            state.site_energy[v], state.particle_energy[k], p
        )
        state.site_energy[v] = new_site
        state.particle_energy[k] = new_particle
        state.particle_position[k] = code
    else:
        b = -code - 1
        draw = rng.exponential(float(state.bath_temps[b]))
        new_site, new_particle = bath_exchange(
            state.site_energy[v], state.particle_energy[k], p, draw
        )
        state.site_energy[v] = new_site
        state.particle_energy[k] = new_particle
    state.event_count += 1
    return state


# ---------------------------------------------------------------------------
# run configuration and sampling
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EnergySeries:
    """Record site energies at every thinning step (``sites=None``: all)."""

    sites: tuple[Site, ...] | None = None


@dataclass(frozen=True)
class CountSeries:
    """Record particle counts at the given sites at every thinning step."""

    sites: tuple[Site, ...] = ()


@dataclass(frozen=True)
class JointAtSite:
    """Record (count, site energy, up to ``max_particles`` particle energies)
    at one site at every thinning step; unused slots are NaN."""

    site: Site = ()
    max_particles: int = 8


@dataclass(frozen=True)
class OccupancySnapshots:
    """Accumulate particle-position histograms every ``stride`` events
    (default stride: 3 * |sites| * M, roughly a relaxation time)."""

    stride: int | None = None


Observable = Union[EnergySeries, CountSeries, JointAtSite, OccupancySnapshots]

DEFAULT_BATCHES = 30


@dataclass(frozen=True)
class ForwardRunConfig:
    lattice: LatticeDomain
    temperature: BoundaryTemperature
    particles: int
    seed: int
    sample_events: int
    burn_in_events: int | None = None  # default 200 * |sites| * M
    thinning: int | None = None  # default M
    observables: tuple[Observable, ...] = ()
    batches: int = DEFAULT_BATCHES

    def __post_init__(self):
        if self.particles < 1:
            raise ValueError("particles must be >= 1")
        if self.sample_events < 0:
            raise ValueError("sample_events must be >= 0")
        burn = self.resolved_burn_in
        if burn < 0:
            raise ValueError("burn_in_events must be >= 0")
        if burn + self.sample_events < 1:
            raise ValueError("burn_in_events + sample_events must be >= 1")
        if self.resolved_thinning < 1:
            raise ValueError("thinning must be >= 1")
        if self.batches < 2:
            raise ValueError("need at least 2 batches for error bars")
        kinds = [type(ob) for ob in self.observables]
        if len(set(kinds)) != len(kinds):
            raise ValueError("at most one observable of each kind")

    @property
    def resolved_burn_in(self) -> int:
        if self.burn_in_events is not None:
            return self.burn_in_events
        return 200 * self.lattice.n_sites * self.particles

    @property
    def resolved_thinning(self) -> int:
        return self.thinning if self.thinning is not None else self.particles


@dataclass
class SteadyStateSample:
    """Everything recorded over the sampling window of one run.

    ``moment_means[m-1, i]`` is the event-averaged m-th power of the energy
    at site ``i`` (m = 1, 2, 3), with matching batch-means standard errors;
    series arrays are present only if the corresponding observable was
    requested. Record-sequence lengths equal ``sample_events // thinning``.
    """

    config: ForwardRunConfig
    seed: int
    records: int
    moment_means: np.ndarray  # float64[3, nsites]
    moment_ses: np.ndarray  # float64[3, nsites]
    batch_moments: np.ndarray  # float64[B, 3, nsites]
    batch_lengths: np.ndarray  # int64[B]
    bath_interactions: np.ndarray  # int64[nbath]
    bath_injected: np.ndarray  # float64[nbath]
    bath_discarded: np.ndarray  # float64[nbath]
    energy_series: np.ndarray | None = None  # float64[records, k1]
    energy_sites: tuple[Site, ...] | None = None
    count_series: np.ndarray | None = None  # int32[records, k2]
    count_sites: tuple[Site, ...] | None = None
    joint_series: np.ndarray | None = None  # float64[records, 2 + kmax]
    joint_site: Site | None = None
    occupancy: np.ndarray | None = None  # int64[nsites]
    occupancy_snapshots: int = 0
    final_state: SystemState | None = None

    @property
    def site_mean(self) -> np.ndarray:
        return self.moment_means[0]

    @property
    def site_mean_se(self) -> np.ndarray:
        return self.moment_ses[0]

    @property
    def site_variance(self) -> np.ndarray:
        return self.moment_means[1] - self.moment_means[0] ** 2


def _batch_bounds(n_events: int, batches: int) -> np.ndarray:
    """Contiguous batch boundaries covering all events; remainders spread
    one event at a time over the leading batches."""
    base, rem = divmod(n_events, batches)
    lengths = np.full(batches, base, dtype=np.int64)
    lengths[:rem] += 1
    bounds = np.zeros(batches + 1, dtype=np.int64)
    np.cumsum(lengths, out=bounds[1:])
    return bounds


def _site_ids(lattice: LatticeDomain, sites) -> np.ndarray:
    return np.array([lattice.site_index[s] for s in sites], dtype=np.int64)


def simulate_ness(config: ForwardRunConfig) -> SteadyStateSample:
    """Burn in, then sample the steady state. Deterministic given the seed.

    One xoshiro stream (stream 0 of the seed) drives the whole run: initial
    positions first, then every event in order.
    """
    lat = config.lattice
    nsites = lat.n_sites
    rng = Rng.from_seed(config.seed)
    state = initial_state(lat, config.temperature, config.particles, rng)

    burn = config.resolved_burn_in
    if burn > 0:
        _kernels.forward_burn(
            rng.state,
            lat.neighbor_codes,
            state.bath_temps,
            state.site_energy,
            state.particle_energy,
            state.particle_position,
            burn,
        )
        state.event_count += burn

    thin = config.resolved_thinning
    n = config.sample_events
    records = n // thin if n > 0 else 0

    energy_ob = count_ob = joint_ob = occ_ob = None
    for ob in config.observables:
        if isinstance(ob, EnergySeries):
            energy_ob = ob
        elif isinstance(ob, CountSeries):
            count_ob = ob
        elif isinstance(ob, JointAtSite):
            joint_ob = ob
        elif isinstance(ob, OccupancySnapshots):
            occ_ob = ob

    energy_sites = (
        tuple(lat.sites) if energy_ob is not None and energy_ob.sites is None
        else (energy_ob.sites if energy_ob is not None else None)
    )
    rec_site_ids = (
        _site_ids(lat, energy_sites) if energy_sites is not None
        else np.empty(0, dtype=np.int64)
    )
    rec_energy = np.zeros((records if energy_sites is not None else 0,
                           len(rec_site_ids)), dtype=np.float64)

    count_site_ids = (
        _site_ids(lat, count_ob.sites) if count_ob is not None
        else np.empty(0, dtype=np.int64)
    )
    rec_counts = np.zeros((records if count_ob is not None else 0,
                           len(count_site_ids)), dtype=np.int32)

    if joint_ob is not None:
        joint_site_id = int(lat.site_index[joint_ob.site])
        kmax = int(joint_ob.max_particles)
    else:
        joint_site_id, kmax = -1, 0
    rec_joint = np.zeros((records if joint_ob is not None else 0, 2 + kmax),
                         dtype=np.float64)

    if occ_ob is not None:
        occ_stride = occ_ob.stride or 3 * nsites * config.particles
    else:
        occ_stride = 0
    occ = np.zeros(nsites, dtype=np.int64)

    batches = config.batches
    bounds = _batch_bounds(n, batches) if n > 0 else np.zeros(1, dtype=np.int64)
    batch_m = np.zeros((batches if n > 0 else 0, 3, nsites), dtype=np.float64)

    bath_touch = np.zeros(lat.n_bath, dtype=np.int64)
    bath_in = np.zeros(lat.n_bath, dtype=np.float64)
    bath_out = np.zeros(lat.n_bath, dtype=np.float64)

    snapshots = 0
    if n > 0:
        site_counts = np.bincount(
            state.particle_position, minlength=nsites
        ).astype(np.int64)
        snapshots = _kernels.forward_sample(
            rng.state,
            lat.neighbor_codes,
            state.bath_temps,
            state.site_energy,
            state.particle_energy,
            state.particle_position,
            n,
            thin,
            bounds,
            batch_m,
            rec_site_ids,
            rec_energy,
            count_site_ids,
            rec_counts,
            joint_site_id,
            rec_joint,
            site_counts,
            occ,
            occ_stride,
            bath_touch,
            bath_in,
            bath_out,
        )
        state.event_count += n

    lengths = np.diff(bounds) if n > 0 else np.zeros(0, dtype=np.int64)
    if n > 0:
        weights = lengths / lengths.sum()
        moment_means = np.einsum("b,bmv->mv", weights, batch_m)
        moment_ses = batch_m.std(axis=0, ddof=1) / np.sqrt(batch_m.shape[0])
    else:
        moment_means = np.full((3, nsites), np.nan)
        moment_ses = np.full((3, nsites), np.nan)

    return SteadyStateSample(
        config=config,
        seed=config.seed,
        records=records,
        moment_means=moment_means,
        moment_ses=moment_ses,
        batch_moments=batch_m,
        batch_lengths=lengths,
        bath_interactions=bath_touch,
        bath_injected=bath_in,
        bath_discarded=bath_out,
        energy_series=rec_energy if energy_sites is not None else None,
        energy_sites=energy_sites,
        count_series=rec_counts if count_ob is not None else None,
        count_sites=count_ob.sites if count_ob is not None else None,
        joint_series=rec_joint if joint_ob is not None else None,
        joint_site=joint_ob.site if joint_ob is not None else None,
        occupancy=occ if occ_ob is not None else None,
        occupancy_snapshots=int(snapshots),
        final_state=state,
    )
