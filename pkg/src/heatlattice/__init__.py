"""heatlattice: stochastic energy transport on lattice domains.

A simulation laboratory for a particle system that carries energy between
lattice sites and boundary heat baths, together with its dual packet chain,
harmonic reference solutions, and the statistics needed to verify steady
states against theory: harmonic mean profiles, local equilibrium of energy
moments, Poisson particle counts, and a two-sided duality identity.
"""

from .config import (
    EXPERIMENT_KINDS,
    config_hash,
    load_config,
    resolve_config,
)
from .dual import (
    AtBath,
    AtSite,
    CarriedBy,
    DualRunConfig,
    HittingRecords,
    PacketState,
    RestrictedUniform,
    UniformParticles,
    estimate_moment_product,
    hitting_records,
    initial_packet_state,
    pair_sticking_time_sample,
    run_to_absorption,
    split_packets,
    step_dual,
)
from .errors import (
    ConfigInvalidError,
    DisconnectedDomainError,
    EmptyDomainError,
    HeatLatticeError,
    InsufficientSamplesError,
    IoFailureError,
    NoConvergenceError,
    ProjectionAmbiguousError,
    RareEventError,
    StepLimitExceededError,
)
from .forward import (
    CountSeries,
    EnergySeries,
    ForwardRunConfig,
    JointAtSite,
    OccupancySnapshots,
    SteadyStateSample,
    SystemState,
    bath_exchange,
    initial_state,
    interior_exchange,
    simulate_ness,
    step_forward,
)
from .harmonic import (
    HarmonicField,
    continuum_solution_1d,
    hitting_estimate_ssrw,
    solve_discrete_harmonic,
)
from .lattice import (
    BoundaryTemperature,
    DomainSpec,
    LatticeDomain,
    bath_temperature,
    bath_values,
    build_lattice,
    nearest_lattice_point,
)
from .rng import Rng, canonical_seed, replica_states, stream_state
from .stats import (
    CountReport,
    MomentReport,
    conditional_energy_moments,
    duality_check,
    empirical_moments,
    exponential_moment_distance,
    poisson_count_test,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    # lattice
    "DomainSpec",
    "LatticeDomain",
    "BoundaryTemperature",
    "build_lattice",
    "nearest_lattice_point",
    "bath_temperature",
    "bath_values",
    # forward
    "SystemState",
    "ForwardRunConfig",
    "SteadyStateSample",
    "EnergySeries",
    "CountSeries",
    "JointAtSite",
    "OccupancySnapshots",
    "interior_exchange",
    "bath_exchange",
    "step_forward",
    "initial_state",
    "simulate_ness",
    # dual
    "AtSite",
    "AtBath",
    "CarriedBy",
    "PacketState",
    "DualRunConfig",
    "UniformParticles",
    "RestrictedUniform",
    "HittingRecords",
    "split_packets",
    "step_dual",
    "initial_packet_state",
    "run_to_absorption",
    "hitting_records",
    "estimate_moment_product",
    "pair_sticking_time_sample",
    # harmonic
    "HarmonicField",
    "solve_discrete_harmonic",
    "continuum_solution_1d",
    "hitting_estimate_ssrw",
    # stats
    "MomentReport",
    "CountReport",
    "empirical_moments",
    "exponential_moment_distance",
    "poisson_count_test",
    "conditional_energy_moments",
    "duality_check",
    # rng
    "Rng",
    "canonical_seed",
    "stream_state",
    "replica_states",
    # config
    "EXPERIMENT_KINDS",
    "load_config",
    "resolve_config",
    "config_hash",
    # errors
    "HeatLatticeError",
    "EmptyDomainError",
    "DisconnectedDomainError",
    "ProjectionAmbiguousError",
    "NoConvergenceError",
    "StepLimitExceededError",
    "InsufficientSamplesError",
    "RareEventError",
    "ConfigInvalidError",
    "IoFailureError",
]
