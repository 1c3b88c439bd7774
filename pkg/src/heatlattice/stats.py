"""Estimators that turn recorded samples into checkable statements.

Covers empirical (joint) moments with batch-means or jackknife errors, the
exponential-moment distance used for local-equilibrium checks, count
distributions against a Poisson reference, conditional energy moments given
a particle count, and the two-sided duality identity check.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import permutations
from typing import Sequence

import numpy as np
from scipy import stats as sps

from . import _kernels
from .dual import PacketLocation, location_code
from .errors import InsufficientSamplesError, RareEventError
from .forward import SteadyStateSample
from .lattice import BoundaryTemperature, LatticeDomain, Site, bath_values
from .rng import stream_state

MultiIndex = tuple[int, ...]

# ---------------------------------------------------------------------------
# moment reports
# ---------------------------------------------------------------------------


@dataclass
class MomentReport:
    """Empirical (joint) moments per multi-index, with standard errors.

    ``reference`` and ``max_relative_deviation`` start empty; they are filled
    by :func:`exponential_moment_distance` against a chosen temperature
    scale.
    """

    orders: tuple[MultiIndex, ...]
    empirical: dict[MultiIndex, float]
    std_errors: dict[MultiIndex, float]
    samples: int
    batches: int
    method: str
    reference: dict[MultiIndex, float] | None = None
    max_relative_deviation: float | None = None


def _contiguous_batches(n: int, batches: int) -> np.ndarray:
    """Boundaries of contiguous batches covering 0..n; remainder spread over
    the leading batches."""
    base, rem = divmod(n, batches)
    lengths = np.full(batches, base, dtype=np.int64)
    lengths[:rem] += 1
    bounds = np.zeros(batches + 1, dtype=np.int64)
    np.cumsum(lengths, out=bounds[1:])
    return bounds


def _normalize_orders(
    orders: Sequence[Sequence[int]], width: int
) -> tuple[MultiIndex, ...]:
    out = []
    for order in orders:
        t = tuple(int(c) for c in order)
        if len(t) != width:
            raise ValueError(
                f"multi-index {t} has {len(t)} components, samples have {width}"
            )
        if any(c < 0 for c in t):
            raise ValueError(f"multi-index {t} has a negative power")
        out.append(t)
    if not out:
        raise ValueError("orders must be nonempty")
    return tuple(out)


def empirical_moments(
    samples: np.ndarray,
    orders: Sequence[Sequence[int]],
    batches: int = 30,
    method: str = "batch",
) -> MomentReport:
    """Empirical mean of the coordinate-power product per multi-index.

    ``samples`` is a time-ordered (n, s) array (or (n,) for s = 1); errors
    come from contiguous batching so autocorrelation within a batch is
    absorbed. ``method`` selects plain batch-means errors or delete-one-batch
    jackknife errors.
    """
    samples = np.asarray(samples, dtype=np.float64)
    if samples.ndim == 1:
        samples = samples[:, None]
    n, width = samples.shape
    if n < 2:
        raise InsufficientSamplesError(f"need at least 2 samples, got {n}")
    if method not in ("batch", "jackknife"):
        raise ValueError("method must be 'batch' or 'jackknife'")
    norm_orders = _normalize_orders(orders, width)

    n_batches = max(2, min(batches, n))
    bounds = _contiguous_batches(n, n_batches)
    lengths = np.diff(bounds).astype(np.float64)

    empirical: dict[MultiIndex, float] = {}
    errors: dict[MultiIndex, float] = {}
    for order in norm_orders:
        values = np.ones(n, dtype=np.float64)
        for coord, power in enumerate(order):
            if power:
                values *= samples[:, coord] ** power
        empirical[order] = float(values.mean())
        batch_means = np.array(
            [values[a:b].mean() for a, b in zip(bounds[:-1], bounds[1:])]
        )
        if method == "batch":
            se = batch_means.std(ddof=1) / math.sqrt(n_batches)
        else:
            total = values.sum()
            leave_one = (total - batch_means * lengths) / (n - lengths)
            center = leave_one.mean()
            se = math.sqrt(
                (n_batches - 1) / n_batches * ((leave_one - center) ** 2).sum()
            )
        errors[order] = float(se)

    return MomentReport(
        orders=norm_orders,
        empirical=empirical,
        std_errors=errors,
        samples=n,
        batches=n_batches,
        method=method,
    )


def exponential_moment_distance(report: MomentReport, theta: float) -> float:
    """Distance from the product-exponential reference at temperature ``theta``.

    Fills ``report.reference`` with the closed-form moments (the product over
    coordinates of ``n! * theta**n``) and ``report.max_relative_deviation``
    with the returned value: the largest relative deviation over the
    report's multi-indices.
    """
    if not (theta > 0):
        raise ValueError("theta must be positive")
    reference: dict[MultiIndex, float] = {}
    worst = 0.0
    for order in report.orders:
        ref = 1.0
        for power in order:
            ref *= math.factorial(power) * theta**power
        reference[order] = ref
        dev = abs(report.empirical[order] - ref) / ref
        worst = max(worst, dev)
    report.reference = reference
    report.max_relative_deviation = worst
    return worst


# ---------------------------------------------------------------------------
# count distributions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CountReport:
    """Empirical count distributions vs a Poisson reference.

    Each row of ``distribution`` covers counts 0..cap with the mass above the
    cap lumped into ``tail_mass``, so every row plus its tail sums to one.
    ``tv`` is the total-variation distance to the same truncation of
    Poisson(alpha); ``correlations`` are the pairwise empirical correlations
    between the count columns (NaN on constant columns).
    """

    alpha: float
    cap: int
    n_samples: int
    distribution: np.ndarray  # float64[k, cap+1]
    tail_mass: np.ndarray  # float64[k]
    reference_pmf: np.ndarray  # float64[cap+1]
    reference_tail: float
    tv: np.ndarray  # float64[k]
    correlations: np.ndarray  # float64[k, k]


def poisson_count_test(
    counts: np.ndarray, alpha: float, cap: int | None = None
) -> CountReport:
    """Compare empirical count columns against Poisson(``alpha``).

    ``counts`` is (n,) or (n, k) of nonnegative integers, one column per
    tracked site. The distance is computed on the distribution truncated at
    ``cap`` with the excess lumped into a tail bucket (default cap: beyond
    both the data and essentially all Poisson mass, so nothing real is
    lumped).
    """
    counts = np.asarray(counts)
    if counts.ndim == 1:
        counts = counts[:, None]
    n, k = counts.shape
    if n < 1:
        raise InsufficientSamplesError("need at least 1 count sample")
    if (counts < 0).any():
        raise ValueError("counts must be nonnegative")
    if not (alpha > 0):
        raise ValueError("alpha must be positive")
    if cap is None:
        cap = int(max(counts.max(), math.ceil(alpha + 10 * math.sqrt(alpha) + 10)))

    support = np.arange(cap + 1)
    ref_pmf = sps.poisson.pmf(support, alpha)
    ref_tail = float(sps.poisson.sf(cap, alpha))

    dist = np.empty((k, cap + 1), dtype=np.float64)
    tail = np.empty(k, dtype=np.float64)
    tv = np.empty(k, dtype=np.float64)
    for j in range(k):
        col = counts[:, j]
        clipped = np.minimum(col, cap + 1)
        pmf = np.bincount(clipped, minlength=cap + 2) / n
        dist[j] = pmf[: cap + 1]
        tail[j] = pmf[cap + 1]
        tv[j] = 0.5 * (
            np.abs(dist[j] - ref_pmf).sum() + abs(tail[j] - ref_tail)
        )

    if k >= 2 and n >= 2:
        with np.errstate(invalid="ignore", divide="ignore"):
            corr = np.corrcoef(counts, rowvar=False)
    else:
        corr = np.full((k, k), np.nan)
        np.fill_diagonal(corr, 1.0)

    return CountReport(
        alpha=float(alpha),
        cap=cap,
        n_samples=n,
        distribution=dist,
        tail_mass=tail,
        reference_pmf=ref_pmf,
        reference_tail=ref_tail,
        tv=tv,
        correlations=np.atleast_2d(corr),
    )


# ---------------------------------------------------------------------------
# conditional moments given a particle count
# ---------------------------------------------------------------------------


def conditional_energy_moments(
    sample: SteadyStateSample,
    site: Site,
    K: int,
    orders: Sequence[Sequence[int]],
    batches: int = 30,
) -> MomentReport:
    """Joint moments of (site energy, particle energies) given exactly ``K``
    particles at ``site``.

    Each multi-index has K+1 components: the site-energy power first, then
    one power per particle slot. Particle energies are symmetrized over
    orderings (the state only knows an unordered multiset). Errors are
    delete-one-batch jackknife on the ratio estimator, so the randomness of
    the conditioning count is accounted for.
    """
    if sample.joint_series is None or sample.joint_site is None:
        raise ValueError("sample lacks a joint record; request JointAtSite")
    if sample.joint_site != site:
        raise ValueError(
            f"joint record covers site {sample.joint_site}, not {site}"
        )
    kmax = sample.joint_series.shape[1] - 2
    if not (0 <= K <= kmax):
        raise ValueError(f"K={K} outside the recorded range 0..{kmax}")
    norm_orders = _normalize_orders(orders, K + 1)

    joint = sample.joint_series
    n = joint.shape[0]
    mask = joint[:, 0] == K
    occurrences = int(mask.sum())
    if occurrences < 100:
        raise RareEventError(
            f"conditioning event count=={K} occurred {occurrences} times "
            f"(< 100) in {n} records"
        )

    site_e = joint[:, 1]
    particle_e = joint[:, 2 : 2 + K] if K > 0 else np.empty((n, 0))

    n_batches = max(2, min(batches, n))
    bounds = _contiguous_batches(n, n_batches)

    empirical: dict[MultiIndex, float] = {}
    errors: dict[MultiIndex, float] = {}
    for order in norm_orders:
        site_part = site_e ** order[0] if order[0] else np.ones(n)
        powers = order[1:]
        if K > 0:
            sym = np.zeros(n, dtype=np.float64)
            perms = list(permutations(range(K)))
            for perm in perms:
                term = np.ones(n, dtype=np.float64)
                for slot, p in enumerate(perm):
                    if powers[p]:
                        term = term * particle_e[:, slot] ** powers[p]
                sym += term
            sym /= len(perms)
        else:
            sym = np.ones(n, dtype=np.float64)
        values = np.where(mask, site_part * sym, 0.0)

        batch_sums = np.array(
            [values[a:b].sum() for a, b in zip(bounds[:-1], bounds[1:])]
        )
        batch_hits = np.array(
            [mask[a:b].sum() for a, b in zip(bounds[:-1], bounds[1:])],
            dtype=np.float64,
        )
        total_sum, total_hits = batch_sums.sum(), batch_hits.sum()
        empirical[order] = float(total_sum / total_hits)
        rest_hits = total_hits - batch_hits
        safe = rest_hits > 0
        leave_one = np.where(
            safe, (total_sum - batch_sums) / np.where(safe, rest_hits, 1.0),
            total_sum / total_hits,
        )
        center = leave_one.mean()
        errors[order] = float(
            math.sqrt(
                (n_batches - 1) / n_batches * ((leave_one - center) ** 2).sum()
            )
        )

    return MomentReport(
        orders=norm_orders,
        empirical=empirical,
        std_errors=errors,
        samples=occurrences,
        batches=n_batches,
        method="jackknife",
    )


# ---------------------------------------------------------------------------
# two-sided duality identity
# ---------------------------------------------------------------------------


def duality_check(
    lattice: LatticeDomain,
    temperature: BoundaryTemperature,
    M: int,
    n_star: Sequence[PacketLocation],
    x_star: tuple[np.ndarray, np.ndarray],
    t_events: int,
    replicas: int,
    seed: int = 0,
) -> tuple[float, float, float]:
    """Estimate both sides of the duality identity and their combined error.

    The left side evolves energies forward ``t_events`` events from the fixed
    assignment ``x_star`` (site energies, particle energies) and averages the
    duality observable against the fixed packet placement ``n_star``; the
    right side evolves the packets the same number of events and averages
    against the fixed energies. Both sides draw fresh uniform particle
    positions per replica (on separate streams of ``seed``), which is the
    position law under which the identity holds. ``t_events = 0`` returns
    exactly equal sides.

    Intended for small systems; variance grows quickly with packets and
    domain size.
    """
    if t_events < 0:
        raise ValueError("t_events must be >= 0")
    if replicas < 2:
        raise InsufficientSamplesError("need at least 2 replicas per side")
    if M < 1:
        raise ValueError("M must be >= 1")
    xi_star = np.ascontiguousarray(x_star[0], dtype=np.float64)
    eta_star = np.ascontiguousarray(x_star[1], dtype=np.float64)
    if xi_star.shape != (lattice.n_sites,):
        raise ValueError("x_star site energies must cover every site")
    if eta_star.shape != (M,):
        raise ValueError("x_star particle energies must cover every particle")
    if (xi_star < 0).any() or (eta_star < 0).any():
        raise ValueError("energies must be nonnegative")
    loc_star = np.array(
        [location_code(lattice, l, M) for l in n_star], dtype=np.int64
    )
    temps = bath_values(lattice, temperature)

    lhs_vals = np.empty(replicas, dtype=np.float64)
    _kernels.duality_forward_side(
        stream_state(seed, 0), lattice.neighbor_codes, temps,
        xi_star, eta_star, loc_star, t_events, lhs_vals,
    )
    rhs_vals = np.empty(replicas, dtype=np.float64)
    _kernels.duality_dual_side(
        stream_state(seed, 1), lattice.neighbor_codes, temps,
        xi_star, eta_star, loc_star, t_events, rhs_vals,
    )

    lhs = float(lhs_vals.mean())
    rhs = float(rhs_vals.mean())
    se = float(
        math.sqrt(
            lhs_vals.var(ddof=1) / replicas + rhs_vals.var(ddof=1) / replicas
        )
    )
    return lhs, rhs, se
