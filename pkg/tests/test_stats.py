"""Statistics layer: moment reports, count distributions, conditional moments,
and the two-sided duality identity."""

import math

import numpy as np
import pytest

import heatlattice as hl


# ---------------------------------------------------------------------------
# empirical moments
# ---------------------------------------------------------------------------


def test_moment_report_hand_case():
    samples = np.array([1.0, 2.0, 3.0, 4.0])
    for method in ("batch", "jackknife"):
        rep = hl.empirical_moments(samples, [(1,), (2,)], batches=2,
                                   method=method)
        assert rep.empirical[(1,)] == 2.5
        assert rep.empirical[(2,)] == 7.5
        # batch means 1.5 / 3.5 give exactly 1.0 either way
        assert rep.std_errors[(1,)] == pytest.approx(1.0, rel=1e-12)
        assert rep.samples == 4
        assert rep.batches == 2
        assert rep.method == method
        assert rep.reference is None


def test_moment_report_joint_orders():
    samples = np.array([[1.0, 2.0], [3.0, 4.0], [5.0, 6.0], [7.0, 8.0]])
    rep = hl.empirical_moments(samples, [(1, 1), (2, 0), (0, 0)], batches=2)
    assert rep.empirical[(1, 1)] == np.mean([2.0, 12.0, 30.0, 56.0])
    assert rep.empirical[(2, 0)] == np.mean([1.0, 9.0, 25.0, 49.0])
    assert rep.empirical[(0, 0)] == 1.0
    assert rep.std_errors[(0, 0)] == 0.0


def test_moment_report_validation():
    data = np.arange(10.0)
    with pytest.raises(ValueError):
        hl.empirical_moments(data, [(1, 1)])  # width mismatch
    with pytest.raises(ValueError):
        hl.empirical_moments(data, [(-1,)])
    with pytest.raises(ValueError):
        hl.empirical_moments(data, [])
    with pytest.raises(ValueError):
        hl.empirical_moments(data, [(1,)], method="bootstrap")
    with pytest.raises(hl.InsufficientSamplesError):
        hl.empirical_moments(np.array([1.0]), [(1,)])


def test_moment_report_batch_clamping():
    rep = hl.empirical_moments(np.arange(3.0), [(1,)], batches=30)
    assert rep.batches == 3
    rep = hl.empirical_moments(np.arange(5.0), [(1,)], batches=1)
    assert rep.batches == 2


def test_batch_se_scales_with_window():
    # i.i.d. data: SE from B batches of fixed length grows ~ sqrt(2) when a
    # prefix is halved, because 1/sqrt(n) dominates
    rng = hl.Rng.from_seed(999, 0)
    values = np.array([rng.exponential(1.0) for _ in range(24_000)])
    full = hl.empirical_moments(values, [(1,)], batches=30)
    half = hl.empirical_moments(values[:12_000], [(1,)], batches=15)
    ratio = half.std_errors[(1,)] / full.std_errors[(1,)]
    assert 1.0 < ratio < 2.2


def test_jackknife_matches_batch_for_equal_batches():
    # equal-length batches make the delete-one jackknife algebraically equal
    # to plain batch means
    rng = hl.Rng.from_seed(77, 0)
    values = np.array([rng.uniform() for _ in range(3000)])
    a = hl.empirical_moments(values, [(1,), (3,)], batches=30,
                             method="batch")
    b = hl.empirical_moments(values, [(1,), (3,)], batches=30,
                             method="jackknife")
    for order in a.orders:
        assert a.empirical[order] == b.empirical[order]
        assert a.std_errors[order] == pytest.approx(
            b.std_errors[order], rel=1e-9
        )


def test_exponential_distance_zero_on_exact_moments():
    rep = hl.empirical_moments(np.ones(10), [(1,), (2,), (3,)], batches=2)
    theta = 0.8
    rep.empirical = {
        (1,): theta,
        (2,): 2 * theta**2,
        (3,): 6 * theta**3,
    }
    dist = hl.exponential_moment_distance(rep, theta)
    assert dist == 0.0
    assert rep.reference[(2,)] == 2 * theta**2
    assert rep.max_relative_deviation == 0.0


def test_exponential_distance_statistical():
    theta = 0.7
    rng = hl.Rng.from_seed(2025, 0)
    draws = np.array([rng.exponential(theta) for _ in range(40_000)])
    rep = hl.empirical_moments(draws, [(1,), (2,), (3,)])
    dist = hl.exponential_moment_distance(rep, theta)
    assert dist < 0.08
    assert rep.reference[(1,)] == pytest.approx(theta)
    assert rep.reference[(3,)] == pytest.approx(6 * theta**3)


def test_exponential_distance_scale_covariance():
    rng = hl.Rng.from_seed(13, 0)
    base = np.array([rng.exponential(1.0) for _ in range(5000)])
    d1 = hl.exponential_moment_distance(
        hl.empirical_moments(base, [(1,), (2,)]), 1.0
    )
    d2 = hl.exponential_moment_distance(
        hl.empirical_moments(4.0 * base, [(1,), (2,)]), 4.0
    )
    # scaling by a power of two is exact in floating point
    assert d2 == pytest.approx(d1, abs=1e-14)


def test_exponential_distance_rejects_bad_theta():
    rep = hl.empirical_moments(np.ones(4), [(1,)], batches=2)
    with pytest.raises(ValueError):
        hl.exponential_moment_distance(rep, 0.0)
    with pytest.raises(ValueError):
        hl.exponential_moment_distance(rep, -1.0)


# ---------------------------------------------------------------------------
# Poisson count reports
# ---------------------------------------------------------------------------


def test_tv_of_point_mass_at_zero():
    # TV(delta_0, Poisson(1)) = 1 - exp(-1), exactly
    report = hl.poisson_count_test(np.zeros(5000, dtype=np.int64), alpha=1.0)
    assert report.tv[0] == pytest.approx(1.0 - math.exp(-1.0), abs=1e-12)
    assert report.distribution[0, 0] == 1.0
    assert report.tail_mass[0] == 0.0


def test_count_report_row_normalization():
    counts = np.array([0, 1, 5, 2, 2])
    report = hl.poisson_count_test(counts, alpha=1.0, cap=2)
    np.testing.assert_allclose(report.distribution[0], [0.2, 0.2, 0.4])
    assert report.tail_mass[0] == pytest.approx(0.2)
    assert report.distribution.sum() + report.tail_mass.sum() == pytest.approx(1.0)
    assert report.reference_pmf.sum() + report.reference_tail == pytest.approx(1.0)
    assert report.cap == 2
    assert report.n_samples == 5


def test_sampled_poisson_is_close():
    gen = np.random.default_rng(42)
    counts = gen.poisson(1.3, size=(20_000, 2))
    report = hl.poisson_count_test(counts, alpha=1.3)
    assert (report.tv < 0.03).all()
    assert abs(report.correlations[0, 1]) < 0.05
    np.testing.assert_allclose(np.diag(report.correlations), 1.0)


def test_count_correlation_sign():
    gen = np.random.default_rng(7)
    x = gen.integers(0, 2, size=4000)
    counts = np.stack([x, 1 - x], axis=1)
    report = hl.poisson_count_test(counts, alpha=0.5)
    assert report.correlations[0, 1] == pytest.approx(-1.0)


def test_count_report_single_column_has_nan_corr():
    report = hl.poisson_count_test(np.array([1, 2, 3]), alpha=1.0)
    assert report.correlations.shape == (1, 1)
    assert report.correlations[0, 0] == 1.0


def test_count_report_validation():
    with pytest.raises(ValueError):
        hl.poisson_count_test(np.array([0, -1]), alpha=1.0)
    with pytest.raises(ValueError):
        hl.poisson_count_test(np.array([0, 1]), alpha=0.0)
    with pytest.raises(hl.InsufficientSamplesError):
        hl.poisson_count_test(np.zeros((0,), dtype=np.int64), alpha=1.0)


# ---------------------------------------------------------------------------
# conditional moments given a particle count
# ---------------------------------------------------------------------------


@pytest.fixture(scope="module")
def joint_sample():
    lat = hl.build_lattice(hl.DomainSpec.interval(0.0, 1.0), 4.0)
    cfg = hl.ForwardRunConfig(
        lattice=lat,
        temperature=hl.BoundaryTemperature.constant(1.0),
        particles=2,
        seed=424242,
        sample_events=30_000,
        burn_in_events=5_000,
        thinning=2,
        observables=(hl.JointAtSite(site=(2,), max_particles=4),),
    )
    return hl.simulate_ness(cfg)


def test_conditional_moments_basic(joint_sample):
    rep = hl.conditional_energy_moments(joint_sample, (2,), 1, [(1, 0), (0, 1)])
    assert rep.method == "jackknife"
    assert rep.samples >= 100
    for order in rep.orders:
        assert rep.empirical[order] > 0.0
        assert rep.std_errors[order] > 0.0
    # all-zero multi-index is a ratio of identical sums
    trivial = hl.conditional_energy_moments(joint_sample, (2,), 1, [(0, 0)])
    assert trivial.empirical[(0, 0)] == 1.0
    assert trivial.std_errors[(0, 0)] == 0.0


def test_conditional_moments_symmetrized(joint_sample):
    rep = hl.conditional_energy_moments(
        joint_sample, (2,), 2, [(0, 1, 0), (0, 0, 1)]
    )
    assert rep.empirical[(0, 1, 0)] == rep.empirical[(0, 0, 1)]
    assert rep.std_errors[(0, 1, 0)] == rep.std_errors[(0, 0, 1)]


def test_conditional_moments_requires_joint_record():
    lat = hl.build_lattice(hl.DomainSpec.interval(0.0, 1.0), 4.0)
    cfg = hl.ForwardRunConfig(
        lattice=lat,
        temperature=hl.BoundaryTemperature.constant(1.0),
        particles=2,
        seed=1,
        sample_events=100,
        burn_in_events=0,
    )
    bare = hl.simulate_ness(cfg)
    with pytest.raises(ValueError):
        hl.conditional_energy_moments(bare, (2,), 0, [(1,)])


def test_conditional_moments_argument_checks(joint_sample):
    with pytest.raises(ValueError):
        hl.conditional_energy_moments(joint_sample, (1,), 1, [(1, 0)])
    with pytest.raises(ValueError):
        hl.conditional_energy_moments(joint_sample, (2,), 5, [(1,) * 6])
    with pytest.raises(ValueError):
        hl.conditional_energy_moments(joint_sample, (2,), 1, [(1,)])


def test_conditional_moments_rare_event():
    lat = hl.build_lattice(hl.DomainSpec.interval(0.0, 1.0), 4.0)
    cfg = hl.ForwardRunConfig(
        lattice=lat,
        temperature=hl.BoundaryTemperature.constant(1.0),
        particles=2,
        seed=3,
        sample_events=200,
        burn_in_events=200,
        thinning=1,
        observables=(hl.JointAtSite(site=(2,), max_particles=4),),
    )
    sample = hl.simulate_ness(cfg)
    with pytest.raises(hl.RareEventError):
        hl.conditional_energy_moments(sample, (2,), 2, [(0, 1, 1)])


# ---------------------------------------------------------------------------
# duality identity
# ---------------------------------------------------------------------------


def _f_reference(lat, temps, packets, xi, eta):
    """Independent evaluation of the duality observable."""
    value = 1.0
    site_mult: dict = {}
    carrier_mult: dict = {}
    for loc in packets:
        if isinstance(loc, hl.AtSite):
            m = site_mult.get(loc.site, 0)
            value *= xi[lat.site_index[loc.site]] / (m + 1)
            site_mult[loc.site] = m + 1
        elif isinstance(loc, hl.CarriedBy):
            m = carrier_mult.get(loc.particle, 0)
            value *= eta[loc.particle] / (m + 1)
            carrier_mult[loc.particle] = m + 1
        else:
            value *= temps[lat.bath_index[loc.point]]
    return value


def test_duality_t0_is_exact(interval_10):
    lat = interval_10
    temp = hl.BoundaryTemperature.endpoints(1.0, 2.0)
    temps = hl.bath_values(lat, temp)
    rng = hl.Rng.from_seed(31337, 0)
    for trial in range(10):
        M = rng.randint(4) + 1
        xi = np.array([rng.exponential(1.0) for _ in range(lat.n_sites)])
        eta = np.array([rng.exponential(1.0) for _ in range(M)])
        packets = []
        for _ in range(rng.randint(3) + 1):
            kind = rng.randint(3)
            if kind == 0:
                packets.append(hl.AtSite(lat.sites[rng.randint(lat.n_sites)]))
            elif kind == 1:
                packets.append(hl.CarriedBy(rng.randint(M)))
            else:
                packets.append(hl.AtBath(lat.bath[rng.randint(lat.n_bath)]))
        lhs, rhs, se = hl.duality_check(
            lat, temp, M, packets, (xi, eta), t_events=0, replicas=4,
            seed=trial,
        )
        assert lhs == rhs
        assert se == 0.0
        expected = _f_reference(lat, temps, packets, xi, eta)
        assert lhs == pytest.approx(expected, rel=1e-12)


def test_duality_repeated_packets_weighting(interval_10):
    # two packets on one site weigh in as xi^2 / 2, bath packets as plain T
    lat = interval_10
    temp = hl.BoundaryTemperature.endpoints(1.0, 2.0)
    xi = np.full(lat.n_sites, 3.0)
    eta = np.array([5.0])
    packets = [hl.AtSite((4,)), hl.AtSite((4,)), hl.AtBath((10,)),
               hl.AtBath((10,)), hl.CarriedBy(0)]
    lhs, rhs, _ = hl.duality_check(
        lat, temp, 1, packets, (xi, eta), t_events=0, replicas=2
    )
    assert lhs == rhs == pytest.approx((9.0 / 2.0) * 4.0 * 5.0, rel=1e-12)


def test_duality_short_horizon_statistical():
    lat = hl.build_lattice(hl.DomainSpec.interval(0.0, 1.0), 4.0)
    temp = hl.BoundaryTemperature.endpoints(1.0, 2.0)
    xi = np.ones(lat.n_sites)
    eta = np.ones(2)
    lhs, rhs, se = hl.duality_check(
        lat, temp, 2, [hl.AtSite((2,))], (xi, eta), t_events=5,
        replicas=30_000, seed=808,
    )
    assert se > 0.0
    assert abs(lhs - rhs) <= 3 * se


def test_duality_argument_checks(interval_10):
    lat = interval_10
    temp = hl.BoundaryTemperature.constant(1.0)
    xi = np.ones(lat.n_sites)
    eta = np.ones(2)
    packets = [hl.AtSite((4,))]
    with pytest.raises(ValueError):
        hl.duality_check(lat, temp, 2, packets, (xi, eta), -1, 4)
    with pytest.raises(hl.InsufficientSamplesError):
        hl.duality_check(lat, temp, 2, packets, (xi, eta), 0, 1)
    with pytest.raises(ValueError):
        hl.duality_check(lat, temp, 0, packets, (xi, np.ones(0)), 0, 4)
    with pytest.raises(ValueError):
        hl.duality_check(lat, temp, 2, packets, (xi[:-1], eta), 0, 4)
    with pytest.raises(ValueError):
        hl.duality_check(lat, temp, 2, packets, (xi, eta[:1]), 0, 4)
    with pytest.raises(ValueError):
        hl.duality_check(lat, temp, 2, packets, (-xi, eta), 0, 4)
