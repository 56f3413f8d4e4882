import math

import numpy as np
import pytest
from scipy import stats

from jumpips import functionals as fn
from jumpips.dynamics import (EnergyFloorError, EnvelopeViolation, SimParams, expected_free_acceptance,
                              generator_apply, metropolis_reference, poisson_samples, proposal,
                              run_glauber, run_jump_chain, run_thinning, thinning_endpoints,
                              total_jump_rate)
from jumpips.geometry import Configuration, Domain, lattice_configuration
from jumpips.kernels import KernelSpec, kernel_values
from jumpips.potentials import PotentialSpec, hamiltonian
from jumpips.rates import RateSpec

BOX = Domain(1, 4.0)
KERNEL = KernelSpec(alpha=1.0, r_min=0.1)
FREE = RateSpec(KERNEL, mode="free")
LJ = RateSpec(KERNEL, PotentialSpec(pair="lennard_jones"))


def test_empty_chain_stays_empty():
    tr = run_jump_chain(LJ, SimParams(steps=100, stride=10), Configuration(BOX))
    assert len(tr) == 11
    assert np.all(tr.counts() == 0)


def test_chain_deterministic():
    xi = lattice_configuration(BOX, 4)
    a = run_jump_chain(LJ, SimParams(steps=5000, seed=9), xi)
    b = run_jump_chain(LJ, SimParams(steps=5000, seed=9), xi)
    assert a.to_csv() == b.to_csv()
    assert a.events.to_csv() == b.events.to_csv()
    c = run_jump_chain(LJ, SimParams(steps=5000, seed=10), xi)
    assert a.to_csv() != c.to_csv()


def test_thinning_and_glauber_deterministic():
    xi = lattice_configuration(BOX, 3)
    p = SimParams(horizon=5.0, seed=4)
    assert run_thinning(LJ, p, xi).events.to_csv() == run_thinning(LJ, p, xi).events.to_csv()
    pot = PotentialSpec(pair="hard_core", radius=0.2)
    g = SimParams(horizon=20.0, seed=4, activity=2.0)
    assert run_glauber(pot, g, Configuration(BOX)).events.to_csv() == \
        run_glauber(pot, g, Configuration(BOX)).events.to_csv()


def test_free_chain_acceptance_matches_quadrature():
    x0 = 0.5
    xi = Configuration(BOX, [[x0]])
    expected = expected_free_acceptance(FREE, BOX, [x0])
    assert 0.0 < expected <= 1.0
    m = 20_000
    accepted = sum(run_jump_chain(FREE, SimParams(steps=1, seed=s, record_events=False), xi).stats["accepted"]
                   for s in range(m))
    se = math.sqrt(expected * (1 - expected) / m)
    assert abs(accepted / m - expected) <= 3 * se


def test_free_thinning_accepts_everything_under_reflection():
    dom = Domain(1, 4.0, "reflect")
    tr = run_thinning(FREE, SimParams(horizon=20.0, seed=1), Configuration(dom, [[0.0]]))
    assert tr.stats["proposals"] > 0
    assert tr.stats["acceptance_rate"] == 1.0


def test_free_event_count_matches_kernel_mass():
    # reflection keeps every proposal in the box, so the event rate is int 2 nu over the displacement range
    dom = Domain(1, 4.0, "reflect")
    T, m = 2.0, 1000
    xi = Configuration(dom, [[1.0]])
    counts = np.array([run_thinning(FREE, SimParams(horizon=T, seed=s), xi).stats["accepted"] for s in range(m)])
    prop = proposal(FREE, dom)
    r = np.linspace(prop.r_min, prop.r_max, 400_001)
    nu = kernel_values(KERNEL, [0.0], r[:, None])
    mass = 2 * 2 * np.sum(0.5 * (nu[1:] + nu[:-1]) * np.diff(r))  # two sides, c = 2 nu
    se = math.sqrt(T * mass / m)
    assert abs(counts.mean() - T * mass) <= 3 * se


def test_zero_horizon_returns_start():
    xi = lattice_configuration(BOX, 3)
    tr = run_thinning(LJ, SimParams(horizon=0.0, seed=1), xi)
    assert len(tr) == 1 and tr.final == xi
    g = run_glauber(PotentialSpec(), SimParams(horizon=0.0), Configuration(BOX))
    assert len(g) == 1 and g.final.n == 0


def test_counts_conserved_by_moves():
    xi = lattice_configuration(Domain(2, 3.0), 4)
    rate = RateSpec(KERNEL, PotentialSpec(pair="riesz", a=3.0))
    assert np.all(run_jump_chain(rate, SimParams(steps=2000, stride=7, seed=2), xi).counts() == 4)
    assert np.all(run_thinning(rate, SimParams(horizon=3.0, record_dt=0.1, seed=2), xi).counts() == 4)


def test_glauber_changes_count_by_one_per_event():
    tr = run_glauber(PotentialSpec(pair="hard_core", radius=0.2), SimParams(horizon=50.0, activity=1.5, seed=3),
                     Configuration(BOX))
    steps = np.diff(tr.counts())
    assert len(steps) > 100
    assert set(np.unique(steps)) <= {-1, 1}


def test_hard_core_glauber_never_overlaps():
    tr = run_glauber(PotentialSpec(pair="hard_core", radius=0.5), SimParams(horizon=200.0, activity=4.0, seed=5),
                     Configuration(BOX))
    for k in range(len(tr)):
        p = np.sort(tr.points[tr.offsets[k]:tr.offsets[k + 1], 0])
        assert np.all(np.diff(p) >= 0.5)


def test_fixed_envelope_violation_has_witness():
    with pytest.raises(EnvelopeViolation) as err:
        run_jump_chain(LJ, SimParams(steps=10_000, envelope="fixed"), lattice_configuration(BOX, 5))
    w = err.value.witness
    assert w["rate"] > w["envelope"]


def test_energy_floor_violation_has_witness():
    with pytest.raises(EnergyFloorError) as err:
        run_glauber(PotentialSpec(pair="lennard_jones"), SimParams(horizon=100.0, activity=2.0),
                    Configuration(BOX))
    assert err.value.witness["energy"] < 0.0


def test_infinite_energy_start_rejected():
    with pytest.raises(ValueError):
        run_jump_chain(RateSpec(KERNEL, PotentialSpec(pair="hard_core", radius=1.0)), SimParams(steps=1),
                       Configuration(BOX, [[0.0], [0.5]]))


def test_generator_of_constant_is_zero():
    assert generator_apply(LJ, fn.TestFunction.constant(3.0), lattice_configuration(BOX, 3)) == 0.0


def test_generator_single_free_particle_riemann():
    x = 0.3
    phi = fn.TestFunction.linear([0.0], 1.5)
    got = generator_apply(FREE, phi, Configuration(BOX, [[x]]))
    # midpoint sums on both sides of the excluded ball
    total = 0.0
    for lo, hi in ((-4.0, x - 0.1), (x + 0.1, 4.0)):
        edges = np.linspace(lo, hi, 2_000_001)
        y = 0.5 * (edges[1:] + edges[:-1])
        nu = np.abs(y - x) ** -2.0
        dphi = phi.profiles(y[:, None])[:, 0] - phi.profiles(np.array([[x]]))[0, 0]
        total += np.sum(2 * nu * dphi) * (edges[1] - edges[0])
    assert got == pytest.approx(total, rel=1e-6)


def test_total_rate_free_matches_closed_form():
    x = -1.0
    lam = total_jump_rate(FREE, Configuration(BOX, [[x]]))[0]
    # int 2|y-x|^-2 over the box minus the excluded ball
    exact = 2 * ((1 / 0.1 - 1 / (4 - x)) + (1 / 0.1 - 1 / (x + 4)))
    assert lam == pytest.approx(exact, rel=1e-9)


def test_thinning_endpoints_match_single_runs_in_law():
    xi = Configuration(BOX, [[0.0]])
    ends = thinning_endpoints(FREE, xi, 0.5, 4000, seed=1)[:, 0, 0]
    single = np.array([run_thinning(FREE, SimParams(horizon=0.5, seed=s, record_events=False), xi).final.points[0, 0]
                       for s in range(4000)])
    assert stats.ks_2samp(ends, single).pvalue > 1e-3


def test_metropolis_reference_single_free_particle_is_uniform():
    s = metropolis_reference(PotentialSpec(), BOX, 1, 20_000, seed=3)
    assert stats.kstest(s[:, 0, 0], stats.uniform(-4, 8).cdf).pvalue > 1e-3


def test_metropolis_reference_hard_rod_gap_law():
    # two hard rods on a segment: P(gap >= r) is (1 - r/8)^2 for uniform pairs conditioned on gap >= 1
    pot = PotentialSpec(pair="hard_core", radius=1.0)
    s = metropolis_reference(pot, BOX, 2, 40_000, seed=4)
    gaps = np.abs(s[:, 0, 0] - s[:, 1, 0])
    assert gaps.min() >= 1.0
    cdf = lambda g: 1 - ((8 - np.clip(g, 1, 8)) / 7) ** 2
    assert stats.kstest(gaps, cdf).statistic < 0.02
    assert all(math.isfinite(hamiltonian(pot, Configuration(BOX, c))) for c in s[:100])


def test_poisson_samples_mean_count():
    counts = np.array([c.n for c in poisson_samples(BOX, 0.5, 4000, seed=1)])
    assert abs(counts.mean() - 4.0) <= 3 * math.sqrt(4.0 / 4000)
