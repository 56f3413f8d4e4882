import json
import math

import numpy as np
import pytest
from scipy import integrate, stats

from jumpips.diagnostics import (BinnedIntensity, DiagnosticsReport, effective_sample_size, estimate_rho1,
                                 estimate_rho2, fit_growth_exponent, poisson_count_test,
                                 rhojump_inequality_check, stationarity_audit, tail_exponent_fit,
                                 variance_ratio_curve)
from jumpips.dynamics import SimParams, poisson_samples, run_jump_chain
from jumpips.geometry import Configuration, Domain
from jumpips.kernels import EnvelopeSpec, KernelSpec
from jumpips.rates import RateSpec

BOX = Domain(1, 4.0)
ENV = EnvelopeSpec(1.0, 0.5)


@pytest.fixture(scope="module")
def poisson():
    return poisson_samples(BOX, 1.0, 10_000, seed=1)


def test_report_json_round_trip():
    rep = DiagnosticsReport(provenance={"seed": np.int64(3)})
    rep.add_metric("x", np.float64(1.5), 0.1)
    rep.add_flag("ok", np.bool_(True), evidence=np.arange(3), inf=math.inf)
    rep.add_flag("bad", False)
    data = json.loads(rep.to_json())
    assert data["passed"] is False
    assert data["flags"]["ok"]["evidence"] == [0, 1, 2]
    assert data["flags"]["ok"]["inf"] == "inf"
    assert data["provenance"]["seed"] == 3


def test_rho1_empty_samples():
    r = estimate_rho1([Configuration(BOX)] * 5, 4)
    assert np.all(r.values == 0)


def test_rho1_poisson(poisson):
    r = estimate_rho1(poisson, 8)
    assert np.all(np.abs(r.values - 1.0) <= 3 * r.stderr)


def test_growth_exponent_uniform(poisson):
    k, _ = fit_growth_exponent(estimate_rho1(poisson, 8))
    assert abs(k) <= 0.1


def test_growth_exponent_of_power_law_intensity():
    edges = np.linspace(-8, 8, 33)
    c = 0.5 * (edges[1:] + edges[:-1])
    rho = BinnedIntensity((edges,), np.abs(c) ** 1.3, np.zeros(32), 1)
    assert fit_growth_exponent(rho)[0] == pytest.approx(1.3, abs=1e-12)


def test_rho2_poisson_equals_square_intensity(poisson):
    g = estimate_rho2(poisson, np.linspace(0.2, 4.0, 6))
    assert np.all(np.abs(g.values - 1.0) <= 4 * g.stderr)


def test_rho2_two_dimensional_poisson():
    s = poisson_samples(Domain(2, 2.0), 2.0, 3000, seed=2)
    g = estimate_rho2(s, np.linspace(0.2, 2.0, 5))
    assert np.all(np.abs(g.values / 4.0 - 1.0) <= 4 * g.stderr / 4.0 + 1e-12)


def test_variance_ratio_poisson(poisson):
    radii = np.array([0.5, 1.0, 1.5, 2.0, 3.0, 4.0])
    c = variance_ratio_curve(poisson, radii)
    assert np.all(np.abs(c.ratio - 1 / (2 * radii)) <= 4 * c.stderr)
    assert abs(c.delta - 1.0) <= 0.2
    assert "r,ratio,stderr" in c.to_csv()


def test_variance_ratio_deterministic_samples():
    s = [Configuration(BOX, [[0.2], [1.7], [-3.0]])] * 50
    c = variance_ratio_curve(s, [0.5, 2.0, 3.5])
    assert np.all(c.ratio == 0)
    assert math.isnan(c.delta)


def test_variance_ratio_skips_empty_balls():
    s = [Configuration(BOX, [[3.0]])] * 10
    c = variance_ratio_curve(s, [0.5, 3.5])
    assert any("skipped" in n for n in c.notes)


def _p_truncated(r, r_min):
    return float(ENV(r, 1)) if r >= r_min else 0.0


def test_rhojump_constant_intensity_quadrature_oracle():
    r_min, A = 0.1, (-1.0, 2.0)
    res = rhojump_inequality_check(2.0, ENV, A, BOX, r_min)
    kinks = [A[0] - 1, A[0] - r_min, A[0], A[0] + r_min, A[0] + 1, A[1] - 1, A[1] - r_min, A[1],
             A[1] + r_min, A[1] + 1]
    inner = lambda x: integrate.quad(lambda y: _p_truncated(abs(x - y), r_min), A[0], A[1],
                                     points=[x - 1, x - r_min, x + r_min, x + 1], limit=200)[0]
    outer = integrate.quad(inner, -4, 4, points=[k for k in kinks if -4 < k < 4], limit=400)[0]
    assert res.R_min == pytest.approx(outer / (A[1] - A[0]), rel=1e-7)
    assert res.passed


def test_rhojump_intensity_supported_on_test_box():
    r_min, A = 0.01, (0.0, 0.5)
    edges = np.array([-4.0, 0.0, 0.5, 4.0])
    rho = BinnedIntensity((edges,), np.array([0.0, 1.0, 0.0]), np.zeros(3), 1)
    res = rhojump_inequality_check(rho, ENV, A, BOX, r_min)
    self_int = [integrate.quad(lambda y: _p_truncated(abs(x - y), r_min), *A, points=[x - r_min, x + r_min],
                               limit=200)[0] for x in np.linspace(*A, 51)]
    assert min(self_int) * 0.99 <= res.R_min <= max(self_int) * 1.01


def test_rhojump_scale_invariant(poisson):
    rho = estimate_rho1(poisson, 8)
    base = rhojump_inequality_check(rho, ENV, (-1.0, 1.0), BOX, 0.05)
    for s in (0.5, 2.0, 7.0):
        other = rhojump_inequality_check(rho.scaled(s), ENV, (-1.0, 1.0), BOX, 0.05)
        assert abs(other.R_min - base.R_min) <= 1e-12 * base.R_min


def test_rhojump_R_gate():
    res = rhojump_inequality_check(1.0, ENV, (-1.0, 1.0), BOX, 0.1, R=1e-3)
    assert not res.passed


def test_tail_fit_exact_and_gate():
    fit = tail_exponent_fit(ENV, d=1)
    assert abs(fit.alpha - 1.0) <= 1e-9 and abs(fit.beta - 0.5) <= 1e-9
    assert tail_exponent_fit(ENV, d=1, kappa=0.5).gate_passed
    assert not tail_exponent_fit(ENV, d=1, kappa=1.5).gate_passed


def test_tail_fit_noisy():
    rng = np.random.default_rng(0)
    r = np.concatenate([np.geomspace(1e-2, 1, 40), np.geomspace(1, 1e2, 40)[1:]])
    p = ENV(r, 1) * (1 + 0.01 * rng.standard_normal(r.size))
    fit = tail_exponent_fit(r, p, d=1)
    assert abs(fit.alpha - 1.0) <= 0.05


def test_tail_fit_needs_enough_decades():
    r = np.linspace(0.5, 2.0, 20)
    with pytest.raises(ValueError, match="decades"):
        tail_exponent_fit(r, ENV(r, 1))


def test_ess_iid_and_ar1():
    rng = np.random.default_rng(0)
    x = rng.standard_normal(20_000)
    assert effective_sample_size(x) == pytest.approx(20_000, rel=0.1)
    ar = np.zeros(20_000)
    e = rng.standard_normal(20_000)
    for i in range(1, ar.size):
        ar[i] = 0.9 * ar[i - 1] + e[i]
    assert effective_sample_size(ar) == pytest.approx(20_000 * 0.1 / 1.9, rel=0.25)


def test_null_calibration():
    rng = np.random.default_rng(11)
    rejections = sum(stationarity_audit(rng.gamma(2.0, size=2000), rng.gamma(2.0, size=2000)).rejected
                     for _ in range(200))
    assert rejections / 200 <= 0.07


def test_audit_detects_shift():
    rng = np.random.default_rng(1)
    res = stationarity_audit(rng.normal(0.3, 1, 5000), rng.normal(0, 1, 5000))
    assert res.rejected and not res.passed


def test_audit_small_sample_inconclusive():
    res = stationarity_audit(np.arange(50.0), np.arange(50.0), min_ess=100)
    assert res.inconclusive and not res.passed


def test_free_single_particle_chain_against_uniform():
    rate = RateSpec(KernelSpec(alpha=1.0, r_min=0.5), mode="free")
    tr = run_jump_chain(rate, SimParams(steps=2_000_000, stride=4, seed=5, record_events=False),
                        Configuration(BOX, [[0.0]]))
    x = tr.points[1000:, 0]
    ref = np.random.default_rng(6).uniform(-4, 4, 200_000)
    res = stationarity_audit(x, ref, max_distance=0.05)
    assert res.ess_dynamics >= 1e5
    assert res.passed


def test_poisson_count_test():
    rng = np.random.default_rng(0)
    _, p, dof = poisson_count_test(rng.poisson(6.0, 20_000), 6.0)
    assert p > 0.01 and dof > 5
    _, p, _ = poisson_count_test(rng.poisson(6.5, 20_000), 6.0)
    assert p < 1e-6
