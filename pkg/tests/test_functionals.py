import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from jumpips import functionals as fn
from jumpips.dynamics import poisson_configuration
from jumpips.geometry import Configuration, Domain
from jumpips.kernels import KernelSpec, ball_volume

BOX = Domain(1, 4.0)
KERNEL = KernelSpec(alpha=1.0, r_min=0.1)


def conf(*xs, dom=BOX):
    return Configuration(dom, [[x] for x in xs])


def test_empty_configuration_polynomial():
    F = fn.TestFunction.linear([0.0], 1.0)
    assert fn.eval_polynomial(F, conf()) == 0.0


def test_linear_statistic_at_bump_center():
    assert fn.eval_polynomial(fn.TestFunction.linear([0.0], 1.0), conf(0.0)) == 1.0


def test_polynomial_of_two_bumps():
    # Q(s1, s2) = 1 + 2 s1 + 3 s1 s2 at degree 2
    F = fn.TestFunction([[0.0], [2.0]], [1.0, 1.0], [1.0, 2.0, 0.0, 0.0, 3.0, 0.0], degree=2)
    assert fn.monomials(2, 2) == [(0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2)]
    xi = conf(0.0, 2.0, 3.5)
    assert F(xi) == pytest.approx(1.0 + 2.0 + 3.0)


def test_test_function_validation():
    with pytest.raises(ValueError):
        fn.TestFunction([[0.0]], [1.0], [1.0, 2.0, 3.0], degree=1)
    with pytest.raises(ValueError):
        fn.TestFunction([[0.0]], [-1.0], [0.0, 1.0], degree=1)


def test_discrete_gradient_examples():
    F = fn.TestFunction.linear([0.5], 2.0)
    xi = conf(-1.0, 0.2)
    assert fn.discrete_gradient(F, xi, 1, [0.2]) == 0.0
    assert fn.discrete_gradient(fn.TestFunction.constant(2.0), xi, 0, [3.0]) == 0.0
    phi = lambda x: F.profiles(np.array([[x]]))[0, 0]
    assert fn.discrete_gradient(F, xi, 0, [1.7]) == pytest.approx(phi(1.7) - phi(-1.0), abs=1e-15)


def test_square_field_of_constant_is_zero():
    assert fn.square_field(fn.TestFunction.constant(1.0), fn.TestFunction.constant(1.0), KERNEL,
                           conf(0.0, 1.0)) == 0.0


def test_square_field_single_particle_riemann():
    x = -0.4
    F = fn.TestFunction.linear([0.0], 1.5)
    got = fn.square_field(F, F, KERNEL, conf(x))
    phi = lambda y: F.profiles(np.atleast_2d(y).T)[:, 0]
    total = 0.0
    for lo, hi in ((-4.0, x - 0.1), (x + 0.1, 4.0)):
        edges = np.linspace(lo, hi, 2_000_001)
        y = 0.5 * (edges[1:] + edges[:-1])
        total += np.sum((phi(y) - phi(np.array([x]))) ** 2 * np.abs(y - x) ** -2.0) * (edges[1] - edges[0])
    assert got == pytest.approx(0.5 * total, rel=1e-6)


def test_square_field_two_dimensional_is_finite_and_positive():
    dom = Domain(2, 2.0)
    F = fn.TestFunction.linear([0.0, 0.0], 1.0)
    v = fn.square_field(F, F, KernelSpec(alpha=1.0, r_min=0.1), Configuration(dom, [[0.2, 0.1]]))
    assert math.isfinite(v) and v > 0


def test_dirichlet_energy_constant():
    sampler = lambda rng: poisson_configuration(BOX, 0.5, rng)
    assert fn.dirichlet_energy(fn.TestFunction.constant(1.0), KERNEL, sampler, 10) == (0.0, 0.0)


def test_dirichlet_energy_poisson_mecke():
    z = 0.5
    F = fn.TestFunction.linear([0.0], 1.5)
    phi = lambda y: float(F.profiles(np.array([[y]]))[0, 0])

    def inner(x):
        f = lambda y: (phi(y) - phi(x)) ** 2 * abs(y - x) ** -2.0
        pts = [p for p in (-1.5, 1.5) if -4 < p < 4]
        a = integrate.quad(f, -4.0, x - 0.1, points=[p for p in pts if p < x - 0.1] or None, limit=200)[0] \
            if x - 0.1 > -4 else 0.0
        b = integrate.quad(f, x + 0.1, 4.0, points=[p for p in pts if p > x + 0.1] or None, limit=200)[0] \
            if x + 0.1 < 4 else 0.0
        return a + b

    exact = 0.5 * z * integrate.quad(inner, -4.0, 4.0, points=[-1.6, -1.4, 1.4, 1.6], limit=200)[0]
    mean, se = fn.dirichlet_energy(F, KERNEL, lambda rng: poisson_configuration(BOX, z, rng), 300, seed=2)
    assert abs(mean - exact) <= 3 * se
    assert se < 0.2 * exact


def test_d_a_examples():
    a = fn.CutoffSequence(1, 1, 0.0)
    inside = np.array([[0.5], [1.9], [3.5]])
    assert fn.in_M_a(inside, a)
    assert fn.d_a(inside, a) == 0.0
    assert fn.d_a(conf(), a) == 0.0
    ones = fn.ConstantSequence(1)
    assert fn.d_a(np.array([[0.0], [0.5]]), ones) >= 1.0


def test_chi_examples():
    a = fn.CutoffSequence(1, 1, 0.0)
    assert fn.chi_a(np.array([[0.5], [1.5]]), a) == 1.0
    # xi(U_2) >= 2 a_2 + 1 = 9
    assert fn.chi_a(np.zeros((9, 1)) + 0.3, a) == 0.0


def test_in_M_examples():
    assert fn.in_M_a(conf(), fn.ConstantSequence(1))
    assert not fn.in_M_a(np.array([[0.0], [0.5]]), fn.ConstantSequence(1))
    xi = conf(0.1, 0.2, 0.3, 1.0, 3.0)
    assert not fn.in_M_a(xi, fn.CutoffSequence(1, 1))
    assert fn.in_M_a(xi, fn.CutoffSequence(3, 1))


def test_doubled_shift_sequence():
    a = fn.CutoffSequence(2, 1, 1.0)
    assert fn.DoubledShift(a)(3) == 2 * a(4)


def test_cutoff_function_kinks_include_dyadic_radii():
    chi = fn.CutoffFunction(fn.CutoffSequence(1, 1))
    ks = {k[0] for k in chi.kinks(np.array([[0.7], [-2.5]]))}
    assert {1.0, -1.0, 2.0, 4.0, 0.7, -2.5, 0.0} <= ks


def _c2_oracle(n, d, kappa):
    D = d + kappa
    a = lambda r: n * mpmath.mpf(2) ** (D * r)
    c2 = mpmath.nsum(lambda r: (2 * a(r + 1) + 1) * mpmath.mpf(2) ** (-(2 * r - 4)) / a(r - 1) ** 2, [1, mpmath.inf])
    c32 = mpmath.nsum(lambda r: (2 * a(r + 1) + 1) / a(r - 1) ** 2, [1, mpmath.inf])
    return float(c2), float(c32)


def _c42_oracle(n, d, kappa, alpha, size=70):
    D = d + kappa
    a = lambda r: n * mpmath.mpf(2) ** (D * r)
    vd = mpmath.mpf(ball_volume(d))
    total = mpmath.mpf(0)
    for r in range(1, size):
        for l in range(1, size):
            if abs(l - r) <= 1:
                continue
            lo, hi = min(r, l), max(r, l)
            inner = mpmath.fsum(1 / a(m) for m in range(lo, hi + 1))
            area = vd * 2 ** d if l == 1 else vd * mpmath.mpf(2) ** (d * l) * (1 - mpmath.mpf(2) ** -d)
            total += inner ** 2 * (2 * a(r + 1) + 1) * area * mpmath.mpf(2) ** (-(hi - 2) * (d + alpha))
    return float(total)


@pytest.mark.parametrize("n,d,kappa,alpha", [(1, 1, 0.0, 1.0), (2, 1, 1.0, 1.5), (1, 2, 0.0, 0.5),
                                             (3, 2, 1.0, 2.0)])
def test_bound_sums_against_summation_oracle(n, d, kappa, alpha):
    mpmath.mp.dps = 30
    rep = fn.bound_sums(n, d, kappa, alpha)
    c2, c32 = _c2_oracle(n, d, kappa)
    assert rep.sum_c2 == pytest.approx(c2, rel=1e-12)
    assert rep.sum_c32 == pytest.approx(c32, rel=1e-12)
    assert rep.sum_c42 == pytest.approx(_c42_oracle(n, d, kappa, alpha), rel=1e-9)
    assert rep.passed, rep.checks()


def test_first_closed_form_value():
    rep = fn.bound_sums(1, 1, 0.0)
    assert rep.bound_c2 == pytest.approx(0.5 ** -5 / (1 - 0.5 ** 3) + 0.5 ** -2 / (1 - 0.5 ** 4), rel=1e-15)
    assert rep.sum_c2 <= rep.bound_c2


@pytest.mark.parametrize("d", [1, 2])
@pytest.mark.parametrize("kappa", [0.0, 1.0])
def test_sums_finite_and_decreasing_in_n(d, kappa):
    for alpha in (kappa + 0.5, kappa + 1.0):
        reps = [fn.bound_sums(n, d, kappa, alpha) for n in (1, 2, 4, 8)]
        for r in reps:
            assert r.passed
        for attr in ("sum_c2", "sum_c32", "sum_c42"):
            vals = [getattr(r, attr) for r in reps]
            assert all(b < a for a, b in zip(vals, vals[1:]))


def test_double_sum_diverges_without_tail_gate():
    with pytest.raises(fn.BoundDivergence):
        fn.bound_sums(1, 1, 1.0, alpha=0.8)


# --- properties --------------------------------------------------------------

coords = st.floats(-4.0, 4.0, allow_nan=False)
@st.composite
def random_functions(draw):
    ell = draw(st.integers(1, 2))
    deg = draw(st.integers(0, 2))
    centers = [[draw(coords)] for _ in range(ell)]
    radii = [draw(st.floats(0.3, 3.0)) for _ in range(ell)]
    coef = [draw(st.floats(-3.0, 3.0)) for _ in fn.monomials(ell, deg)]
    return fn.TestFunction(centers, radii, coef, degree=deg)


@settings(max_examples=200, deadline=None)
@given(random_functions(), st.lists(coords, max_size=7), st.randoms())
def test_polynomial_permutation_invariant(F, xs, rnd):
    ys = list(xs)
    rnd.shuffle(ys)
    assert F(conf(*xs)) == pytest.approx(F(conf(*ys)), rel=1e-12, abs=1e-12)


@settings(max_examples=200, deadline=None)
@given(st.integers(1, 3), st.integers(1, 2), st.sampled_from([0.0, 1.0]), st.integers(0, 2**32 - 1))
def test_chi_value_lemma(n, d, kappa, seed):
    rng = np.random.default_rng(seed)
    a = fn.CutoffSequence(n, d, kappa)
    assert fn.chi_a(fn.sample_in_M(a, d, rng), a) == 1.0
    assert fn.chi_a(fn.sample_outside_M2(a, d, rng), a) == 0.0


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(-6.0, 6.0, allow_nan=False), max_size=12), st.integers(1, 2),
       st.sampled_from([0.0, 1.0]))
def test_chi_range_and_rows_agree(xs, n, kappa):
    a = fn.CutoffSequence(n, 1, kappa)
    pts = np.array(xs, dtype=float).reshape(-1, 1)
    v = fn.chi_a(pts, a)
    assert 0.0 <= v <= 1.0
    assert fn.chi_rows(np.abs(pts[:, 0])[None, :], a)[0] == pytest.approx(v, abs=1e-12)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(-3.0, 3.0, allow_nan=False), min_size=1, max_size=6), st.data())
def test_cutoff_moved_values_match_direct_evaluation(xs, data):
    chi = fn.CutoffFunction(fn.CutoffSequence(1, 1))
    pts = np.array(xs).reshape(-1, 1)
    i = data.draw(st.integers(0, len(xs) - 1))
    Y = np.array(data.draw(st.lists(st.floats(-4, 4), min_size=1, max_size=5))).reshape(-1, 1)
    direct = []
    for y in Y:
        p = pts.copy()
        p[i] = y
        direct.append(chi(p))
    assert np.allclose(chi.moved_values(pts, i, Y), direct, atol=1e-12)


@settings(max_examples=100, deadline=None)
@given(random_functions(), random_functions(), st.lists(st.floats(-3.0, 3.0, allow_nan=False), min_size=1, max_size=6),
       st.data())
def test_product_moved_values(F, G, xs, data):
    pts = np.array(xs).reshape(-1, 1)
    i = data.draw(st.integers(0, len(xs) - 1))
    Y = np.array([[data.draw(st.floats(-4, 4))]])
    H = F * G
    p = pts.copy()
    p[i] = Y[0]
    assert H.moved_values(pts, i, Y)[0] == pytest.approx(F(p) * G(p), rel=1e-12, abs=1e-12)


@settings(max_examples=25, deadline=None)
@given(random_functions(), random_functions(), st.lists(st.floats(-3.5, 3.5, allow_nan=False), min_size=1, max_size=3))
def test_square_field_nonnegative_and_cauchy_schwarz(F, G, xs):
    M = fn.square_field_matrix([F, G], KERNEL, conf(*xs))
    assert M[0, 0] >= 0 and M[1, 1] >= 0
    assert M[0, 1] ** 2 <= M[0, 0] * M[1, 1] * (1 + 1e-8) + 1e-300
