import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from jumpips.geometry import Configuration, Domain, apply_move
from jumpips.potentials import (DELTA_FLOOR, PotentialSpec, energy_indicator_lambda_q, hamiltonian, local_energy,
                                move_energy_delta, pair_potential, register_self_potential, self_potential)

D1 = Domain(1, 4.0)
LJ = PotentialSpec(pair="lennard_jones")
RIESZ2 = PotentialSpec(pair="riesz", a=2.0)


def conf(*xs):
    return Configuration(D1, [[x] for x in xs])


def test_pair_values():
    assert pair_potential(LJ, [0.0], [1.0]) == pytest.approx(0.0, abs=1e-15)
    assert pair_potential(RIESZ2, [0.0], [2.0]) == pytest.approx(0.25)
    assert pair_potential(PotentialSpec(pair="log", beta=2.0, sign=1), [0.0], [1.0]) == 0.0


def test_singular_repulsions_infinite_at_coincidence():
    assert pair_potential(RIESZ2, [0.5], [0.5]) == math.inf
    assert pair_potential(LJ, [0.5], [0.5]) == math.inf


def test_hamiltonian_examples():
    assert hamiltonian(LJ, conf()) == 0.0
    assert hamiltonian(PotentialSpec(), conf(1.0)) == 0.0
    assert hamiltonian(LJ, conf(0.0, 2 ** (1 / 6))) == pytest.approx(-0.25, rel=1e-12)


def test_hamiltonian_sub_box():
    xi = conf(-3.0, 0.0, 1.0)
    assert hamiltonian(RIESZ2, xi, A=([-0.5], [2.0])) == pytest.approx(1.0)


def test_quadratic_self_potential():
    spec = PotentialSpec(self_kind="quadratic", strength=2.0)
    assert hamiltonian(spec, conf(1.0, -2.0)) == pytest.approx(2.0 * (1.0 + 4.0))


def test_table_self_potential_interpolates():
    register_self_potential("test_linear", lambda x: 0.5 * x[:, 0])
    spec = PotentialSpec(self_kind="table", table="test_linear")
    assert self_potential(spec, [1.3], D1) == pytest.approx(0.65, abs=1e-12)
    with pytest.raises(ValueError):
        PotentialSpec(self_kind="table", table="not_registered")


def test_move_delta_examples():
    assert move_energy_delta(LJ, conf(0.5), 0, [2.0]) == 0.0
    assert move_energy_delta(RIESZ2, conf(0.0, 1.0), 1, [2.0]) == pytest.approx(-0.75)


def test_move_delta_out_of_infinite_state_is_floored():
    hc = PotentialSpec(pair="hard_core", radius=1.0)
    xi = conf(0.0, 0.2)
    assert move_energy_delta(hc, xi, 1, [3.0]) == DELTA_FLOOR < -100


def test_lambda_q_examples():
    assert energy_indicator_lambda_q(RIESZ2, conf(), 0.1) == 1
    assert energy_indicator_lambda_q(RIESZ2, conf(0.0, 1.0), 0.5) == 0
    assert energy_indicator_lambda_q(RIESZ2, conf(0.0, 1.0), 2.0) == 1


def test_riesz_needs_exponent_above_dimension():
    with pytest.raises(ValueError):
        hamiltonian(PotentialSpec(pair="riesz", a=0.5), conf(0.0, 1.0))
    with pytest.raises(ValueError):
        PotentialSpec(pair="hard_core")


def test_local_energy_matches_pair_sum():
    xi = conf(-1.0, 0.5, 2.0)
    expected = sum(pair_potential(LJ, [1.0], p) for p in xi.points)
    assert local_energy(LJ, xi, [1.0]) == pytest.approx(expected, rel=1e-13)


SPECS = [LJ, RIESZ2, PotentialSpec(pair="riesz", a=3.0), PotentialSpec(pair="log", beta=2.0),
         PotentialSpec(pair="log", beta=1.0, sign=1, self_kind="quadratic", strength=0.3),
         PotentialSpec(pair="hard_core", radius=0.3)]
coords = st.floats(-4.0, 4.0, allow_nan=False)


@settings(max_examples=200, deadline=None)
@given(st.sampled_from(SPECS), coords, coords)
def test_pair_symmetry(spec, x, y):
    assert pair_potential(spec, [x], [y]) == pair_potential(spec, [y], [x])


@settings(max_examples=300, deadline=None)
@given(st.sampled_from(SPECS), st.lists(coords, min_size=1, max_size=6, unique=True), coords, st.data())
def test_delta_matches_hamiltonian_difference(spec, xs, y, data):
    xi = conf(*xs)
    i = data.draw(st.integers(0, len(xs) - 1))
    h0 = hamiltonian(spec, xi)
    h1 = hamiltonian(spec, apply_move(xi, i, [y]))
    if not (math.isfinite(h0) and math.isfinite(h1)):
        return
    delta = move_energy_delta(spec, xi, i, [y])
    assert delta == pytest.approx(h1 - h0, rel=1e-12, abs=1e-12 * max(1.0, abs(h0), abs(h1)))


@settings(max_examples=200, deadline=None)
@given(st.sampled_from(SPECS), st.lists(coords, max_size=6), st.floats(0.01, 50), st.floats(0.01, 50))
def test_lambda_q_monotone(spec, xs, q1, q2):
    q1, q2 = sorted((q1, q2))
    xi = conf(*xs)
    assert energy_indicator_lambda_q(spec, xi, q1) <= energy_indicator_lambda_q(spec, xi, q2)


@settings(max_examples=200, deadline=None)
@given(st.lists(coords, max_size=6), st.floats(0.05, 1.5))
def test_hard_core_infinite_iff_close_pair(xs, radius):
    spec = PotentialSpec(pair="hard_core", radius=radius)
    pts = np.array(xs)
    close = any(abs(a - b) < radius for k, a in enumerate(pts) for b in pts[k + 1:])
    assert (hamiltonian(spec, conf(*xs)) == math.inf) == close
