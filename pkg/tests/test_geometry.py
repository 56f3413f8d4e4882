import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from jumpips.geometry import (Configuration, Domain, add_remove, apply_move, birth, count_in_ball, death,
                              from_csv, lattice_configuration, to_csv)

D1 = Domain(1, 2.0)


def conf(*xs, dom=D1):
    return Configuration(dom, [[x] for x in xs])


def test_single_particle_relocation():
    assert apply_move(conf(0.0), 0, [1.0]) == conf(1.0)


def test_move_on_empty_configuration_is_an_argument_error():
    with pytest.raises(IndexError):
        apply_move(conf(), 0, [1.0])


def test_inverse_move_restores_configuration():
    xi = conf(0.0, 1.0)
    moved = apply_move(xi, 1, [0.5])
    assert moved == conf(0.0, 0.5)
    assert apply_move(moved, 1, [1.0]) == xi


def test_birth_death_examples():
    assert birth(conf(), [0.0]) == conf(0.0)
    assert death(conf(0.0), 0) == conf()
    grown = add_remove(conf(0.0), "birth", [1.0])
    assert add_remove(grown, "death", 1) == conf(0.0)


def test_death_on_empty_raises():
    with pytest.raises(ValueError):
        death(conf(), 0)


def test_count_in_ball_examples():
    assert count_in_ball(conf(), 3.0) == 0
    assert count_in_ball(conf(0.0, 1.5), 1.0) == 1
    assert count_in_ball(conf(0.0, 1.5), 2.0) == 2


def test_reject_and_reflect_boundaries():
    xi = conf(1.5)
    assert apply_move(xi, 0, [2.5]) == xi
    refl = Configuration(Domain(1, 2.0, "reflect"), [[1.5]])
    assert apply_move(refl, 0, [2.5]).points[0, 0] == pytest.approx(1.5)


def test_points_outside_box_rejected():
    with pytest.raises(ValueError):
        conf(3.0)
    with pytest.raises(ValueError):
        Domain(0, 1.0)
    with pytest.raises(ValueError):
        Domain(1, 1.0, "periodic")


def test_csv_round_trip():
    xi = Configuration(Domain(2, 3.0), [[0.1, -2.0], [1.0 / 3.0, 2.5]])
    text = to_csv(xi, "config_hash=abc seed=1")
    assert text.startswith("# config_hash=abc seed=1\n")
    assert from_csv(xi.domain, text) == xi


def test_lattice_configuration_inside_and_distinct():
    for d, n in ((1, 5), (2, 7)):
        xi = lattice_configuration(Domain(d, 4.0), n)
        assert xi.n == n
        assert len({tuple(p) for p in xi.points}) == n


points_1d = st.lists(st.floats(-2.0, 2.0, allow_nan=False), min_size=1, max_size=8)


@settings(max_examples=200, deadline=None)
@given(points_1d, st.data())
def test_move_preserves_count(xs, data):
    xi = conf(*xs)
    i = data.draw(st.integers(0, len(xs) - 1))
    y = data.draw(st.floats(-3.0, 3.0, allow_nan=False))
    assert apply_move(xi, i, [y]).n == xi.n


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(-2.0, 2.0, allow_nan=False), max_size=8), st.floats(0, 3), st.floats(0, 3))
def test_ball_count_monotone(xs, r1, r2):
    r1, r2 = sorted((r1, r2))
    xi = conf(*xs)
    assert count_in_ball(xi, r1) <= count_in_ball(xi, r2)


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(-2.0, 2.0, allow_nan=False), max_size=8), st.floats(-2.0, 2.0), st.data())
def test_add_then_remove_is_identity_on_multisets(xs, y, data):
    xi = conf(*xs)
    grown = birth(xi, [y])
    # remove any copy of y, not necessarily the last label
    hits = np.nonzero(grown.points[:, 0] == y)[0]
    k = int(data.draw(st.sampled_from(list(hits))))
    assert death(grown, k).same_multiset(xi)
