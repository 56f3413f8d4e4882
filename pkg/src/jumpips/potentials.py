"""Self and pair potentials, Hamiltonians and energy differences.

Energies are extended reals: +inf marks an inadmissible configuration (hard-core
overlap, coincident points under a singular repulsion).  The Gibbs weight is
exp(-H) at unit inverse temperature; ``scale`` multiplies the pair potential.
"""
from __future__ import annotations

import functools
import logging
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import _core
from .geometry import Configuration, Domain

log = logging.getLogger(__name__)

PAIR_KINDS = {
    "zero": _core.PAIR_ZERO,
    "lennard_jones": _core.PAIR_LJ,
    "riesz": _core.PAIR_RIESZ,
    "log": _core.PAIR_LOG,
    "hard_core": _core.PAIR_HARD,
}
SELF_KINDS = {"zero": _core.SELF_ZERO, "quadratic": _core.SELF_QUADRATIC, "table": _core.SELF_TABLE}

# Large negative stand-in for an energy drop out of an infinite-energy state.
DELTA_FLOOR = _core.DELTA_FLOOR

_SELF_TABLES: dict[str, Callable[[np.ndarray], np.ndarray]] = {}


def register_self_potential(tag: str, func: Callable[[np.ndarray], np.ndarray]) -> None:
    """Make ``func`` available as ``PotentialSpec(self_kind='table', table=tag)``.

    ``func`` maps an (m, d) array of points to m finite values.  It is sampled
    once per domain onto a grid and evaluated by multilinear interpolation.
    """
    _SELF_TABLES[tag] = func
    if "_tabulate" in globals():
        _tabulate.cache_clear()


register_self_potential("cosine", lambda x: 1.0 - np.cos(0.5 * np.pi * x[:, 0]))
register_self_potential("radial_well", lambda x: np.minimum(np.sum(x * x, axis=1), 4.0))


@dataclass(frozen=True)
class PotentialSpec:
    pair: str = "zero"
    a: float | None = None
    beta: float = 2.0
    sign: int = -1
    radius: float | None = None
    scale: float = 1.0
    self_kind: str = "zero"
    strength: float = 0.0
    table: str | None = None
    table_resolution: int = 513

    def __post_init__(self):
        if self.pair not in PAIR_KINDS:
            raise ValueError(f"pair must be one of {sorted(PAIR_KINDS)}, got {self.pair!r}")
        if self.self_kind not in SELF_KINDS:
            raise ValueError(f"self_kind must be one of {sorted(SELF_KINDS)}, got {self.self_kind!r}")
        if not (self.scale > 0 and math.isfinite(self.scale)):
            raise ValueError("scale must be positive and finite")
        if self.pair == "riesz" and (self.a is None or not self.a > 0):
            raise ValueError("riesz potential needs an exponent a > d")
        if self.pair == "log":
            if self.beta < 0:
                raise ValueError("log coupling beta must be >= 0")
            if self.sign not in (-1, 1):
                raise ValueError("log sign must be +1 or -1")
        if self.pair == "hard_core" and (self.radius is None or not self.radius > 0):
            raise ValueError("hard_core potential needs radius > 0")
        if self.self_kind == "quadratic" and self.strength < 0:
            raise ValueError("quadratic strength must be >= 0")
        if self.self_kind == "table":
            if self.table not in _SELF_TABLES:
                raise ValueError(f"unknown self-potential table {self.table!r}; known: {sorted(_SELF_TABLES)}")
            if self.table_resolution < 2:
                raise ValueError("table_resolution must be >= 2")

    def check_dimension(self, d: int) -> None:
        if self.pair == "riesz" and not self.a > d:
            raise ValueError(f"riesz exponent a={self.a} must exceed the dimension d={d}")

    @property
    def pair_param(self) -> float:
        if self.pair == "riesz":
            return float(self.a)
        if self.pair == "log":
            return float(self.sign * self.beta)
        if self.pair == "hard_core":
            return float(self.radius)
        return 0.0

    def packed(self) -> np.ndarray:
        return np.array([PAIR_KINDS[self.pair], self.pair_param, self.scale,
                         SELF_KINDS[self.self_kind], self.strength], dtype=float)


@functools.lru_cache(maxsize=64)
def _tabulate(tag: str | None, d: int, L: float, m: int):
    if tag is None:
        return np.zeros(2), np.ones(2), np.zeros((2, 1))
    if d > 2:
        raise ValueError("tabulated self potentials support d <= 2")
    axis = np.linspace(-L, L, m)
    step = axis[1] - axis[0]
    if d == 1:
        vals = np.asarray(_SELF_TABLES[tag](axis[:, None]), dtype=float)[:, None]
        lo, st = np.array([-L, 0.0]), np.array([step, 1.0])
    else:
        g = np.stack(np.meshgrid(axis, axis, indexing="ij"), axis=-1).reshape(-1, 2)
        vals = np.asarray(_SELF_TABLES[tag](g), dtype=float).reshape(m, m)
        lo, st = np.array([-L, -L]), np.array([step, step])
    if not np.all(np.isfinite(vals)):
        raise ValueError(f"self-potential table {tag!r} produced non-finite values")
    for arr in (lo, st, vals):
        arr.setflags(write=False)
    return lo, st, vals


def tables(spec: PotentialSpec, domain: Domain):
    """Packed (tlo, tstep, tvals) for the compiled evaluators."""
    tag = spec.table if spec.self_kind == "table" else None
    return _tabulate(tag, domain.dimension, domain.half_width, spec.table_resolution)


def compiled_args(spec: PotentialSpec, domain: Domain):
    spec.check_dimension(domain.dimension)
    return (spec.packed(),) + tables(spec, domain)


def _pair_array(spec: PotentialSpec, r: np.ndarray) -> np.ndarray:
    """Vectorised pair potential; independent of the compiled scalar path."""
    r = np.asarray(r, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        if spec.pair == "zero":
            return np.zeros_like(r)
        if spec.pair == "hard_core":
            return np.where(r < spec.radius, np.inf, 0.0)
        if spec.pair == "lennard_jones":
            out = spec.scale * (r ** -12.0 - r ** -6.0)
        elif spec.pair == "riesz":
            out = spec.scale * r ** (-float(spec.a))
        else:
            out = spec.scale * spec.sign * spec.beta * np.log(r)
        zero = r == 0.0
        if np.any(zero):
            at_zero = -np.inf if (spec.pair == "log" and spec.sign * spec.beta > 0) else np.inf
            out = np.where(zero, at_zero, out)
        return np.where(np.isnan(out), np.inf, out)


def _self_array(spec: PotentialSpec, pts: np.ndarray, domain: Domain) -> np.ndarray:
    if spec.self_kind == "zero":
        return np.zeros(pts.shape[0])
    if spec.self_kind == "quadratic":
        return spec.strength * np.sum(pts * pts, axis=1)
    lo, st, vals = tables(spec, domain)
    return np.array([_core._table_value(lo, st, vals, p) for p in pts])


def _ext_sum(values: np.ndarray) -> float:
    if values.size == 0:
        return 0.0
    if np.any(values == np.inf):
        return math.inf
    return float(np.sum(values))


def pair_potential(spec: PotentialSpec, x, y) -> float:
    """Psi(x, y) as a function of |x - y|; +inf at coincidence for singular repulsions."""
    r = float(np.linalg.norm(np.asarray(x, dtype=float) - np.asarray(y, dtype=float)))
    return float(_pair_array(spec, np.array([r]))[0])


def self_potential(spec: PotentialSpec, x, domain: Domain) -> float:
    x = np.asarray(x, dtype=float).reshape(1, domain.dimension)
    return float(_self_array(spec, x, domain)[0])


def _in_box(pts: np.ndarray, A) -> np.ndarray:
    if A is None:
        return np.ones(pts.shape[0], dtype=bool)
    lo, hi = (np.asarray(v, dtype=float) for v in A)
    return np.all((pts >= lo) & (pts <= hi), axis=1)


def hamiltonian(spec: PotentialSpec, xi: Configuration, A=None) -> float:
    """Sum of Phi over points in A plus Psi over unordered pairs inside A.

    ``A`` is an optional sub-box ``(lower_corner, upper_corner)``; by default
    the whole domain.
    """
    spec.check_dimension(xi.dimension)
    pts = xi.points[_in_box(xi.points, A)]
    n = pts.shape[0]
    if n == 0:
        return 0.0
    terms = [_self_array(spec, pts, xi.domain)]
    if n > 1 and spec.pair != "zero":
        iu, ju = np.triu_indices(n, k=1)
        r = np.linalg.norm(pts[iu] - pts[ju], axis=1)
        terms.append(_pair_array(spec, r))
    return _ext_sum(np.concatenate(terms))


def local_energy(spec: PotentialSpec, xi: Configuration, y, skip: int | None = None) -> float:
    """Phi(y) + sum_j Psi(y, x_j) over particles other than ``skip``."""
    args = compiled_args(spec, xi.domain)
    y = np.asarray(y, dtype=float).reshape(xi.dimension)
    return float(_core.local_energy(np.ascontiguousarray(xi.points), xi.n,
                                    -1 if skip is None else skip, y, *args))


def move_energy_delta(spec: PotentialSpec, xi: Configuration, i: int, y) -> float:
    """H(xi^{x_i y}) - H(xi) from the O(n) terms touching particle i.

    +inf when the destination is inadmissible.  An infinite starting energy
    with a finite destination returns a large negative finite value and
    logs a warning.
    """
    if not (0 <= i < xi.n):
        raise IndexError(f"particle index {i} out of range for {xi.n} particles")
    after = local_energy(spec, xi, y, skip=i)
    if after == math.inf:
        return math.inf
    before = local_energy(spec, xi, xi.points[i], skip=i)
    if before == math.inf:
        log.warning("move out of an infinite-energy state; clamping delta to %g", DELTA_FLOOR)
        return DELTA_FLOOR
    return after - before


def energy_indicator_lambda_q(spec: PotentialSpec, xi: Configuration, q: float, probe=None) -> int:
    """Bounded-energy indicator: 1 iff every local energy (or the probe's) is within [-q, q]."""
    if not q > 0:
        raise ValueError("q must be positive")
    if probe is not None:
        return int(abs(local_energy(spec, xi, probe)) <= q)
    for i in range(xi.n):
        if not abs(local_energy(spec, xi, xi.points[i], skip=i)) <= q:
            return 0
    return 1


def pair_lower_bound(spec: PotentialSpec, max_distance: float) -> float:
    """inf of Psi(r) over 0 < r <= max_distance; raises if unbounded below."""
    if spec.pair in ("zero", "hard_core"):
        return 0.0
    if spec.pair == "lennard_jones":
        rstar = 2.0 ** (1.0 / 6.0)
        return float(_pair_array(spec, np.array([min(rstar, max_distance)]))[0])
    if spec.pair == "riesz":
        return float(_pair_array(spec, np.array([max_distance]))[0])
    if spec.sign * spec.beta > 0:
        raise ValueError("attractive log potential is unbounded below at coincidence")
    return float(_pair_array(spec, np.array([max_distance]))[0])


def self_lower_bound(spec: PotentialSpec, domain: Domain) -> float:
    if spec.self_kind == "zero":
        return 0.0
    if spec.self_kind == "quadratic":
        return 0.0
    return float(np.min(tables(spec, domain)[2]))


def energy_lower_bounds(spec: PotentialSpec, domain: Domain) -> np.ndarray:
    """(Phi lower bound, Psi lower bound) on the box, packed for the thinning loop."""
    return np.array([self_lower_bound(spec, domain), pair_lower_bound(spec, domain.diameter)])
