"""Finite configurations of labelled points in a box [-L, L]^d.

A :class:`Configuration` is an immutable ordered list of points.  The order
is a labelling; symmetric comparisons go through :meth:`Configuration.same_multiset`.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

BOUNDARY_MODES = ("reject", "reflect")


@dataclass(frozen=True)
class Domain:
    dimension: int
    half_width: float
    boundary_mode: str = "reject"

    def __post_init__(self):
        if int(self.dimension) != self.dimension or self.dimension < 1:
            raise ValueError(f"dimension must be a positive integer, got {self.dimension!r}")
        if not (self.half_width > 0 and math.isfinite(self.half_width)):
            raise ValueError(f"half_width must be positive and finite, got {self.half_width!r}")
        if self.boundary_mode not in BOUNDARY_MODES:
            raise ValueError(f"boundary_mode must be one of {BOUNDARY_MODES}, got {self.boundary_mode!r}")
        object.__setattr__(self, "dimension", int(self.dimension))
        object.__setattr__(self, "half_width", float(self.half_width))

    @property
    def volume(self) -> float:
        return (2.0 * self.half_width) ** self.dimension

    @property
    def diameter(self) -> float:
        """Largest possible distance between two points of the box."""
        return 2.0 * self.half_width * math.sqrt(self.dimension)

    def contains(self, y) -> bool:
        y = np.asarray(y, dtype=float)
        return bool(np.all(np.abs(y) <= self.half_width))

    def fold(self, y) -> np.ndarray:
        """Reflect a point back into the box across its faces."""
        L = self.half_width
        t = np.mod(np.asarray(y, dtype=float) + L, 4.0 * L)
        t = np.where(t > 2.0 * L, 4.0 * L - t, t)
        return t - L

    def uniform(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return rng.uniform(-self.half_width, self.half_width, size=(n, self.dimension))


class Configuration:
    """Immutable labelled point configuration inside a :class:`Domain`."""

    __slots__ = ("_points", "domain")

    def __init__(self, domain: Domain, points=()):
        pts = np.array(points, dtype=float)
        if pts.size == 0:
            pts = np.zeros((0, domain.dimension))
        if pts.ndim == 1:
            if domain.dimension != 1:
                raise ValueError("flat point list is only accepted in dimension 1")
            pts = pts[:, None]
        if pts.ndim != 2 or pts.shape[1] != domain.dimension:
            raise ValueError(f"points must have shape (n, {domain.dimension}), got {pts.shape}")
        if not np.all(np.isfinite(pts)):
            raise ValueError("points must be finite")
        if pts.shape[0] and np.any(np.abs(pts) > domain.half_width):
            bad = int(np.argmax(np.any(np.abs(pts) > domain.half_width, axis=1)))
            raise ValueError(f"point {bad} at {pts[bad].tolist()} lies outside the box")
        pts.setflags(write=False)
        self._points = pts
        self.domain = domain

    @property
    def points(self) -> np.ndarray:
        return self._points

    @property
    def n(self) -> int:
        return self._points.shape[0]

    @property
    def dimension(self) -> int:
        return self.domain.dimension

    def __len__(self):
        return self.n

    def __iter__(self):
        return iter(self._points)

    def __getitem__(self, i):
        return self._points[i]

    def __eq__(self, other):
        if not isinstance(other, Configuration):
            return NotImplemented
        return self.domain == other.domain and np.array_equal(self._points, other._points)

    def __hash__(self):
        return hash((self.domain, self._points.tobytes()))

    def __repr__(self):
        return f"Configuration(n={self.n}, d={self.dimension}, points={self._points.tolist()})"

    def same_multiset(self, other: "Configuration") -> bool:
        """Equality as point multisets, ignoring labels."""
        if self.n != other.n or self.dimension != other.dimension:
            return False
        a = self._points[np.lexsort(self._points.T[::-1])]
        b = other._points[np.lexsort(other._points.T[::-1])]
        return bool(np.array_equal(a, b))

    def with_points(self, points) -> "Configuration":
        return Configuration(self.domain, points)


def _check_index(xi: Configuration, i: int):
    if not (0 <= i < xi.n):
        raise IndexError(f"particle index {i} out of range for {xi.n} particles")


def apply_move(xi: Configuration, i: int, y) -> Configuration:
    """Relocate particle ``i`` to ``y`` (the move xi^{x_i y}).

    Under ``reject`` a destination outside the box leaves the configuration
    unchanged; under ``reflect`` it is folded back into the box.
    """
    _check_index(xi, i)
    y = np.asarray(y, dtype=float).reshape(xi.dimension)
    if not xi.domain.contains(y):
        if xi.domain.boundary_mode == "reject":
            return xi
        y = xi.domain.fold(y)
    pts = xi.points.copy()
    pts[i] = y
    return Configuration(xi.domain, pts)


def birth(xi: Configuration, y) -> Configuration:
    y = np.asarray(y, dtype=float).reshape(xi.dimension)
    if not xi.domain.contains(y):
        raise ValueError(f"birth location {y.tolist()} lies outside the box")
    return Configuration(xi.domain, np.vstack([xi.points, y[None, :]]))


def death(xi: Configuration, i: int) -> Configuration:
    if xi.n == 0:
        raise ValueError("death on an empty configuration")
    _check_index(xi, i)
    return Configuration(xi.domain, np.delete(xi.points, i, axis=0))


def add_remove(xi: Configuration, op: str, arg) -> Configuration:
    """``op='birth'`` adds the point ``arg``; ``op='death'`` removes index ``arg``."""
    if op == "birth":
        return birth(xi, arg)
    if op == "death":
        return death(xi, arg)
    raise ValueError(f"op must be 'birth' or 'death', got {op!r}")


def count_in_ball(xi: Configuration, r: float) -> int:
    """Number of points with Euclidean norm <= r."""
    if r < 0:
        raise ValueError("radius must be nonnegative")
    if xi.n == 0:
        return 0
    return int(np.count_nonzero(np.linalg.norm(xi.points, axis=1) <= r))


def to_csv(xi: Configuration, header_comment: str | None = None) -> str:
    """One row per particle, columns x1..xd, in label order."""
    buf = io.StringIO()
    if header_comment:
        buf.write(f"# {header_comment}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow([f"x{k + 1}" for k in range(xi.dimension)])
    for p in xi.points:
        w.writerow([repr(float(v)) for v in p])
    return buf.getvalue()


def from_csv(domain: Domain, text: str) -> Configuration:
    rows = [line for line in text.splitlines() if line and not line.startswith("#")]
    if not rows:
        raise ValueError("empty configuration CSV")
    header = rows[0].split(",")
    expected = [f"x{k + 1}" for k in range(domain.dimension)]
    if header != expected:
        raise ValueError(f"expected header {expected}, got {header}")
    pts = [[float(v) for v in line.split(",")] for line in rows[1:]]
    return Configuration(domain, pts)


def lattice_configuration(domain: Domain, n: int, spacing_fraction: float = 0.9) -> Configuration:
    """Evenly spread points, handy as an admissible initial state."""
    d = domain.dimension
    if n == 0:
        return Configuration(domain)
    per_side = math.ceil(n ** (1.0 / d))
    L = domain.half_width * spacing_fraction
    axis = np.linspace(-L, L, per_side + 2)[1:-1] if per_side > 1 else np.zeros(1)
    grid = np.stack(np.meshgrid(*([axis] * d), indexing="ij"), axis=-1).reshape(-1, d)
    return Configuration(domain, grid[:n])


def stack_points(configs: Sequence[Configuration] | Iterable[Configuration]) -> np.ndarray:
    """Stack equal-size configurations into an (m, n, d) array."""
    return np.stack([c.points for c in configs])
