"""Test functions on configurations, square fields, and the dyadic cutoff chi[a].

Functions of configurations here act on an (n, d) array of points (or a
:class:`Configuration`).  Objects that expose ``moved_values(points, i, Y)``
evaluate F after relocating particle i to each row of Y in one call, which
the quadrature integrands rely on.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .geometry import Configuration, Domain
from .kernels import KernelSpec, ball_volume, kernel_values
from .quadrature import Tolerance, displacement_integral


def _pts(xi) -> np.ndarray:
    if isinstance(xi, Configuration):
        return xi.points
    return np.asarray(xi, dtype=float)


class ConfigFunction:
    """Base class: subclasses implement ``evaluate``; ``moved_values`` falls back to a loop."""

    def evaluate(self, points: np.ndarray) -> float:
        raise NotImplementedError

    def __call__(self, xi) -> float:
        return self.evaluate(_pts(xi))

    def moved_values(self, points: np.ndarray, i: int, Y: np.ndarray) -> np.ndarray:
        out = np.empty(Y.shape[0])
        p = np.array(points, dtype=float)
        for k, y in enumerate(Y):
            p[i] = y
            out[k] = self.evaluate(p)
        return out

    def kinks(self, points: np.ndarray):
        return ()

    def __mul__(self, other: "ConfigFunction") -> "ProductFunction":
        return ProductFunction(self, other)


def monomials(ell: int, degree: int) -> list[tuple[int, ...]]:
    """Exponent tuples of total degree <= ``degree``, by degree then lexicographically descending."""
    out = []
    for total in range(degree + 1):
        out += sorted((e for e in itertools.product(range(total + 1), repeat=ell) if sum(e) == total),
                      reverse=True)
    return out


def bump(points: np.ndarray, center, radius: float) -> np.ndarray:
    """exp(1 - 1/(1 - |x-c|^2/rho^2)) inside the ball, 0 outside; peak value 1."""
    q = np.sum((np.atleast_2d(points) - np.asarray(center, dtype=float)) ** 2, axis=1) / radius ** 2
    out = np.zeros(q.shape[0])
    inside = q < 1.0
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - q[inside]))
    return out


@dataclass(frozen=True, eq=False)
class TestFunction(ConfigFunction):
    """F(xi) = Q(<phi_1, xi>, ..., <phi_l, xi>) with bump profiles phi_k.

    ``coefficients`` follow :func:`monomials` order for (l, degree).
    """

    centers: np.ndarray
    radii: np.ndarray
    coefficients: np.ndarray
    degree: int = 1
    max_degree: int = 6
    _exps: np.ndarray = field(init=False, repr=False)

    __test__ = False  # not a pytest class

    def __post_init__(self):
        c = np.atleast_2d(np.asarray(self.centers, dtype=float))
        r = np.atleast_1d(np.asarray(self.radii, dtype=float))
        coef = np.atleast_1d(np.asarray(self.coefficients, dtype=float))
        if c.shape[0] != r.shape[0]:
            raise ValueError("need one radius per bump center")
        if np.any(r <= 0):
            raise ValueError("bump radii must be positive")
        if not 0 <= self.degree <= self.max_degree:
            raise ValueError(f"degree must lie in [0, {self.max_degree}]")
        exps = np.array(monomials(c.shape[0], self.degree), dtype=int).reshape(-1, c.shape[0])
        if coef.shape[0] != exps.shape[0]:
            raise ValueError(f"expected {exps.shape[0]} coefficients for {c.shape[0]} bumps of degree "
                             f"{self.degree}, got {coef.shape[0]}")
        object.__setattr__(self, "centers", c)
        object.__setattr__(self, "radii", r)
        object.__setattr__(self, "coefficients", coef)
        object.__setattr__(self, "_exps", exps)

    @classmethod
    def linear(cls, center, radius: float) -> "TestFunction":
        """F = <phi, xi> for one bump."""
        return cls(np.atleast_2d(center), [radius], [0.0, 1.0], degree=1)

    @classmethod
    def constant(cls, value: float, d: int = 1) -> "TestFunction":
        return cls(np.zeros((1, d)), [1.0], [value], degree=0)

    def profiles(self, points: np.ndarray) -> np.ndarray:
        """(m, l) matrix of phi_k(points)."""
        points = np.atleast_2d(points)
        q = np.sum((points[:, None, :] - self.centers[None, :, :]) ** 2, axis=2) / self.radii ** 2
        out = np.zeros(q.shape)
        inside = q < 1.0
        out[inside] = np.exp(1.0 - 1.0 / (1.0 - q[inside]))
        return out

    def polynomial(self, s: np.ndarray) -> np.ndarray:
        """Q on rows of s, shape (m, l)."""
        s = np.atleast_2d(s)
        return np.prod(s[:, None, :] ** self._exps[None, :, :], axis=2) @ self.coefficients

    def sums(self, points: np.ndarray) -> np.ndarray:
        points = np.asarray(points, dtype=float)
        if points.shape[0] == 0:
            return np.zeros(self.centers.shape[0])
        return self.profiles(points).sum(axis=0)

    def evaluate(self, points: np.ndarray) -> float:
        return float(self.polynomial(self.sums(points))[0])

    def _rest_sums(self, points: np.ndarray, i: int) -> np.ndarray:
        # quadrature calls this once per node with the same (points, i)
        key = (points.tobytes(), points.shape, i)
        cache = self.__dict__.setdefault("_rest_cache", {})
        if key not in cache:
            if len(cache) > 64:
                cache.clear()
            keep = np.delete(points, i, axis=0)
            cache[key] = self.sums(keep)
        return cache[key]

    def moved_values(self, points: np.ndarray, i: int, Y: np.ndarray) -> np.ndarray:
        points = np.asarray(points, dtype=float)
        return self.polynomial(self._rest_sums(points, i)[None, :] + self.profiles(Y))


@dataclass(frozen=True, eq=False)
class ProductFunction(ConfigFunction):
    left: ConfigFunction
    right: ConfigFunction

    def evaluate(self, points):
        return self.left.evaluate(points) * self.right.evaluate(points)

    def moved_values(self, points, i, Y, memo=None):
        return _moved(self.left, points, i, Y, memo) * _moved(self.right, points, i, Y, memo)

    def kinks(self, points):
        return list(self.left.kinks(points)) + list(self.right.kinks(points))


def _moved(f: ConfigFunction, points, i, Y, memo: dict | None) -> np.ndarray:
    # shares factor evaluations between products within one quadrature node
    if memo is None:
        return f.moved_values(points, i, Y)
    key = id(f)
    if key not in memo:
        if isinstance(f, ProductFunction):
            memo[key] = f.moved_values(points, i, Y, memo)
        else:
            memo[key] = f.moved_values(points, i, Y)
    return memo[key]


def eval_polynomial(F: ConfigFunction, xi) -> float:
    return F(xi)


def discrete_gradient(F: ConfigFunction, xi, i: int, y) -> float:
    """F(xi^{x_i y}) - F(xi)."""
    points = _pts(xi)
    if not 0 <= i < points.shape[0]:
        raise IndexError(f"particle index {i} out of range for {points.shape[0]} particles")
    y = np.asarray(y, dtype=float).reshape(1, points.shape[1])
    return float(F.moved_values(points, i, y)[0] - F.evaluate(points))


def square_field_matrix(funcs: Sequence[ConfigFunction], kernel: KernelSpec, xi: Configuration,
                        tol: Tolerance = Tolerance()) -> np.ndarray:
    """Matrix D[F_a, F_b](xi) = 1/2 sum_i int dF_a dF_b nu(x_i; y) dy over the box.

    All entries share quadrature nodes, so pointwise inequalities between
    integrands carry over to the results up to rounding.
    """
    m = len(funcs)
    pts = np.ascontiguousarray(xi.points)
    iu, ju = np.triu_indices(m)
    base = np.array([f.evaluate(pts) for f in funcs])
    r_min = kernel.cutoff(xi.domain)
    acc = np.zeros(iu.shape[0])
    kinks = [k for f in funcs for k in f.kinks(pts)]
    for i in range(xi.n):
        x = pts[i]

        def integrand(Y, R, i=i, x=x):
            memo = {}
            grads = np.stack([_moved(f, pts, i, Y, memo) for f in funcs], axis=1) - base
            nu = kernel_values(kernel, x, Y)
            return grads[:, iu] * grads[:, ju] * nu[:, None]

        acc += displacement_integral(x, xi.domain, r_min, integrand, iu.shape[0], kinks=kinks, tol=tol)
    out = np.zeros((m, m))
    out[iu, ju] = 0.5 * acc
    out[ju, iu] = 0.5 * acc
    return out


def square_field(F: ConfigFunction, G: ConfigFunction, kernel: KernelSpec, xi: Configuration,
                 tol: Tolerance = Tolerance()) -> float:
    if F is G:
        return float(square_field_matrix([F], kernel, xi, tol)[0, 0])
    return float(square_field_matrix([F, G], kernel, xi, tol)[0, 1])


def dirichlet_energy(F: ConfigFunction, kernel: KernelSpec, sampler, n_samples: int | None = None,
                     seed: int = 0, tol: Tolerance = Tolerance()) -> tuple[float, float]:
    """Monte-Carlo mean of D[F, F] with its standard error.

    ``sampler`` is either a sequence of configurations or a callable
    ``rng -> Configuration`` drawn ``n_samples`` times.
    """
    if callable(sampler):
        rng = np.random.default_rng(seed)
        configs = [sampler(rng) for _ in range(n_samples)]
    else:
        configs = list(sampler)[: n_samples]
    if len(configs) < 2:
        raise ValueError("need at least two samples")
    vals = np.array([square_field(F, F, kernel, c, tol) for c in configs])
    return float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(len(vals)))


# --- dyadic cutoff ---------------------------------------------------------

@dataclass(frozen=True)
class CutoffSequence:
    """a_{n, r} = n * 2^{(d + kappa) r}, r >= 0."""

    n: int
    d: int
    kappa: float = 0.0

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("level n must be >= 1")
        if self.d < 1:
            raise ValueError("dimension must be >= 1")
        if self.kappa < 0:
            raise ValueError("kappa must be >= 0")

    def __call__(self, r: int) -> float:
        return self.n * 2.0 ** ((self.d + self.kappa) * r)


@dataclass(frozen=True)
class ConstantSequence:
    value: float

    def __call__(self, r: int) -> float:
        return float(self.value)


@dataclass(frozen=True)
class DoubledShift:
    """The sequence 2 a_{r+1} (as used in M[2 a_+])."""

    base: Callable[[int], float]

    def __call__(self, r: int) -> float:
        return 2.0 * self.base(r + 1)


def _sorted_norms(points: np.ndarray) -> np.ndarray:
    # stable sort keeps label order among ties
    return np.sort(np.linalg.norm(points, axis=1), kind="stable")


def _d_a_from_norms(norms: np.ndarray, a, max_r: int = 4096) -> float:
    N = norms.shape[0]
    total = 0.0
    for r in range(1, max_r + 1):
        ar = float(a(r))
        if ar >= N:
            # a is nondecreasing, so J stays empty from here on
            break
        R = 2.0 ** r
        half = 0.5 * R
        start = int(math.floor(ar))       # 0-based index of the first j with j > a_r
        stop = int(np.searchsorted(norms, R, side="right"))
        for j in range(start, stop):
            total += min(R - norms[j], half) / (half * ar)
            if total >= 1.0:
                return total
    return total


def d_a(xi, a) -> float:
    """Weighted excess count over the dyadic balls; summation stops once it reaches 1."""
    points = _pts(xi)
    if points.shape[0] == 0:
        return 0.0
    return _d_a_from_norms(_sorted_norms(points), a)


def rho_cut(t: float) -> float:
    return 1.0 if t < 0 else (1.0 - t if t <= 1.0 else 0.0)


def chi_a(xi, a) -> float:
    return rho_cut(d_a(xi, a))


def _cover_level(points: np.ndarray, domain: Domain | None) -> int:
    reach = float(np.max(np.linalg.norm(points, axis=1))) if points.shape[0] else 0.0
    if domain is not None:
        reach = max(reach, domain.half_width * math.sqrt(domain.dimension))
    return max(1, math.ceil(math.log2(reach)) if reach > 1.0 else 1)


def in_M_a(xi, a) -> bool:
    """xi(U_{2^r}) <= a_r for every r up to the level whose ball covers the box."""
    points = _pts(xi)
    domain = xi.domain if isinstance(xi, Configuration) else None
    norms = _sorted_norms(points) if points.shape[0] else np.zeros(0)
    for r in range(1, _cover_level(points, domain) + 1):
        if np.searchsorted(norms, 2.0 ** r, side="right") > a(r):
            return False
    return True


def chi_rows(norms: np.ndarray, a, max_r: int = 4096) -> np.ndarray:
    """chi[a] for each row of an (m, N) array of point norms.

    Same value as :func:`chi_a` row by row; the d_a sum is not truncated at 1
    since rho vanishes there anyway.
    """
    norms = np.sort(np.atleast_2d(np.asarray(norms, dtype=float)), axis=1, kind="stable")
    m, N = norms.shape
    total = np.zeros(m)
    if N == 0:
        return np.ones(m)
    idx = np.arange(N)
    for r in range(1, max_r + 1):
        ar = float(a(r))
        if ar >= N:
            break
        R = 2.0 ** r
        half = 0.5 * R
        take = (idx[None, :] >= math.floor(ar)) & (norms <= R)
        contrib = np.where(take, np.minimum(R - norms, half) / (half * ar), 0.0).sum(axis=1)
        total += contrib
        if np.all(total >= 1.0):
            break
    return np.clip(1.0 - total, 0.0, 1.0)


@dataclass(frozen=True, eq=False)
class CutoffFunction(ConfigFunction):
    """chi[a] as a function of configurations."""

    a: Callable[[int], float]

    def evaluate(self, points):
        return chi_a(points, self.a)

    def moved_values(self, points, i, Y):
        norms = np.linalg.norm(points, axis=1)
        rows = np.repeat(norms[None, :], Y.shape[0], axis=0)
        rows[:, i] = np.linalg.norm(Y, axis=1)
        return chi_rows(rows, self.a)

    def kinks(self, points):
        # |y| crossing a dyadic radius or another particle's norm
        if points.shape[1] != 1:
            return ()
        reach = max(1, _cover_level(points, None) + 1)
        rad = [2.0 ** m for m in range(0, reach + 1)] + list(np.abs(points[:, 0]))
        return [[s * v] for v in rad for s in (1.0, -1.0)] + [[0.0]]


def _uniform_shell(rng: np.random.Generator, d: int, k: int, r_lo: float, r_hi: float) -> np.ndarray:
    u = rng.standard_normal((k, d))
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    r = (rng.uniform(r_lo ** d, r_hi ** d, size=k)) ** (1.0 / d)
    return u * r[:, None]


def sample_in_M(a, d: int, rng: np.random.Generator, levels: int = 4, cap: int = 2000,
                tight: float = 0.3) -> np.ndarray:
    """Random points with xi(U_{2^r}) <= a_r for every r >= 1.

    Points are placed shell by shell (U_2, then U_{2^r} minus U_{2^(r-1)});
    with probability ``tight`` a shell takes the largest admissible count, so
    boundary cases with equality are exercised.
    """
    pts, total = [], 0
    for r in range(1, levels + 1):
        room = int(math.floor(a(r))) - total
        room = max(0, min(room, cap - total))
        k = room if rng.random() < tight else int(rng.integers(0, room + 1))
        lo = 0.0 if r == 1 else 2.0 ** (r - 1)
        pts.append(_uniform_shell(rng, d, k, lo, 2.0 ** r))
        total += k
    return np.concatenate(pts) if pts else np.zeros((0, d))


def sample_outside_M2(a, d: int, rng: np.random.Generator, cap: int = 5000, extra: int = 20) -> np.ndarray:
    """Random points with xi(U_{2^r0}) >= 2 a_{r0+1} + 1 for some r0 >= 1."""
    choices = [r for r in range(1, 6) if 2 * a(r + 1) + 1 <= cap]
    if not choices:
        raise ValueError("sequence too large for the point cap")
    r0 = int(rng.choice(choices))
    k = int(math.floor(2 * a(r0 + 1))) + 1 + int(rng.integers(0, extra + 1))
    inner = _uniform_shell(rng, d, k, 0.0, 2.0 ** r0)
    outer = _uniform_shell(rng, d, int(rng.integers(0, extra + 1)), 2.0 ** r0, 2.0 ** (r0 + 2))
    pts = np.concatenate([inner, outer])
    return pts[rng.permutation(pts.shape[0])]


# --- key-lemma sums -------------------------------------------------------

class BoundDivergence(ArithmeticError):
    pass


@dataclass
class BoundReport:
    n: int
    d: int
    kappa: float
    alpha: float
    sum_c2: float
    bound_c2: float
    sum_c32: float
    bound_c32: float
    sum_c42: float
    intermediate_c42: float
    bound_c42: float
    terms_used: dict

    # closed forms are attained with equality at n = 1, so allow rounding
    slack: float = 1e-12

    def checks(self) -> dict:
        s = 1.0 + self.slack
        return {
            "c2": self.sum_c2 <= self.bound_c2 * s,
            "c32": self.sum_c32 <= self.bound_c32 * s,
            "c42": bool(self.sum_c42 <= self.intermediate_c42 * s and self.intermediate_c42 <= self.bound_c42 * s),
            "finite": all(math.isfinite(v) for v in (self.sum_c2, self.sum_c32, self.sum_c42)),
        }

    @property
    def passed(self) -> bool:
        return all(self.checks().values())


def _geometric_sum(log2_terms: np.ndarray, what: str) -> float:
    terms = np.exp2(log2_terms)
    tail = terms[-1]
    if tail >= 1e-16 or np.any(np.diff(terms[len(terms) // 2:]) > 0):
        raise BoundDivergence(f"{what}: terms are not decreasing to below 1e-16 (last term {tail:g})")
    return float(np.sum(terms[::-1]))


def bound_sums(n: int, d: int, kappa: float, alpha: float | None = None, max_terms: int = 4096) -> BoundReport:
    """Numeric sums behind the key-lemma constants and their closed-form bounds.

    ``alpha`` is the tail exponent of the envelope (needs alpha > kappa for
    the double sum); it defaults to kappa + 1.
    """
    if n < 1 or kappa < 0:
        raise ValueError("need n >= 1 and kappa >= 0")
    alpha = kappa + 1.0 if alpha is None else float(alpha)
    D = d + kappa
    ln = math.log2(n)

    def log2_a(r):
        return ln + D * np.asarray(r, dtype=float)

    def log2_2a_plus_1(r):
        return np.logaddexp2(1.0 + log2_a(np.asarray(r) + 1), 0.0)

    # single sums: enough terms for the decay rate to pass 1e-16
    R1 = int(min(max_terms, math.ceil(80.0 / min(D, D + 2.0)) + 8))
    r = np.arange(1, R1 + 1)
    sum_c2 = _geometric_sum(log2_2a_plus_1(r) - (2 * r - 4) - 2 * log2_a(r - 1), "C2 sum")
    sum_c32 = _geometric_sum(log2_2a_plus_1(r) - 2 * log2_a(r - 1), "C32 sum")
    h = 0.5
    bound_c2 = h ** (-2 * D - 3) / (1 - h ** (D + 2)) + h ** -2 / (1 - h ** (2 * (D + 1)))
    bound_c32 = h ** (-2 * D - 1) / (1 - h ** D) + 1 / (1 - h ** (2 * D))

    # double sum over r, l >= 1 with |l - r| > 1
    rate = min(alpha - kappa, alpha) if alpha > kappa else 0.0
    size = max_terms if rate <= 0 else int(min(max_terms, math.ceil(80.0 / rate) + 8))
    rr, ll = np.meshgrid(np.arange(1, size + 1), np.arange(1, size + 1), indexing="ij")
    lo, hi = np.minimum(rr, ll), np.maximum(rr, ll)
    K = 1.0 / (1.0 - 2.0 ** -D)
    # sum_{m=lo}^{hi} 1/a_m as an exact finite geometric series, in log2
    log2_inner = -ln - D * lo + np.log2(-np.expm1(-D * (hi - lo + 1) * math.log(2.0))) + math.log2(K)
    vd = ball_volume(d)
    log2_area = np.where(ll == 1, math.log2(vd) + d, math.log2(vd) + d * ll + math.log2(1 - 2.0 ** -d))
    common = log2_2a_plus_1(rr) + log2_area - (hi - 2) * (d + alpha)
    mask = np.abs(ll - rr) > 1
    lhs = np.where(mask, np.exp2(2 * log2_inner + common), 0.0)
    mid = np.where(mask, np.exp2(2 * (math.log2(K) - ln - D * lo) + common), 0.0)
    edge = max(lhs[-1, :].max(), lhs[:, -1].max())
    rows = lhs.sum(axis=1)
    if alpha <= kappa or edge >= 1e-16 or np.any(np.diff(rows[size // 2:]) > 0):
        raise BoundDivergence(f"C42 double sum does not converge for alpha={alpha}, kappa={kappa} "
                              f"(edge term {edge:g})")
    sum_c42 = float(np.sum(np.sort(lhs.ravel())))
    intermediate = float(np.sum(np.sort(mid.ravel())))
    c7 = K ** 2 * vd * 2.0 ** (D + 2 + 2 * (d + alpha))
    g7 = (2.0 ** -alpha / (1 - 2.0 ** -alpha)) * (2.0 ** -(D + alpha) / (1 - 2.0 ** -(D + alpha)))
    g8 = (2.0 ** -(alpha - kappa) / (1 - 2.0 ** -(alpha - kappa))) * (2.0 ** -(D + alpha) / (1 - 2.0 ** -(D + alpha)))
    return BoundReport(n, d, kappa, alpha, sum_c2, bound_c2, sum_c32, bound_c32, sum_c42, intermediate,
                       c7 * (g7 + g8), {"single": R1, "double": size})
