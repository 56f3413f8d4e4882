"""Detailed-balance jump rates and Glauber birth/death rates.

The jump rate for moving particle i from x to y is

    c(xi, x; y) = nu(x, y) + nu(y, x) * exp(-Delta),

with Delta = H(xi^{xy}) - H(xi).  Against the weight exp(-H) this satisfies
c(xi, x; y) e^{-H(xi)} = c(xi^{xy}, y; x) e^{-H(xi^{xy})} for any kernel.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _core
from .geometry import Configuration, Domain, apply_move, birth
from .kernels import KernelSpec
from .potentials import PotentialSpec, compiled_args, hamiltonian, local_energy

RATE_MODES = {
    "gibbs_closed_form": _core.RATE_GIBBS,
    "free": _core.RATE_FREE,
    "ginibre_truncated": _core.RATE_GINIBRE,
}


@dataclass(frozen=True)
class RateSpec:
    kernel: KernelSpec = KernelSpec()
    potential: PotentialSpec = PotentialSpec()
    mode: str = "gibbs_closed_form"
    ginibre_radius: float = math.inf

    def __post_init__(self):
        if self.mode not in RATE_MODES:
            raise ValueError(f"rate mode must be one of {sorted(RATE_MODES)}, got {self.mode!r}")
        if self.mode == "free" and (self.potential.pair != "zero" or self.potential.self_kind != "zero"):
            raise ValueError("free mode requires a zero pair and self potential")
        if not self.ginibre_radius > 0:
            raise ValueError("ginibre_radius must be positive")

    @property
    def mode_code(self) -> int:
        return RATE_MODES[self.mode]


def _prepare(spec: RateSpec, xi: Configuration, i: int, y):
    if not (0 <= i < xi.n):
        raise IndexError(f"particle index {i} out of range for {xi.n} particles")
    y = np.asarray(y, dtype=float).reshape(xi.dimension)
    x = xi.points[i]
    if np.array_equal(x, y):
        raise ValueError("jump rate is undefined for y == x_i")
    return x, y


def reverse_factor(spec: RateSpec, xi: Configuration, i: int, y) -> tuple[float, float]:
    """(exp(-Delta), Delta) for the move of particle i to y under the rate mode."""
    x, y = _prepare(spec, xi, i, y)
    pot, tlo, tstep, tvals = compiled_args(spec.potential, xi.domain)
    fac, delta = _core.reverse_factor(spec.mode_code, np.ascontiguousarray(xi.points), xi.n, i, y,
                                      pot, tlo, tstep, tvals, spec.ginibre_radius)
    return float(fac), float(delta)


def jump_rate(spec: RateSpec, xi: Configuration, i: int, y, exclude_inadmissible: bool = False) -> float:
    """c(xi, x_i; y).

    An inadmissible destination (Delta = +inf) leaves only the forward term
    nu(x_i, y); with ``exclude_inadmissible`` the rate is 0 instead, which is
    what the simulators use so that the chain never enters H = +inf.
    """
    x, y = _prepare(spec, xi, i, y)
    d = xi.dimension
    kp = spec.kernel.packed(d)
    nu_f = float(_core.kernel_value(kp, d, x, y))
    if spec.mode == "free":
        return nu_f + float(_core.kernel_value(kp, d, y, x))
    fac, delta = reverse_factor(spec, xi, i, y)
    if delta == math.inf:
        return 0.0 if exclude_inadmissible else nu_f
    return nu_f + float(_core.kernel_value(kp, d, y, x)) * fac


def log_jump_rate(spec: RateSpec, xi: Configuration, i: int, y) -> float:
    """log c(xi, x_i; y) computed without overflow for large energy drops."""
    x, y = _prepare(spec, xi, i, y)
    d = xi.dimension
    kp = spec.kernel.packed(d)
    nu_f = float(_core.kernel_value(kp, d, x, y))
    nu_b = float(_core.kernel_value(kp, d, y, x))
    with np.errstate(divide="ignore"):
        lf, lb = np.log(nu_f), np.log(nu_b)
    if spec.mode == "free":
        return float(np.logaddexp(lf, lb))
    _, delta = reverse_factor(spec, xi, i, y)
    if delta == math.inf:
        return float(lf)
    return float(np.logaddexp(lf, lb - delta))


def detailed_balance_residual(spec: RateSpec, xi: Configuration, i: int, y) -> float | None:
    """Relative flux mismatch |c e^{-H} - c' e^{-H'}| / max(fluxes).

    Fluxes are compared in log space.  Returns None (skipped) when either
    energy is infinite or the move leaves the box under rejection.
    """
    _, y = _prepare(spec, xi, i, y)
    if not xi.domain.contains(y):
        return None
    after = apply_move(xi, i, y)
    h0 = hamiltonian(spec.potential, xi)
    h1 = hamiltonian(spec.potential, after)
    if not (math.isfinite(h0) and math.isfinite(h1)):
        return None
    l0 = log_jump_rate(spec, xi, i, y) - h0
    l1 = log_jump_rate(spec, after, i, xi.points[i]) - h1
    if l0 == l1:
        return 0.0
    if l0 == -math.inf or l1 == -math.inf:
        return 1.0
    return float(-math.expm1(-abs(l0 - l1)))


def ginibre_product(xi: Configuration, i: int, y, r_trunc: float) -> float:
    """prod over j != i with |x_j| < r_trunc of |y - x_j|^2 / |x_i - x_j|^2."""
    y = np.asarray(y, dtype=float).reshape(xi.dimension)
    x = xi.points[i]
    prod = 1.0
    for j, xj in enumerate(xi.points):
        if j == i or np.linalg.norm(xj) >= r_trunc:
            continue
        den = float(np.sum((x - xj) ** 2))
        num = float(np.sum((y - xj) ** 2))
        if den == 0.0 or num == 0.0:
            raise ValueError(f"particle {j} coincides with the jumping particle or its destination")
        prod *= num / den
    return prod


def ginibre_truncated_rate(spec: RateSpec, xi: Configuration, i: int, y) -> float:
    """nu + nu * (finite product over particles inside r_trunc); an approximation of
    the infinite-volume limit with no convergence guarantee."""
    if xi.dimension != 2:
        raise ValueError("the truncated Ginibre rate is defined in d = 2")
    x, y = _prepare(spec, xi, i, y)
    prod = ginibre_product(xi, i, y, spec.ginibre_radius)
    kp = spec.kernel.packed(2)
    return float(_core.kernel_value(kp, 2, x, y)) + float(_core.kernel_value(kp, 2, y, x)) * prod


def glauber_rates(potential: PotentialSpec, xi: Configuration, op: str, arg, activity: float = 1.0) -> float:
    """Death rate 1 per particle; birth rate density z * exp(-local energy at y)."""
    if not activity > 0:
        raise ValueError("activity must be positive")
    if op == "death":
        if not (0 <= arg < xi.n):
            raise IndexError(f"particle index {arg} out of range for {xi.n} particles")
        return 1.0
    if op == "birth":
        e = local_energy(potential, xi, arg)
        return 0.0 if e == math.inf else activity * math.exp(-e)
    raise ValueError(f"op must be 'birth' or 'death', got {op!r}")


def grand_canonical_residual(potential: PotentialSpec, xi: Configuration, y, activity: float = 1.0) -> float | None:
    """Relative mismatch of b(xi, y) w(xi) and 1 * w(xi + y), w = z^n e^{-H}.

    Weights are densities against the Lebesgue-Poisson measure, so the n!
    of the unordered measure cancels against the labelled one.
    """
    grown = birth(xi, y)
    h0 = hamiltonian(potential, xi)
    h1 = hamiltonian(potential, grown)
    if not (math.isfinite(h0) and math.isfinite(h1)):
        return None
    lw0 = xi.n * math.log(activity) - h0
    lw1 = grown.n * math.log(activity) - h1
    # log of birth flux: log z - E_loc(y) + log w(xi)
    l0 = math.log(activity) - local_energy(potential, xi, y) + lw0
    return -math.expm1(-abs(l0 - lw1))


def random_move_case(domain: Domain, n: int, rng: np.random.Generator, min_separation: float = 0.5,
                     max_tries: int = 10_000):
    """Random (xi, i, y) with all points, and y, at least ``min_separation`` apart (i = -1 if n = 0).

    Near-coincident pairs make H so large that e^{-H} flux comparisons are
    dominated by rounding, so balance checks draw from this separated law.
    """
    pts = []
    for _ in range(max_tries):
        p = domain.uniform(rng, 1)[0]
        if all(np.linalg.norm(p - q) >= min_separation for q in pts):
            pts.append(p)
            if len(pts) == n + 1:
                break
    else:
        raise ValueError("could not place separated points; lower min_separation or n")
    pts = np.array(pts)
    i = int(rng.integers(0, n)) if n else -1
    return Configuration(domain, pts[:n]), i, pts[n]
