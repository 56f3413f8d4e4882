"""Adaptive integration over jump displacements from a point in the box.

All integrals have the form

    int_{r_min <= |u| <= r_max} g(x + u, |u|) du

restricted to destinations inside the box (or folded back into it).  The
radial variable is integrated in s = log r, which flattens the r^(-d-alpha)
singularity, and every output component is integrated on the same nodes.
Supported for d = 1 and d = 2.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad_vec

from .geometry import Domain

DEFAULT_RTOL = 1e-8
DEFAULT_ATOL = 1e-12


class QuadratureError(RuntimeError):
    def __init__(self, message: str, report: dict):
        super().__init__(f"{message}: {report}")
        self.report = report


@dataclass(frozen=True)
class Tolerance:
    rtol: float = DEFAULT_RTOL
    atol: float = DEFAULT_ATOL
    limit: int = 4000


def _quad(f, a, b, points, tol: Tolerance, what: str):
    pts = sorted(p for p in set(points) if a < p < b)
    res, err, info = quad_vec(f, a, b, epsabs=tol.atol, epsrel=tol.rtol, norm="max",
                              limit=tol.limit, points=pts or None, full_output=True, quadrature="gk15")
    res = np.atleast_1d(np.asarray(res, dtype=float))
    if info.status != 0 or not np.all(np.isfinite(res)):
        raise QuadratureError(f"{what} did not converge", {
            "status": int(info.status), "message": getattr(info, "message", ""),
            "error_estimate": float(err), "interval": (a, b), "rtol": tol.rtol, "atol": tol.atol,
            "subintervals": int(getattr(info, "intervals", np.zeros((0, 2))).shape[0])})
    return res, float(err)


def displacement_integral(x, domain: Domain, r_min: float, func, n_out: int, *,
                          r_max: float | None = None, fold: bool = False, kinks=(),
                          tol: Tolerance = Tolerance()) -> np.ndarray:
    """Integrate ``func(Y, R) -> (k, n_out)`` over destinations Y = x + u.

    ``fold`` maps destinations outside the box back by reflection (they are
    dropped otherwise).  ``kinks`` lists points where the integrand may be
    non-smooth; their distances from x become radial breakpoints.
    """
    x = np.asarray(x, dtype=float).reshape(domain.dimension)
    d = domain.dimension
    L = domain.half_width
    r_max = domain.diameter if r_max is None else r_max
    kinks = np.asarray(kinks, dtype=float).reshape(-1, d) if len(kinks) else np.zeros((0, d))
    kink_r = np.linalg.norm(kinks - x, axis=1) if kinks.shape[0] else np.zeros(0)
    lo = math.log(r_min)

    if d == 1:
        right = r_max if fold else min(r_max, L - x[0])
        left = r_max if fold else min(r_max, x[0] + L)
        top = max(right, left)
        if top <= r_min:
            return np.zeros(n_out)

        def g(s):
            r = math.exp(s)
            ys = []
            if r <= right:
                ys.append(x[0] + r)
            if r <= left:
                ys.append(x[0] - r)
            if not ys:
                return np.zeros(n_out)
            Y = np.array(ys)[:, None]
            if fold:
                Y = domain.fold(Y)
            return r * np.sum(func(Y, np.full(len(ys), r)), axis=0)

        breaks = [math.log(v) for v in (right, left, *kink_r) if v > r_min]
        return _quad(g, lo, math.log(top), breaks, tol, "radial integral")[0]

    if d != 2:
        raise ValueError("displacement quadrature supports d = 1 and d = 2")

    inner_tol = Tolerance(tol.rtol, tol.atol, tol.limit)

    def ray(theta):
        c, s_ = math.cos(theta), math.sin(theta)
        if fold:
            return r_max, c, s_
        t = r_max
        if c > 0:
            t = min(t, (L - x[0]) / c)
        elif c < 0:
            t = min(t, (-L - x[0]) / c)
        if s_ > 0:
            t = min(t, (L - x[1]) / s_)
        elif s_ < 0:
            t = min(t, (-L - x[1]) / s_)
        return t, c, s_

    def outer(theta):
        rho, c, s_ = ray(theta)
        if rho <= r_min:
            return np.zeros(n_out)
        direction = np.array([c, s_])

        def inner(s):
            r = math.exp(s)
            Y = (x + r * direction)[None, :]
            if fold:
                Y = domain.fold(Y)
            return r * r * func(Y, np.array([r]))[0]

        breaks = [math.log(v) for v in kink_r if v > r_min]
        return _quad(inner, lo, math.log(rho), breaks, inner_tol, "inner radial integral")[0]

    corners = np.array([[L, L], [-L, L], [-L, -L], [L, -L]])
    angles = [math.atan2(*(cn - x)[::-1]) % (2.0 * math.pi) for cn in corners]
    angles += [math.atan2(*(k - x)[::-1]) % (2.0 * math.pi) for k in kinks if np.any(k != x)]
    return _quad(outer, 0.0, 2.0 * math.pi, angles, tol, "angular integral")[0]
