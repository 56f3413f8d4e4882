"""Estimators and condition checks on samples of point configurations."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from scipy import integrate, stats

from .geometry import Configuration, Domain
from .kernels import EnvelopeSpec


@dataclass
class DiagnosticsReport:
    """Named metrics (value, stderr), pass/fail flags with their evidence, and provenance."""

    metrics: dict = field(default_factory=dict)
    flags: dict = field(default_factory=dict)
    provenance: dict = field(default_factory=dict)

    def add_metric(self, name: str, value: float, stderr: float | None = None):
        self.metrics[name] = {"value": _plain(value), "stderr": _plain(stderr)}

    def add_flag(self, name: str, passed: bool, **evidence):
        self.flags[name] = {"passed": bool(passed), **{k: _plain(v) for k, v in evidence.items()}}

    @property
    def passed(self) -> bool:
        return all(f["passed"] for f in self.flags.values())

    def to_dict(self) -> dict:
        return {"passed": self.passed, "metrics": self.metrics, "flags": self.flags,
                "provenance": _plain(self.provenance)}

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)


def _plain(v):
    """Convert numpy scalars/arrays (and nested containers) to JSON-friendly values."""
    if isinstance(v, dict):
        return {str(k): _plain(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_plain(x) for x in v]
    if isinstance(v, np.ndarray):
        return _plain(v.tolist())
    if isinstance(v, (np.bool_, bool)):
        return bool(v)
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.floating, float)):
        v = float(v)
        return v if math.isfinite(v) else repr(v)
    return v


# --- correlation functions -------------------------------------------------

@dataclass
class BinnedIntensity:
    """Piecewise-constant intensity on a rectangular grid of cells."""

    edges: tuple
    values: np.ndarray
    stderr: np.ndarray
    n_samples: int

    @property
    def dimension(self) -> int:
        return len(self.edges)

    def centers(self) -> np.ndarray:
        mids = [0.5 * (e[1:] + e[:-1]) for e in self.edges]
        grids = np.meshgrid(*mids, indexing="ij")
        return np.stack([g.ravel() for g in grids], axis=1)

    def cell_volumes(self) -> np.ndarray:
        widths = np.meshgrid(*[np.diff(e) for e in self.edges], indexing="ij")
        return np.prod(np.stack(widths), axis=0)

    def value_at(self, x) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        idx = []
        for k, e in enumerate(self.edges):
            i = np.clip(np.searchsorted(e, x[:, k], side="right") - 1, 0, len(e) - 2)
            idx.append(i)
        out = self.values[tuple(idx)]
        inside = np.all([(x[:, k] >= e[0]) & (x[:, k] <= e[-1]) for k, e in enumerate(self.edges)], axis=0)
        return np.where(inside, out, 0.0)

    def scaled(self, factor: float) -> "BinnedIntensity":
        return BinnedIntensity(self.edges, self.values * factor, self.stderr * abs(factor), self.n_samples)


def _domain_of(samples) -> Domain:
    for s in samples:
        if isinstance(s, Configuration):
            return s.domain
    raise ValueError("samples must be Configuration objects (or pass domain=)")


def estimate_rho1(samples: Sequence[Configuration], bins: int | Sequence[int] = 8,
                  domain: Domain | None = None) -> BinnedIntensity:
    """Histogram estimate of the intensity: mean count per cell over cell volume."""
    samples = list(samples)
    if len(samples) < 2:
        raise ValueError("estimate_rho1 needs at least two samples")
    domain = domain or _domain_of(samples)
    d, L = domain.dimension, domain.half_width
    nb = [bins] * d if np.isscalar(bins) else list(bins)
    edges = tuple(np.linspace(-L, L, b + 1) for b in nb)
    counts = np.empty((len(samples), *nb))
    for k, s in enumerate(samples):
        pts = s.points if isinstance(s, Configuration) else np.asarray(s, dtype=float).reshape(-1, d)
        counts[k] = np.histogramdd(pts, bins=edges)[0] if pts.shape[0] else 0.0
    vol = BinnedIntensity(edges, np.zeros(nb), np.zeros(nb), 0).cell_volumes()
    m = len(samples)
    return BinnedIntensity(edges, counts.mean(axis=0) / vol, counts.std(axis=0, ddof=1) / math.sqrt(m) / vol, m)


def fit_growth_exponent(rho1: BinnedIntensity, r_min: float = 1.0) -> tuple[float, float]:
    """Slope of log rho1 against log |x| over cells with |center| >= r_min: (kappa, stderr).

    A translation invariant field gives 0 up to noise.
    """
    c = np.linalg.norm(rho1.centers(), axis=1)
    v = rho1.values.ravel()
    keep = (c >= r_min) & (v > 0)
    if keep.sum() < 3 or np.ptp(np.log(c[keep])) == 0:
        raise ValueError("need at least three occupied cells at distinct radii >= r_min")
    res = stats.linregress(np.log(c[keep]), np.log(v[keep]))
    return float(res.slope), float(res.stderr)


@dataclass
class PairCorrelation:
    r_edges: np.ndarray
    values: np.ndarray
    stderr: np.ndarray
    n_samples: int


def _shell_volume(d: int, a: float, b: float) -> float:
    from .kernels import ball_volume
    return ball_volume(d) * (b ** d - a ** d)


def estimate_rho2(samples: Sequence[Configuration], r_edges, domain: Domain | None = None) -> PairCorrelation:
    """Isotropic 2-correlation estimate from pair distances.

    Each ordered pair is weighted by 1/|W ∩ (W + u)| with u = x - y, the exact
    overlap volume of the box with its translate, which removes the edge bias
    for a translation invariant field.
    """
    samples = list(samples)
    if len(samples) < 2:
        raise ValueError("estimate_rho2 needs at least two samples")
    domain = domain or _domain_of(samples)
    r_edges = np.asarray(r_edges, dtype=float)
    d, L = domain.dimension, domain.half_width
    if r_edges[0] < 0 or r_edges[-1] >= 2.0 * L:
        raise ValueError("pair distance bins must lie in [0, 2L)")
    shells = np.array([_shell_volume(d, a, b) for a, b in zip(r_edges[:-1], r_edges[1:])])
    per = np.zeros((len(samples), len(shells)))
    for k, s in enumerate(samples):
        pts = s.points
        if pts.shape[0] < 2:
            continue
        u = pts[:, None, :] - pts[None, :, :]
        iu = np.triu_indices(pts.shape[0], 1)
        u = u[iu]
        r = np.linalg.norm(u, axis=1)
        overlap = np.prod(2.0 * L - np.abs(u), axis=1)
        ok = overlap > 0
        # each unordered pair counts twice
        per[k] = 2.0 * np.histogram(r[ok], bins=r_edges, weights=1.0 / overlap[ok])[0] / shells
    m = len(samples)
    return PairCorrelation(r_edges, per.mean(axis=0), per.std(axis=0, ddof=1) / math.sqrt(m), m)


# --- variance ratio --------------------------------------------------------

@dataclass
class VarianceCurve:
    radii: np.ndarray
    ratio: np.ndarray
    stderr: np.ndarray
    delta: float
    delta_stderr: float
    notes: list

    def rows(self) -> list[tuple[float, float, float]]:
        return [(float(r), float(v), float(e)) for r, v, e in zip(self.radii, self.ratio, self.stderr)]

    def to_csv(self) -> str:
        return "r,ratio,stderr\n" + "".join(f"{r!r},{v!r},{e!r}\n" for r, v, e in self.rows())


def ball_counts(samples: Sequence[Configuration], radii, center=None) -> np.ndarray:
    """(m, k) counts of points within each radius of ``center`` (default origin)."""
    radii = np.asarray(radii, dtype=float)
    out = np.zeros((len(samples), radii.shape[0]))
    for k, s in enumerate(samples):
        pts = s.points if isinstance(s, Configuration) else np.asarray(s, dtype=float)
        if pts.shape[0] == 0:
            continue
        c = np.zeros(pts.shape[1]) if center is None else np.asarray(center, dtype=float)
        r = np.sort(np.linalg.norm(pts - c, axis=1))
        out[k] = np.searchsorted(r, radii, side="right")
    return out


def variance_ratio_curve(samples: Sequence[Configuration], radii, domain: Domain | None = None,
                         center=None) -> VarianceCurve:
    """Var[xi(U_r)] / E[xi(U_r)]^2 per radius and the fitted decay exponent delta.

    Radii with zero mean count are skipped (recorded in ``notes``); the fit
    uses the radii with positive ratio.
    """
    samples = list(samples)
    if len(samples) < 2:
        raise ValueError("variance_ratio_curve needs at least two samples")
    radii = np.asarray(radii, dtype=float)
    if domain is None and isinstance(samples[0], Configuration):
        domain = samples[0].domain
    if domain is not None and np.any(radii > domain.half_width):
        raise ValueError("radii must lie within the box")
    counts = ball_counts(samples, radii, center)
    m = counts.shape[0]
    mean = counts.mean(axis=0)
    var = counts.var(axis=0, ddof=1)
    notes = []
    keep = mean > 0
    for r in radii[~keep]:
        notes.append(f"r={r:g} skipped: zero mean count")
    mu, v = mean[keep], var[keep]
    c = counts[:, keep] - mu
    m4 = np.mean(c ** 4, axis=0)
    se_var = np.sqrt(np.maximum(m4 - v ** 2 * (m - 3) / (m - 1), 0.0) / m)
    se_mean = np.sqrt(v / m)
    ratio = v / mu ** 2
    se = np.sqrt((se_var / mu ** 2) ** 2 + (2.0 * v * se_mean / mu ** 3) ** 2)
    rk = radii[keep]
    pos = ratio > 0
    delta, dse = float("nan"), float("nan")
    if pos.sum() >= 2:
        x, y = np.log(rk[pos]), np.log(ratio[pos])
        w = 1.0 / np.maximum(se[pos] / ratio[pos], 1e-12) ** 2
        A = np.stack([np.ones_like(x), x], axis=1)
        cov = np.linalg.inv(A.T @ (A * w[:, None]))
        coef = cov @ (A.T @ (w * y))
        delta = -float(coef[1])
        dse = float(math.sqrt(cov[1, 1]))
    elif pos.sum() < 2:
        notes.append("fewer than two positive ratios: decay exponent not fitted")
    return VarianceCurve(rk, ratio, se, delta, dse, notes)


# --- rho1 / jump-envelope inequality ----------------------------------------

@dataclass
class RhojumpResult:
    lhs: float
    rhs_unit: float
    R_min: float
    R: float | None
    passed: bool
    note: str = ""


def _envelope_mass(env: EnvelopeSpec, r_min: float, t: np.ndarray) -> np.ndarray:
    """int_{r_min}^{max(t, r_min)} p(r) dr in d = 1."""
    t = np.maximum(np.asarray(t, dtype=float), r_min)

    def seg(a, b, e):
        # int_a^b s r^-(1+e) dr for b >= a > 0
        return env.scale * (a ** -e - b ** -e) / e

    lo1 = min(r_min, 1.0)
    near = np.where(t < 1.0, seg(lo1, np.minimum(t, 1.0), env.beta_origin), seg(lo1, 1.0, env.beta_origin))
    near = np.where(r_min < 1.0, near, 0.0)
    far_lo = max(r_min, 1.0)
    far = np.where(t > far_lo, seg(far_lo, np.maximum(t, far_lo), env.alpha_tail), 0.0)
    return near + far


def _inner_mass(env: EnvelopeSpec, r_min: float, x: np.ndarray, a: float, b: float) -> np.ndarray:
    """int_A 1{|x-y| >= r_min} p(|x-y|) dy for A = [a, b]."""
    u0, u1 = a - x, b - x
    Q = lambda t: _envelope_mass(env, r_min, t)
    pos = Q(np.maximum(u1, 0.0)) - Q(np.maximum(u0, 0.0))
    neg = Q(np.maximum(-u0, 0.0)) - Q(np.maximum(-u1, 0.0))
    return pos + neg


def rhojump_inequality_check(rho1, envelope: EnvelopeSpec, A, domain: Domain, r_min: float,
                             R: float | None = None) -> RhojumpResult:
    """Both sides of int rho1(x) int_A p(|x-y|) dy dx <= R int_A rho1(y) dy in d = 1.

    ``rho1`` is a :class:`BinnedIntensity` or a constant; p is truncated below
    ``r_min``.  Returns the minimal R (lhs / rhs_unit); both sides are linear
    in rho1 so R_min does not depend on its scale.
    """
    if domain.dimension != 1:
        raise ValueError("rhojump_inequality_check is implemented for d = 1")
    a, b = (float(v) for v in np.ravel(A))
    L = domain.half_width
    if not -L <= a < b <= L:
        raise ValueError("test box A must be a nonempty interval inside the box")
    if np.isscalar(rho1):
        rho1 = BinnedIntensity((np.array([-L, L]),), np.array([float(rho1)]), np.zeros(1), 0)
    edges = rho1.edges[0]
    vals = rho1.values.ravel()
    kinks = [a - 1.0, a - r_min, a, a + r_min, a + 1.0, b - 1.0, b - r_min, b, b + r_min, b + 1.0]
    lhs = 0.0
    rhs = 0.0
    for lo, hi, v in zip(edges[:-1], edges[1:], vals):
        if v == 0.0:
            continue
        pts = [k for k in kinks if lo < k < hi]
        w, _ = integrate.quad(lambda x: float(_inner_mass(envelope, r_min, np.array([x]), a, b)[0]),
                              lo, hi, points=pts or None, limit=200, epsabs=0.0, epsrel=1e-12)
        lhs += v * w
        rhs += v * max(0.0, min(hi, b) - max(lo, a))
    if rhs == 0.0:
        return RhojumpResult(lhs, 0.0, float("nan"), R, False, "right-hand side vanishes: R undefined")
    R_min = lhs / rhs
    ok = math.isfinite(R_min) and (R is None or R_min <= R)
    return RhojumpResult(float(lhs), float(rhs), float(R_min), R, bool(ok))


# --- tail exponents ---------------------------------------------------------

@dataclass
class TailFit:
    alpha: float
    beta: float
    alpha_stderr: float
    beta_stderr: float
    kappa: float | None
    gate_passed: bool | None


def _decades(r: np.ndarray) -> float:
    return float(np.log10(r.max() / r.min())) if r.size >= 2 else 0.0


def tail_exponent_fit(r, p=None, d: int = 1, kappa: float | None = None,
                      min_decades: float = 1.5) -> TailFit:
    """Least-squares exponents of a two-regime power law.

    The slope of log p on r >= 1 is -(d + alpha), on r <= 1 it is -(d + beta).
    ``r`` may be an :class:`EnvelopeSpec` (then p is evaluated on a grid
    spanning three decades each side).  With ``kappa`` given, the gate
    alpha > kappa is checked.
    """
    if isinstance(r, EnvelopeSpec):
        env = r
        r = np.concatenate([np.geomspace(1e-3, 1.0, 40), np.geomspace(1.0, 1e3, 40)[1:]])
        p = env(r, d)
    r = np.asarray(r, dtype=float)
    p = np.asarray(p, dtype=float)
    if r.shape != p.shape or np.any(r <= 0) or np.any(p <= 0):
        raise ValueError("need matching positive arrays r and p")
    out = []
    for sel, name in ((r >= 1.0, "r >= 1"), (r <= 1.0, "r <= 1")):
        if _decades(r[sel]) < min_decades:
            raise ValueError(f"evaluation points span fewer than {min_decades} decades on {name}")
        res = stats.linregress(np.log(r[sel]), np.log(p[sel]))
        out.append((-res.slope - d, res.stderr))
    (alpha, ase), (beta, bse) = out
    gate = None if kappa is None else bool(alpha > kappa)
    return TailFit(float(alpha), float(beta), float(ase), float(bse), kappa, gate)


# --- stationarity -----------------------------------------------------------

def effective_sample_size(x) -> float:
    """ESS from FFT autocorrelations truncated by Geyer's initial positive sequence."""
    x = np.asarray(x, dtype=float)
    n = x.shape[0]
    if n < 4:
        return float(n)
    x = x - x.mean()
    var = float(np.dot(x, x)) / n
    if var == 0.0:
        return float(n)
    m = 1 << (2 * n - 1).bit_length()
    f = np.fft.rfft(x, m)
    acf = np.fft.irfft(f * np.conj(f), m)[:n] / (n * var)
    # pair sums Gamma_k = rho_{2k} + rho_{2k+1}, kept while positive and monotone
    pairs = acf[: 2 * (n // 2)].reshape(-1, 2).sum(axis=1)
    neg = np.nonzero(pairs <= 0)[0]
    pairs = pairs[: neg[0]] if neg.size else pairs
    if pairs.size == 0:
        return float(n)
    pairs = np.minimum.accumulate(pairs)
    tau = -1.0 + 2.0 * float(pairs.sum())
    return float(min(n, n / max(tau, 1e-12)))


def _series_ess(x: np.ndarray) -> float:
    # rows are time; for several columns count each row at most once
    if x.ndim == 1:
        return effective_sample_size(x)
    return min(effective_sample_size(col) for col in x.reshape(x.shape[0], -1).T)


@dataclass
class AuditResult:
    statistic: float
    pvalue: float
    pvalue_iid: float
    ess_dynamics: float
    ess_reference: float
    inconclusive: bool
    rejected: bool
    max_distance: float | None

    @property
    def passed(self) -> bool:
        dist_ok = self.max_distance is None or self.statistic < self.max_distance
        return (not self.inconclusive) and (not self.rejected) and dist_ok


def stationarity_audit(dynamics, reference, level: float = 0.05, min_ess: float = 100.0,
                       max_distance: float | None = None, reference_iid: bool = True):
    """Two-sample KS test between dynamics-visited and reference observables.

    ``dynamics`` and ``reference`` are arrays (one observable) or mappings
    name -> array.  A 2-D array is (time, component), pooled for the KS test;
    its ESS is the smallest per-component ESS.  The p-value uses the effective sample sizes, so correlated
    chain output is not over-counted.  ESS below ``min_ess`` marks the result
    inconclusive.
    """
    if isinstance(dynamics, Mapping):
        return {k: stationarity_audit(dynamics[k], reference[k], level, min_ess, max_distance, reference_iid)
                for k in dynamics}
    a2 = np.asarray(dynamics, dtype=float)
    b2 = np.asarray(reference, dtype=float)
    a, b = a2.ravel(), b2.ravel()
    if a.size < 2 or b.size < 2:
        raise ValueError("both samples need at least two values")
    res = stats.ks_2samp(a, b)
    ess_a = _series_ess(a2)
    ess_b = float(b2.shape[0]) if reference_iid else _series_ess(b2)
    n_eff = ess_a * ess_b / (ess_a + ess_b)
    p = float(stats.kstwobign.sf(res.statistic * math.sqrt(n_eff)))
    inconclusive = min(ess_a, ess_b) < min_ess
    return AuditResult(float(res.statistic), p, float(res.pvalue), ess_a, ess_b, bool(inconclusive),
                       bool(p < level), max_distance)


def poisson_count_test(counts, mean: float, min_expected: float = 5.0) -> tuple[float, float, int]:
    """Chi-square goodness of fit of integer counts to Poisson(mean).

    Cells with expected count below ``min_expected`` are pooled into the
    tails.  Returns (statistic, p-value, degrees of freedom).
    """
    counts = np.asarray(counts, dtype=int)
    m = counts.size
    hi = int(max(counts.max(), stats.poisson.ppf(1 - 1e-12, mean)))
    k = np.arange(hi + 1)
    observed = np.bincount(counts, minlength=hi + 1)[: hi + 1].astype(float)
    expected = m * stats.poisson.pmf(k, mean)
    expected[-1] += m * stats.poisson.sf(hi, mean)
    # pool from both ends until every cell has enough expected mass
    lo_cut = 0
    while lo_cut < hi and expected[: lo_cut + 1].sum() < min_expected:
        lo_cut += 1
    hi_cut = hi
    while hi_cut > lo_cut and expected[hi_cut:].sum() < min_expected:
        hi_cut -= 1
    obs = np.concatenate([[observed[: lo_cut + 1].sum()], observed[lo_cut + 1: hi_cut], [observed[hi_cut:].sum()]])
    exp = np.concatenate([[expected[: lo_cut + 1].sum()], expected[lo_cut + 1: hi_cut], [expected[hi_cut:].sum()]])
    if hi_cut == lo_cut:
        obs, exp = obs[:1] + obs[2:], exp[:1] + exp[2:]
    dof = max(exp.size - 1, 1)
    stat = float(np.sum((obs - exp) ** 2 / exp))
    return stat, float(stats.chi2.sf(stat, dof)), dof
