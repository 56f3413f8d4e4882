"""Simulators: discrete jump chain, continuous-time thinning, Glauber birth-death.

The inner loops live in :mod:`jumpips._core`; this module validates inputs,
packs parameters, and wraps results into :class:`Trajectory` objects.

Acceptance in the jump chain uses a pair-symmetric envelope by default:

    M(x, y) = gamma * C1 * p(|y - x|) * (1 + max(f, 1/f)),   f = exp(-Delta),

which reduces to 2*gamma*C1*p in the free case and makes the chain exactly
reversible for exp(-H) for every potential.  ``envelope='fixed'`` uses
M = 2*gamma*C1*p and aborts with a witness when the rate exceeds it.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from . import _core
from .geometry import Configuration, Domain
from .kernels import EnvelopeSpec, Proposal, kernel_values, make_proposal
from .potentials import PotentialSpec, compiled_args, energy_lower_bounds, hamiltonian
from .quadrature import Tolerance, displacement_integral
from .rates import RateSpec


class EnvelopeViolation(RuntimeError):
    """The jump rate exceeded the proposal envelope; carries the witness."""

    def __init__(self, witness: dict):
        super().__init__(f"jump rate exceeds the envelope: {witness}")
        self.witness = witness


class EnergyFloorError(RuntimeError):
    def __init__(self, witness: dict):
        super().__init__(f"local energy below the configured floor: {witness}")
        self.witness = witness


class EventBudgetExceeded(RuntimeError):
    pass


@dataclass(frozen=True)
class SimParams:
    steps: int = 0
    horizon: float = 0.0
    seed: int = 0
    gamma: float = 1.0
    stride: int = 1
    record_dt: float = 0.0
    record_events: bool = True
    envelope: str = "pair"
    activity: float = 1.0
    energy_floor: float = 0.0
    max_events: int = 10**8

    def __post_init__(self):
        if not self.gamma >= 1.0:
            raise ValueError("envelope inflation gamma must be >= 1")
        if self.steps < 0 or self.horizon < 0:
            raise ValueError("steps and horizon must be nonnegative")
        if self.stride < 1:
            raise ValueError("stride must be >= 1")
        if self.envelope not in ("pair", "fixed"):
            raise ValueError("envelope must be 'pair' or 'fixed'")
        if not self.activity > 0:
            raise ValueError("activity must be positive")
        if self.record_dt < 0:
            raise ValueError("record_dt must be nonnegative")


EVENT_KINDS = ("move", "birth", "death")


@dataclass
class EventLog:
    times: np.ndarray
    labels: np.ndarray
    kinds: np.ndarray
    origins: np.ndarray
    targets: np.ndarray
    accepted: np.ndarray

    def __len__(self):
        return self.times.shape[0]

    @classmethod
    def empty(cls, d: int) -> "EventLog":
        return cls(np.zeros(0), np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64),
                   np.zeros((0, d)), np.zeros((0, d)), np.zeros(0, dtype=bool))

    def to_csv(self, header_comment: str | None = None) -> str:
        d = self.origins.shape[1]
        buf = io.StringIO()
        if header_comment:
            buf.write(f"# {header_comment}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", "label", "kind"] + [f"from_x{k + 1}" for k in range(d)]
                   + [f"to_x{k + 1}" for k in range(d)] + ["accepted"])
        for e in range(len(self)):
            w.writerow([repr(float(self.times[e])), int(self.labels[e]), EVENT_KINDS[self.kinds[e]]]
                       + [repr(float(v)) for v in self.origins[e]]
                       + [repr(float(v)) for v in self.targets[e]] + [int(self.accepted[e])])
        return buf.getvalue()


@dataclass
class Trajectory:
    """Snapshots stored flat: rows offsets[k]:offsets[k+1] of ``points`` form snapshot k."""

    domain: Domain
    times: np.ndarray
    points: np.ndarray
    labels: np.ndarray
    offsets: np.ndarray
    events: EventLog
    stats: dict = field(default_factory=dict)

    def __len__(self):
        return self.times.shape[0]

    def counts(self) -> np.ndarray:
        return np.diff(self.offsets)

    def snapshot(self, k: int) -> Configuration:
        a, b = self.offsets[k], self.offsets[k + 1]
        return Configuration(self.domain, self.points[a:b])

    def configurations(self):
        return [self.snapshot(k) for k in range(len(self))]

    @property
    def final(self) -> Configuration:
        return self.snapshot(len(self) - 1)

    def stacked(self) -> np.ndarray:
        """(m, n, d) view for fixed particle number."""
        c = self.counts()
        if len(c) and np.any(c != c[0]):
            raise ValueError("particle number varies along the trajectory")
        n = int(c[0]) if len(c) else 0
        return self.points.reshape(len(self), n, self.domain.dimension)

    def to_csv(self, header_comment: str | None = None) -> str:
        d = self.domain.dimension
        buf = io.StringIO()
        if header_comment:
            buf.write(f"# {header_comment}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", "label"] + [f"x{k + 1}" for k in range(d)])
        for k in range(len(self)):
            t = repr(float(self.times[k]))
            for row in range(self.offsets[k], self.offsets[k + 1]):
                w.writerow([t, int(self.labels[row])] + [repr(float(v)) for v in self.points[row]])
        return buf.getvalue()


def _fixed_n_trajectory(domain, times, snaps, events, stats) -> Trajectory:
    m, n, d = snaps.shape
    return Trajectory(domain, np.asarray(times, dtype=float), snaps.reshape(m * n, d).copy(),
                      np.tile(np.arange(n), m), np.arange(m + 1) * n, events, stats)


def _move_events(ev_t, ev_label, ev_from, ev_to, ev_acc) -> EventLog:
    return EventLog(np.asarray(ev_t, dtype=float), ev_label, np.zeros(ev_t.shape[0], dtype=np.int64),
                    ev_from, ev_to, ev_acc)


def _witness(w: np.ndarray, d: int, time_key: str) -> dict:
    return {time_key: float(w[0]), "particle": int(w[1]), "rate": float(w[2]), "envelope": float(w[3]),
            "x": w[4:4 + d].tolist(), "y": w[4 + d:4 + 2 * d].tolist()}


def _check_start(rate: RateSpec, xi0: Configuration):
    rate.potential.check_dimension(xi0.dimension)
    if xi0.n and rate.mode != "free" and not math.isfinite(hamiltonian(rate.potential, xi0)):
        raise ValueError("initial configuration has infinite energy")


def _rate_args(rate: RateSpec, domain: Domain, envelope: EnvelopeSpec | None):
    prop = make_proposal(rate.kernel, domain, envelope)
    return prop, rate.kernel.packed(domain.dimension), prop.packed(), compiled_args(rate.potential, domain)


def run_jump_chain(rate: RateSpec, params: SimParams, xi0: Configuration,
                   envelope: EnvelopeSpec | None = None) -> Trajectory:
    """Discrete-time chain: each step picks a particle uniformly, proposes a
    displacement from the envelope law and accepts with probability c / M."""
    _check_start(rate, xi0)
    domain = xi0.domain
    prop, kp, ep, (pot, tlo, tstep, tvals) = _rate_args(rate, domain, envelope)
    rng = np.random.default_rng(params.seed)
    pos = np.array(xi0.points, dtype=float, order="C")
    out = _core.jump_chain_loop(rng, pos, domain.half_width, domain.boundary_mode == "reflect", kp, ep,
                                prop.sphere, pot, tlo, tstep, tvals, rate.mode_code, rate.ginibre_radius,
                                params.gamma, params.envelope == "pair", params.steps, params.stride,
                                params.record_events)
    snaps, ev_t, ev_label, ev_from, ev_to, ev_acc, accepted, outside, status, witness = out
    d = domain.dimension
    if status == _core.ERR_ENVELOPE:
        raise EnvelopeViolation(_witness(witness, d, "step"))
    times = np.arange(snaps.shape[0]) * params.stride
    proposals = params.steps if xi0.n else 0
    stats = {"steps": params.steps, "proposals": proposals, "accepted": int(accepted),
             "outside_box": int(outside),
             "acceptance_rate": accepted / proposals if proposals else 0.0,
             "seed": params.seed}
    return _fixed_n_trajectory(domain, times, snaps, _move_events(ev_t, ev_label, ev_from, ev_to, ev_acc), stats)


def _lower_bounds(rate: RateSpec, domain: Domain) -> np.ndarray:
    if rate.mode != "gibbs_closed_form":
        return np.zeros(2)
    return energy_lower_bounds(rate.potential, domain)


def run_thinning(rate: RateSpec, params: SimParams, xi0: Configuration, horizon: float | None = None,
                 envelope: EnvelopeSpec | None = None) -> Trajectory:
    """Continuous-time thinning of a Poisson proposal stream.

    Particle i proposes at rate gamma*C1*(1 + B_i)*P_tot where B_i bounds
    exp(-Delta) over the box (1 in the free case); a proposal u is accepted
    iff a uniform mark times the envelope falls below c.  Both accepted and
    rejected proposals are logged.
    """
    _check_start(rate, xi0)
    T = params.horizon if horizon is None else horizon
    if T < 0:
        raise ValueError("horizon must be nonnegative")
    domain = xi0.domain
    prop, kp, ep, (pot, tlo, tstep, tvals) = _rate_args(rate, domain, envelope)
    rng = np.random.default_rng(params.seed)
    pos = np.array(xi0.points, dtype=float, order="C")
    out = _core.thinning_loop(rng, pos, domain.half_width, domain.boundary_mode == "reflect", kp, ep,
                              prop.sphere, pot, tlo, tstep, tvals, rate.mode_code, rate.ginibre_radius,
                              params.gamma, _lower_bounds(rate, domain), T, params.stride, params.record_dt,
                              params.max_events, params.record_events)
    snaps, snap_t, ev_t, ev_label, ev_from, ev_to, ev_acc, accepted, proposed, status, witness, t = out
    d = domain.dimension
    if status == _core.ERR_ENVELOPE:
        raise EnvelopeViolation(_witness(witness, d, "time"))
    if status == _core.ERR_BUDGET:
        raise EventBudgetExceeded(f"more than {params.max_events} proposals before time {T}")
    stats = {"horizon": T, "proposals": int(proposed), "accepted": int(accepted),
             "acceptance_rate": accepted / proposed if proposed else 0.0,
             "proposal_mass": prop.total_mass, "seed": params.seed}
    return _fixed_n_trajectory(domain, snap_t, snaps, _move_events(ev_t, ev_label, ev_from, ev_to, ev_acc), stats)


def thinning_endpoints(rate: RateSpec, xi0: Configuration, horizon: float, replicas: int, seed: int = 0,
                       gamma: float = 1.0, envelope: EnvelopeSpec | None = None) -> np.ndarray:
    """Positions at time ``horizon`` for independent replicas, shape (replicas, n, d).

    Replica k uses the seed sequence spawned from ``seed``; each replica
    equals ``run_thinning`` with that generator.
    """
    _check_start(rate, xi0)
    domain = xi0.domain
    prop, kp, ep, (pot, tlo, tstep, tvals) = _rate_args(rate, domain, envelope)
    rng = np.random.default_rng(seed)
    out = _core.thinning_replicas(rng, np.array(xi0.points, dtype=float, order="C"), replicas,
                                  domain.half_width, domain.boundary_mode == "reflect", kp, ep, prop.sphere,
                                  pot, tlo, tstep, tvals, rate.mode_code, rate.ginibre_radius, gamma,
                                  _lower_bounds(rate, domain), horizon)
    finals, status = out
    if status == _core.ERR_ENVELOPE:
        raise EnvelopeViolation({"note": "envelope exceeded in a replica"})
    return finals


def run_glauber(potential: PotentialSpec, params: SimParams, xi0: Configuration,
                horizon: float | None = None) -> Trajectory:
    """Birth-death dynamics with unit death rate and birth density z*exp(-E_loc).

    Births are proposed uniformly at rate z*|box|*max(1, exp(-E_min)) and
    kept with probability exp(-E_loc)/max(1, exp(-E_min)); a local energy
    below E_min aborts with the witness.
    """
    T = params.horizon if horizon is None else horizon
    if T < 0:
        raise ValueError("horizon must be nonnegative")
    domain = xi0.domain
    potential.check_dimension(domain.dimension)
    if xi0.n and not math.isfinite(hamiltonian(potential, xi0)):
        raise ValueError("initial configuration has infinite energy")
    pot, tlo, tstep, tvals = compiled_args(potential, domain)
    rng = np.random.default_rng(params.seed)
    out = _core.glauber_loop(rng, np.array(xi0.points, dtype=float, order="C"),
                             np.arange(xi0.n, dtype=np.int64), domain.half_width, pot, tlo, tstep, tvals,
                             params.activity, params.energy_floor, T, params.record_dt, params.stride,
                             params.max_events, params.record_events)
    flat, flat_lab, offsets, snap_t, ev_t, ev_label, ev_kind, ev_x, ev_acc, counts, status, witness, t = out
    d = domain.dimension
    if status == _core.ERR_ENERGY_FLOOR:
        raise EnergyFloorError({"time": float(witness[0]), "energy": float(witness[1]),
                                "y": witness[2:2 + d].tolist(), "floor": params.energy_floor})
    if status == _core.ERR_BUDGET:
        raise EventBudgetExceeded(f"more than {params.max_events} events before time {T}")
    nan = np.full_like(ev_x, np.nan)
    births = ev_kind == 0
    origins = np.where(births[:, None], nan, ev_x)
    targets = np.where(births[:, None], ev_x, nan)
    kinds = np.where(births, 1, 2)
    events = EventLog(ev_t, ev_label, kinds, origins, targets, ev_acc)
    stats = {"horizon": T, "births": int(counts[0]), "deaths": int(counts[1]),
             "rejected_births": int(counts[2]), "activity": params.activity, "seed": params.seed}
    return Trajectory(domain, snap_t, flat, flat_lab, offsets, events, stats)


def _values_at(f, points: np.ndarray, i: int, Y: np.ndarray) -> np.ndarray:
    """f evaluated after moving particle i to each row of Y."""
    if hasattr(f, "moved_values"):
        return np.asarray(f.moved_values(points, i, Y), dtype=float)
    out = np.empty(Y.shape[0])
    for k, y in enumerate(Y):
        p = points.copy()
        p[i] = y
        out[k] = f(p)
    return out


def _value(f, points: np.ndarray) -> float:
    if hasattr(f, "evaluate"):
        return float(f.evaluate(points))
    return float(f(points))


def _rate_values(rate: RateSpec, prop: Proposal, pts: np.ndarray, i: int, Y: np.ndarray, R: np.ndarray,
                 fold: bool, compiled) -> np.ndarray:
    """c(xi, x_i; y) at each row of Y (0 where inadmissible), with the fold weight."""
    d = pts.shape[1]
    x = pts[i]
    pot, tlo, tstep, tvals = compiled
    nu_f = kernel_values(rate.kernel, x, Y)
    kp = rate.kernel.packed(d)
    out = np.zeros(Y.shape[0])
    for k, y in enumerate(Y):
        if not np.any(y != x):
            continue
        fac, delta = _core.reverse_factor(rate.mode_code, pts, pts.shape[0], i, y, pot, tlo, tstep, tvals,
                                          rate.ginibre_radius)
        if delta == math.inf:
            continue
        c = nu_f[k] + float(_core.kernel_value(kp, d, y, x)) * fac
        if fold:
            c *= float(prop.envelope(R[k], d)) / float(prop.envelope(np.linalg.norm(y - x), d))
        out[k] = c
    return out


def generator_apply(rate: RateSpec, f, xi: Configuration, envelope: EnvelopeSpec | None = None,
                    tol: Tolerance = Tolerance()) -> float:
    """sum_i int c(xi, x_i; y) [f(xi^{x_i y}) - f(xi)] dy over the simulated displacement range.

    The range is r_min <= |y - x_i| <= 2L sqrt(d).  Destinations outside the
    box are dropped under ``reject``; under ``reflect`` they are folded and
    weighted by p(|u|)/p(|y - x_i|), matching the simulators.  Destinations
    with infinite energy contribute nothing.  ``f`` takes an (n, d) array of
    points, or offers ``evaluate``/``moved_values``.
    """
    domain = xi.domain
    prop = make_proposal(rate.kernel, domain, envelope)
    compiled = compiled_args(rate.potential, domain)
    pts = np.ascontiguousarray(xi.points)
    fold = domain.boundary_mode == "reflect"
    base = _value(f, pts)
    kinks = getattr(f, "kinks", lambda p: ())(pts)
    total = 0.0
    for i in range(xi.n):
        def integrand(Y, R, i=i):
            c = _rate_values(rate, prop, pts, i, Y, R, fold, compiled)
            return (c * (_values_at(f, pts, i, Y) - base))[:, None]

        total += float(displacement_integral(pts[i], domain, prop.r_min, integrand, 1, fold=fold,
                                             kinks=kinks, tol=tol)[0])
    return total


def total_jump_rate(rate: RateSpec, xi: Configuration, envelope: EnvelopeSpec | None = None,
                    tol: Tolerance = Tolerance()) -> np.ndarray:
    """Per-particle escape rates int c(xi, x_i; y) dy over the simulated range."""
    domain = xi.domain
    prop = make_proposal(rate.kernel, domain, envelope)
    compiled = compiled_args(rate.potential, domain)
    pts = np.ascontiguousarray(xi.points)
    fold = domain.boundary_mode == "reflect"
    out = np.zeros(xi.n)
    for i in range(xi.n):
        out[i] = displacement_integral(
            pts[i], domain, prop.r_min,
            lambda Y, R, i=i: _rate_values(rate, prop, pts, i, Y, R, fold, compiled)[:, None],
            1, fold=fold, tol=tol)[0]
    return out


def metropolis_reference(potential: PotentialSpec, domain: Domain, n: int, samples: int,
                         seed: int = 0, burn_in: int = 1000, start: Configuration | None = None) -> np.ndarray:
    """Independent sampler of exp(-H) on the box: single-site Metropolis with
    uniform redraws, one sample per sweep.  Returns (samples, n, d)."""
    potential.check_dimension(domain.dimension)
    pot, tlo, tstep, tvals = compiled_args(potential, domain)
    rng = np.random.default_rng(seed)
    if start is None:
        from .geometry import lattice_configuration
        start = lattice_configuration(domain, n)
    pos = np.array(start.points, dtype=float, order="C")
    return _core.metropolis_loop(rng, pos, domain.half_width, pot, tlo, tstep, tvals, samples, burn_in)


def poisson_configuration(domain: Domain, activity: float, rng: np.random.Generator) -> Configuration:
    """Poisson(z) point field restricted to the box."""
    n = rng.poisson(activity * domain.volume)
    return Configuration(domain, domain.uniform(rng, n))


def poisson_samples(domain: Domain, activity: float, count: int, seed: int = 0) -> list[Configuration]:
    rng = np.random.default_rng(seed)
    return [poisson_configuration(domain, activity, rng) for _ in range(count)]


def expected_free_acceptance(rate: RateSpec, domain: Domain, x, gamma: float = 1.0,
                             envelope: EnvelopeSpec | None = None, tol: Tolerance = Tolerance()) -> float:
    """Acceptance probability of one free-mode chain proposal from x, by quadrature.

    Proposal law p(|u|)/P_tot; a landing inside the box is accepted with
    probability 2 nu / (2 gamma C1 p).
    """
    prop = make_proposal(rate.kernel, domain, envelope)
    d = domain.dimension
    x = np.asarray(x, dtype=float).reshape(d)

    def integrand(Y, R):
        nu = kernel_values(rate.kernel, x, Y)
        weight = prop.envelope(R, d) / prop.envelope(np.linalg.norm(Y - x, axis=1), d)
        return (nu * weight / (gamma * prop.C1))[:, None]

    mass = displacement_integral(x, domain, prop.r_min, integrand, 1,
                                 fold=domain.boundary_mode == "reflect", tol=tol)[0]
    return float(mass / prop.total_mass)


def proposal(rate: RateSpec, domain: Domain, envelope: EnvelopeSpec | None = None) -> Proposal:
    return make_proposal(rate.kernel, domain, envelope)
