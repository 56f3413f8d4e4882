"""Compiled scalar kernels and simulation loops.

Everything here works on packed float64 parameter vectors so the same code
serves the Python-level evaluators and the jitted simulators.  The public
modules own validation and packing; nothing in this file checks arguments.

Packed layouts
--------------
potential ``pot``: [pair_code, pair_param, scale, self_code, self_strength]
    pair_param is the Riesz exponent, sign*beta for log, or the hard-core
    radius.
self table: ``tlo`` (2,), ``tstep`` (2,), ``tvals`` (m1, m2); m2 == 1 in d=1.
kernel ``kp``: [kind, alpha, inv_const, field_code, center, amplitude,
    frequency, radius, power]
envelope ``ep``: [alpha_tail, beta_origin, scale, C1, r_min, r_max, W1, W2]
    W1, W2 are the radial masses of p(r) * |S^{d-1}| * r^(d-1) on
    [r_min, 1) and [1, r_max].
"""
import math

import numpy as np
from numba import njit

PAIR_ZERO, PAIR_LJ, PAIR_RIESZ, PAIR_LOG, PAIR_HARD = 0, 1, 2, 3, 4
SELF_ZERO, SELF_QUADRATIC, SELF_TABLE = 0, 1, 2
KERNEL_STABLE, KERNEL_STABLE_LIKE, KERNEL_TRUNCATED = 0, 1, 2
FIELD_CONSTANT, FIELD_SINE = 0, 1
RATE_GIBBS, RATE_FREE, RATE_GINIBRE = 0, 1, 2

# exp(700) is still finite in float64
DELTA_FLOOR = -700.0

ERR_NONE = 0
ERR_ENVELOPE = 1
ERR_ENERGY_FLOOR = 2
ERR_COINCIDENT = 3
ERR_BUDGET = 4


@njit(cache=True)
def dist(x, y):
    s = 0.0
    for k in range(x.shape[0]):
        t = x[k] - y[k]
        s += t * t
    return math.sqrt(s)


@njit(cache=True)
def norm(x):
    s = 0.0
    for k in range(x.shape[0]):
        s += x[k] * x[k]
    return math.sqrt(s)


@njit(cache=True)
def pair_value(pot, r):
    code = int(pot[0])
    if code == PAIR_ZERO:
        return 0.0
    if code == PAIR_HARD:
        return np.inf if r < pot[1] else 0.0
    if r == 0.0:
        if code == PAIR_LOG and pot[1] > 0.0:
            return -np.inf
        return np.inf
    if code == PAIR_LJ:
        r2 = r * r
        den = r2 * r2 * r2
        # r^6 underflows to 0 for r below ~1e-54
        if den == 0.0:
            return np.inf
        r6 = 1.0 / den
        if r6 == np.inf:
            return np.inf
        return pot[2] * (r6 * r6 - r6)
    if code == PAIR_RIESZ:
        return pot[2] * r ** (-pot[1])
    return pot[2] * pot[1] * math.log(r)


@njit(cache=True)
def _table_value(tlo, tstep, tvals, x):
    m1 = tvals.shape[0]
    t = (x[0] - tlo[0]) / tstep[0]
    i = int(math.floor(t))
    if i < 0:
        i = 0
    if i > m1 - 2:
        i = m1 - 2
    w = t - i
    if w < 0.0:
        w = 0.0
    if w > 1.0:
        w = 1.0
    if tvals.shape[1] == 1:
        return (1.0 - w) * tvals[i, 0] + w * tvals[i + 1, 0]
    m2 = tvals.shape[1]
    s = (x[1] - tlo[1]) / tstep[1]
    j = int(math.floor(s))
    if j < 0:
        j = 0
    if j > m2 - 2:
        j = m2 - 2
    v = s - j
    if v < 0.0:
        v = 0.0
    if v > 1.0:
        v = 1.0
    return ((1.0 - w) * (1.0 - v) * tvals[i, j] + w * (1.0 - v) * tvals[i + 1, j]
            + (1.0 - w) * v * tvals[i, j + 1] + w * v * tvals[i + 1, j + 1])


@njit(cache=True)
def self_value(pot, tlo, tstep, tvals, x):
    code = int(pot[3])
    if code == SELF_ZERO:
        return 0.0
    if code == SELF_QUADRATIC:
        s = 0.0
        for k in range(x.shape[0]):
            s += x[k] * x[k]
        return pot[4] * s
    return _table_value(tlo, tstep, tvals, x)


@njit(cache=True)
def dist_row(pos, j, y):
    # index-based to avoid creating a view of pos[j] in hot loops
    s = 0.0
    for k in range(y.shape[0]):
        t = pos[j, k] - y[k]
        s += t * t
    return math.sqrt(s)


@njit(cache=True)
def dist_rows(pos, i, j):
    s = 0.0
    for k in range(pos.shape[1]):
        t = pos[i, k] - pos[j, k]
        s += t * t
    return math.sqrt(s)


@njit(cache=True)
def local_energy(pos, n, skip, y, pot, tlo, tstep, tvals):
    """Phi(y) + sum_{j != skip} Psi(y, x_j); NaN from inf - inf maps to +inf."""
    e = self_value(pot, tlo, tstep, tvals, y) if int(pot[3]) != SELF_ZERO else 0.0
    if int(pot[0]) != PAIR_ZERO:
        for j in range(n):
            if j == skip:
                continue
            e += pair_value(pot, dist_row(pos, j, y))
    if e != e:
        return np.inf
    return e


@njit(cache=True)
def particle_energy(pos, n, i, pot, tlo, tstep, tvals):
    """Local energy of particle i at its own position."""
    e = self_value(pot, tlo, tstep, tvals, pos[i]) if int(pot[3]) != SELF_ZERO else 0.0
    if int(pot[0]) != PAIR_ZERO:
        for j in range(n):
            if j == i:
                continue
            e += pair_value(pot, dist_rows(pos, i, j))
    if e != e:
        return np.inf
    return e


@njit(cache=True)
def total_energy(pos, n, pot, tlo, tstep, tvals):
    e = 0.0
    for i in range(n):
        e += self_value(pot, tlo, tstep, tvals, pos[i])
        if int(pot[0]) != PAIR_ZERO:
            for j in range(i + 1, n):
                e += pair_value(pot, dist(pos[i], pos[j]))
    if e != e:
        return np.inf
    return e


@njit(cache=True)
def alpha_field(kp, x):
    if int(kp[3]) == FIELD_CONSTANT:
        return kp[4]
    return kp[4] + kp[5] * math.sin(kp[6] * x[0])


@njit(cache=True)
def kernel_value(kp, d, x, y):
    r = dist(x, y)
    kind = int(kp[0])
    if kind == KERNEL_STABLE:
        return kp[2] * r ** (-d - kp[1])
    if kind == KERNEL_STABLE_LIKE:
        return r ** (-d - alpha_field(kp, x))
    if r <= kp[7]:
        return r ** (-d - kp[8])
    return 0.0


@njit(cache=True)
def envelope_value(ep, d, r):
    if r >= 1.0:
        return ep[2] * r ** (-d - ep[0])
    return ep[2] * r ** (-d - ep[1])


@njit(cache=True)
def _invert_power(a, b, mass, unit):
    # density unit * r^(-1-b) on [a, ...); returns r with mass(a, r) == mass
    return (a ** -b - mass * b / unit) ** (-1.0 / b)


@njit(cache=True)
def sample_radius(ep, sphere, u):
    t = u * (ep[6] + ep[7])
    unit = ep[2] * sphere
    if t < ep[6]:
        r = _invert_power(ep[4], ep[1], t, unit)
    else:
        r = _invert_power(max(1.0, ep[4]), ep[0], t - ep[6], unit)
    if r < ep[4]:
        r = ep[4]
    if r > ep[5]:
        r = ep[5]
    return r


@njit(cache=True)
def sample_direction(rng, d, out):
    if d == 1:
        out[0] = 1.0 if rng.random() < 0.5 else -1.0
        return
    s = 0.0
    while s == 0.0:
        s = 0.0
        for k in range(d):
            out[k] = rng.standard_normal()
            s += out[k] * out[k]
    s = math.sqrt(s)
    for k in range(d):
        out[k] /= s


@njit(cache=True)
def inside(y, L):
    for k in range(y.shape[0]):
        if y[k] < -L or y[k] > L:
            return False
    return True


@njit(cache=True)
def fold(y, L):
    period = 4.0 * L
    for k in range(y.shape[0]):
        t = (y[k] + L) % period
        if t > 2.0 * L:
            t = period - t
        y[k] = t - L


@njit(cache=True)
def reverse_factor(mode, pos, n, i, y, pot, tlo, tstep, tvals, r_trunc):
    """Return (factor, delta) with factor = exp(-delta) for moving particle i to y."""
    if mode == RATE_FREE:
        return 1.0, 0.0
    if mode == RATE_GINIBRE:
        prod = 1.0
        for j in range(n):
            if j == i or norm(pos[j]) >= r_trunc:
                continue
            num = dist(y, pos[j])
            den = dist(pos[i], pos[j])
            if den == 0.0:
                return np.inf, -np.inf
            prod *= (num * num) / (den * den)
        if prod == 0.0:
            return 0.0, np.inf
        return prod, -math.log(prod)
    e_new = local_energy(pos, n, i, y, pot, tlo, tstep, tvals)
    if e_new == np.inf:
        return 0.0, np.inf
    e_old = particle_energy(pos, n, i, pot, tlo, tstep, tvals)
    if e_old == np.inf:
        delta = DELTA_FLOOR
    else:
        delta = e_new - e_old
    # may overflow to inf for a large energy drop; callers handle that case
    return math.exp(-delta) if delta > -745.0 else np.inf, delta


@njit(cache=True)
def log_factor_bound(mode, pos, n, i, pot, tlo, tstep, tvals, r_trunc, e_lb, diam):
    """log of an upper bound of the reverse factor over all destinations in the box."""
    if mode == RATE_FREE:
        return 0.0
    if mode == RATE_GINIBRE:
        s = 0.0
        for j in range(n):
            if j == i or norm(pos[j]) >= r_trunc:
                continue
            den = dist(pos[i], pos[j])
            if den == 0.0:
                return np.inf
            s += 2.0 * math.log(diam / den)
        return s
    e_old = particle_energy(pos, n, i, pot, tlo, tstep, tvals)
    return e_old - (e_lb[0] + (n - 1) * e_lb[1])


@njit(cache=True)
def jump_chain_loop(rng, pos, L, reflect, kp, ep, sphere, pot, tlo, tstep, tvals,
                    mode, r_trunc, gamma, pair_envelope, steps, stride, record_events):
    n, d = pos.shape
    n_snap = steps // stride + 1
    snaps = np.empty((n_snap, n, d))
    snaps[0] = pos
    n_ev = steps if record_events else 0
    ev_t = np.empty(n_ev)
    ev_label = np.empty(n_ev, dtype=np.int64)
    ev_from = np.empty((n_ev, d))
    ev_to = np.empty((n_ev, d))
    ev_acc = np.empty(n_ev, dtype=np.bool_)
    witness = np.zeros(4 + 2 * d)
    u = np.empty(d)
    y = np.empty(d)
    accepted = 0
    outside = 0
    status = ERR_NONE
    k = 0
    for step in range(1, steps + 1):
        if n == 0:
            if step % stride == 0:
                k += 1
                snaps[k] = pos
            continue
        i = int(rng.random() * n)
        if i == n:
            i = n - 1
        r = sample_radius(ep, sphere, rng.random())
        sample_direction(rng, d, u)
        for c in range(d):
            y[c] = pos[i, c] + r * u[c]
        acc = False
        ok = True
        if not inside(y, L):
            if reflect:
                fold(y, L)
            else:
                ok = False
                outside += 1
        if ok:
            rr = dist(pos[i], y)
            if rr > 0.0:
                fac, delta = reverse_factor(mode, pos, n, i, y, pot, tlo, tstep, tvals, r_trunc)
                nu_f = kernel_value(kp, d, pos[i], y)
                nu_b = kernel_value(kp, d, y, pos[i]) if int(kp[0]) == KERNEL_STABLE_LIKE else nu_f
                base = gamma * ep[3] * envelope_value(ep, d, rr)
                if delta == np.inf or (pair_envelope and fac == 0.0):
                    rate = 0.0
                    top = 1.0
                elif pair_envelope:
                    # ratio of rate to base*(1 + max(f, 1/f)), arranged to stay finite
                    if fac >= 1.0:
                        rate = nu_f / fac + nu_b
                        top = base * (1.0 / fac + 1.0)
                    else:
                        rate = nu_f + nu_b * fac
                        top = base * (1.0 + 1.0 / fac)
                else:
                    rate = nu_f + nu_b * fac
                    top = 2.0 * base
                if rate > top * (1.0 + 1e-12):
                    status = ERR_ENVELOPE
                    witness[0] = step
                    witness[1] = i
                    witness[2] = rate
                    witness[3] = top
                    for c in range(d):
                        witness[4 + c] = pos[i, c]
                        witness[4 + d + c] = y[c]
                    break
                if rng.random() * top < rate:
                    acc = True
        if record_events:
            e = step - 1
            ev_t[e] = step
            ev_label[e] = i
            for c in range(d):
                ev_from[e, c] = pos[i, c]
                ev_to[e, c] = y[c]
            ev_acc[e] = acc
        if acc:
            accepted += 1
            for c in range(d):
                pos[i, c] = y[c]
        if step % stride == 0:
            k += 1
            snaps[k] = pos
    return snaps[: k + 1], ev_t, ev_label, ev_from, ev_to, ev_acc, accepted, outside, status, witness


@njit(cache=True)
def _refresh_bounds(logw, mode, pos, n, pot, tlo, tstep, tvals, r_trunc, e_lb, diam):
    """Fill logw[i] = log(1 + B_i); return (max, sum of exp(logw - max))."""
    top = -np.inf
    for i in range(n):
        lb = log_factor_bound(mode, pos, n, i, pot, tlo, tstep, tvals, r_trunc, e_lb, diam)
        logw[i] = lb + math.log1p(math.exp(-lb)) if lb > 0.0 else math.log1p(math.exp(lb))
        if logw[i] > top:
            top = logw[i]
    s = 0.0
    for i in range(n):
        s += math.exp(logw[i] - top)
    return top, s


@njit(cache=True)
def thinning_loop(rng, pos, L, reflect, kp, ep, sphere, pot, tlo, tstep, tvals,
                  mode, r_trunc, gamma, e_lb, horizon, stride, record_dt, max_events,
                  record_events):
    """Event-driven thinning.  Particle i proposes at rate gamma*C1*(1+B_i)*P_tot,
    B_i bounding the reverse factor, so the acceptance ratio never exceeds one.

    Weights are kept as logarithms: a particle that has just entered a very
    high energy state gets an astronomically large proposal rate, and the
    ratio c / envelope stays finite when both are scaled by 1/(1+B_i).
    """
    n, d = pos.shape
    diam = 2.0 * L * math.sqrt(d)
    p_tot = ep[6] + ep[7]
    unit = gamma * ep[3] * p_tot
    logw = np.zeros(max(n, 1))
    wmax, wsum = 0.0, 0.0
    if n > 0:
        wmax, wsum = _refresh_bounds(logw, mode, pos, n, pot, tlo, tstep, tvals, r_trunc, e_lb, diam)
    total = unit * wsum

    if record_dt > 0.0:
        n_snap = int(math.floor(horizon / record_dt)) + 1
    else:
        n_snap = 1024
    snaps = np.empty((n_snap, n, d))
    snap_t = np.empty(n_snap)
    snaps[0] = pos
    snap_t[0] = 0.0
    k = 1
    cap = 1024 if record_events else 0
    ev_t = np.empty(cap)
    ev_label = np.empty(cap, dtype=np.int64)
    ev_from = np.empty((cap, d))
    ev_to = np.empty((cap, d))
    ev_acc = np.empty(cap, dtype=np.bool_)
    n_ev = 0
    witness = np.zeros(4 + 2 * d)
    u = np.empty(d)
    y = np.empty(d)
    accepted = 0
    proposed = 0
    status = ERR_NONE
    t = 0.0
    next_grid = record_dt
    if n == 0 or total <= 0.0:
        if record_dt > 0.0:
            while k < n_snap:
                snaps[k] = pos
                snap_t[k] = k * record_dt
                k += 1
        return (snaps[:k], snap_t[:k], ev_t[:0], ev_label[:0], ev_from[:0], ev_to[:0],
                ev_acc[:0], accepted, proposed, status, witness, t)
    while True:
        t_next = t + rng.exponential(1.0) * math.exp(-wmax) / total
        if record_dt > 0.0:
            while next_grid <= horizon and next_grid < t_next and k < n_snap:
                snaps[k] = pos
                snap_t[k] = next_grid
                k += 1
                next_grid = k * record_dt
        if t_next > horizon:
            break
        t = t_next
        if proposed >= max_events:
            status = ERR_BUDGET
            witness[0] = t
            witness[2] = total
            break
        proposed += 1
        pick = rng.random() * wsum
        i = 0
        acc_b = math.exp(logw[0] - wmax)
        while acc_b < pick and i < n - 1:
            i += 1
            acc_b += math.exp(logw[i] - wmax)
        r = sample_radius(ep, sphere, rng.random())
        sample_direction(rng, d, u)
        for c in range(d):
            y[c] = pos[i, c] + r * u[c]
        acc = False
        ok = True
        if not inside(y, L):
            if reflect:
                fold(y, L)
            else:
                ok = False
        if ok:
            rr = dist(pos[i], y)
            if rr > 0.0:
                fac, delta = reverse_factor(mode, pos, n, i, y, pot, tlo, tstep, tvals, r_trunc)
                # rate and envelope both divided by (1 + B_i)
                if delta == np.inf:
                    rate = 0.0
                else:
                    nu_f = kernel_value(kp, d, pos[i], y)
                    nu_b = kernel_value(kp, d, y, pos[i]) if int(kp[0]) == KERNEL_STABLE_LIKE else nu_f
                    rate = nu_f * math.exp(-logw[i]) + nu_b * math.exp(-delta - logw[i])
                top = gamma * ep[3] * envelope_value(ep, d, rr)
                if rate > top * (1.0 + 1e-12):
                    status = ERR_ENVELOPE
                    witness[0] = t
                    witness[1] = i
                    witness[2] = rate
                    witness[3] = top
                    for c in range(d):
                        witness[4 + c] = pos[i, c]
                        witness[4 + d + c] = y[c]
                    break
                if rng.random() * top < rate:
                    acc = True
        if record_events:
            if n_ev == ev_t.shape[0]:
                cap2 = 2 * ev_t.shape[0]
                ev_t2 = np.empty(cap2)
                ev_t2[:n_ev] = ev_t
                ev_t = ev_t2
                ev_l2 = np.empty(cap2, dtype=np.int64)
                ev_l2[:n_ev] = ev_label
                ev_label = ev_l2
                ev_f2 = np.empty((cap2, d))
                ev_f2[:n_ev] = ev_from
                ev_from = ev_f2
                ev_o2 = np.empty((cap2, d))
                ev_o2[:n_ev] = ev_to
                ev_to = ev_o2
                ev_a2 = np.empty(cap2, dtype=np.bool_)
                ev_a2[:n_ev] = ev_acc
                ev_acc = ev_a2
            ev_t[n_ev] = t
            ev_label[n_ev] = i
            for c in range(d):
                ev_from[n_ev, c] = pos[i, c]
                ev_to[n_ev, c] = y[c]
            ev_acc[n_ev] = acc
            n_ev += 1
        if acc:
            accepted += 1
            for c in range(d):
                pos[i, c] = y[c]
            if mode != RATE_FREE:
                wmax, wsum = _refresh_bounds(logw, mode, pos, n, pot, tlo, tstep, tvals,
                                             r_trunc, e_lb, diam)
                total = unit * wsum
            if record_dt <= 0.0 and accepted % stride == 0:
                if k == snaps.shape[0]:
                    s2 = np.empty((2 * k, n, d))
                    s2[:k] = snaps
                    snaps = s2
                    st2 = np.empty(2 * k)
                    st2[:k] = snap_t
                    snap_t = st2
                snaps[k] = pos
                snap_t[k] = t
                k += 1
    return (snaps[:k], snap_t[:k], ev_t[:n_ev], ev_label[:n_ev], ev_from[:n_ev],
            ev_to[:n_ev], ev_acc[:n_ev], accepted, proposed, status, witness, t)


@njit(cache=True)
def glauber_loop(rng, pos0, labels0, L, pot, tlo, tstep, tvals, activity, e_floor,
                 horizon, record_dt, stride, max_events, record_events):
    """Birth-death chain: unit death rate per particle, births proposed uniformly
    at rate z*|box|*B and kept with probability exp(-E_loc)/B, B = max(1, e^-E_floor)."""
    d = pos0.shape[1]
    n = pos0.shape[0]
    cap = max(16, 2 * n)
    pos = np.empty((cap, d))
    labels = np.empty(cap, dtype=np.int64)
    pos[:n] = pos0
    labels[:n] = labels0
    next_label = 0
    for j in range(n):
        if labels0[j] >= next_label:
            next_label = labels0[j] + 1
    volume = (2.0 * L) ** d
    bmax = max(1.0, math.exp(-e_floor))
    birth_total = activity * volume * bmax

    # snapshots are ragged: flat coordinate store + per-snapshot offsets
    s_cap = 1024
    flat = np.empty((s_cap, d))
    flat_lab = np.empty(s_cap, dtype=np.int64)
    offsets = np.empty(1024, dtype=np.int64)
    snap_t = np.empty(1024)
    n_flat = 0
    k = 0

    e_cap = 1024 if record_events else 0
    ev_t = np.empty(e_cap)
    ev_label = np.empty(e_cap, dtype=np.int64)
    ev_kind = np.empty(e_cap, dtype=np.int64)
    ev_x = np.empty((e_cap, d))
    ev_acc = np.empty(e_cap, dtype=np.bool_)
    n_ev = 0
    witness = np.zeros(2 + d)
    y = np.empty(d)
    status = ERR_NONE
    t = 0.0
    n_events = 0
    births = 0
    deaths = 0
    rejected = 0
    next_grid = 0.0
    event_count = 0
    while True:
        total = n + birth_total
        t_next = t + rng.exponential(1.0 / total)
        # record snapshots: time grid, or every `stride` events (plus t=0)
        while (record_dt > 0.0 and next_grid <= horizon and next_grid < t_next) or \
                (record_dt <= 0.0 and k == 0):
            if k == offsets.shape[0] - 1:
                o2 = np.empty(2 * offsets.shape[0], dtype=np.int64)
                o2[: k + 1] = offsets[: k + 1]
                offsets = o2
                st2 = np.empty(2 * snap_t.shape[0])
                st2[:k] = snap_t[:k]
                snap_t = st2
            while n_flat + n > flat.shape[0]:
                f2 = np.empty((2 * flat.shape[0], d))
                f2[:n_flat] = flat[:n_flat]
                flat = f2
                fl2 = np.empty(2 * flat_lab.shape[0], dtype=np.int64)
                fl2[:n_flat] = flat_lab[:n_flat]
                flat_lab = fl2
            offsets[k] = n_flat
            flat[n_flat:n_flat + n] = pos[:n]
            flat_lab[n_flat:n_flat + n] = labels[:n]
            n_flat += n
            snap_t[k] = next_grid if record_dt > 0.0 else t
            k += 1
            offsets[k] = n_flat
            if record_dt > 0.0:
                next_grid = k * record_dt
            else:
                break
        if t_next > horizon:
            break
        if n_events >= max_events:
            status = ERR_BUDGET
            witness[0] = t
            break
        t = t_next
        n_events += 1
        kind = 0
        acc = False
        lab = -1
        if rng.random() * total < n:
            i = int(rng.random() * n)
            if i == n:
                i = n - 1
            kind = 1
            acc = True
            lab = labels[i]
            for c in range(d):
                y[c] = pos[i, c]
            pos[i] = pos[n - 1]
            labels[i] = labels[n - 1]
            n -= 1
            deaths += 1
        else:
            for c in range(d):
                y[c] = -L + 2.0 * L * rng.random()
            e = local_energy(pos, n, -1, y, pot, tlo, tstep, tvals)
            if e < e_floor:
                status = ERR_ENERGY_FLOOR
                witness[0] = t
                witness[1] = e
                for c in range(d):
                    witness[2 + c] = y[c]
                break
            if rng.random() * bmax < math.exp(-e):
                acc = True
                if n == cap:
                    cap *= 2
                    p2 = np.empty((cap, d))
                    p2[:n] = pos[:n]
                    pos = p2
                    l2 = np.empty(cap, dtype=np.int64)
                    l2[:n] = labels[:n]
                    labels = l2
                pos[n] = y
                labels[n] = next_label
                lab = next_label
                next_label += 1
                n += 1
                births += 1
            else:
                rejected += 1
        if record_events:
            if n_ev == ev_t.shape[0]:
                c2 = 2 * ev_t.shape[0]
                a = np.empty(c2)
                a[:n_ev] = ev_t
                ev_t = a
                b = np.empty(c2, dtype=np.int64)
                b[:n_ev] = ev_label
                ev_label = b
                b2 = np.empty(c2, dtype=np.int64)
                b2[:n_ev] = ev_kind
                ev_kind = b2
                x2 = np.empty((c2, d))
                x2[:n_ev] = ev_x
                ev_x = x2
                a2 = np.empty(c2, dtype=np.bool_)
                a2[:n_ev] = ev_acc
                ev_acc = a2
            ev_t[n_ev] = t
            ev_label[n_ev] = lab
            ev_kind[n_ev] = kind
            ev_x[n_ev] = y
            ev_acc[n_ev] = acc
            n_ev += 1
        if acc:
            event_count += 1
        if record_dt <= 0.0 and acc and event_count % stride == 0:
            if k == offsets.shape[0] - 1:
                o2 = np.empty(2 * offsets.shape[0], dtype=np.int64)
                o2[: k + 1] = offsets[: k + 1]
                offsets = o2
                st2 = np.empty(2 * snap_t.shape[0])
                st2[:k] = snap_t[:k]
                snap_t = st2
            while n_flat + n > flat.shape[0]:
                f2 = np.empty((2 * flat.shape[0], d))
                f2[:n_flat] = flat[:n_flat]
                flat = f2
                fl2 = np.empty(2 * flat_lab.shape[0], dtype=np.int64)
                fl2[:n_flat] = flat_lab[:n_flat]
                flat_lab = fl2
            offsets[k] = n_flat
            flat[n_flat:n_flat + n] = pos[:n]
            flat_lab[n_flat:n_flat + n] = labels[:n]
            n_flat += n
            snap_t[k] = t
            k += 1
            offsets[k] = n_flat
    counts = np.array([births, deaths, rejected])
    return (flat[:n_flat], flat_lab[:n_flat], offsets[: k + 1], snap_t[:k],
            ev_t[:n_ev], ev_label[:n_ev], ev_kind[:n_ev], ev_x[:n_ev], ev_acc[:n_ev],
            counts, status, witness, t)


@njit(cache=True)
def metropolis_loop(rng, pos, L, pot, tlo, tstep, tvals, sweeps, burn_in):
    """Single-site Metropolis with uniform redraw proposals; one sample per sweep.

    Uses total_energy differences so it shares no move bookkeeping with the
    jump-rate code it is used to check.
    """
    n, d = pos.shape
    out = np.empty((sweeps, n, d))
    e = total_energy(pos, n, pot, tlo, tstep, tvals)
    old = np.empty(d)
    for s in range(burn_in + sweeps):
        for _ in range(n):
            i = int(rng.random() * n)
            if i == n:
                i = n - 1
            for c in range(d):
                old[c] = pos[i, c]
                pos[i, c] = -L + 2.0 * L * rng.random()
            e_new = total_energy(pos, n, pot, tlo, tstep, tvals)
            if e_new == np.inf or (e_new > e and rng.random() >= math.exp(e - e_new)):
                for c in range(d):
                    pos[i, c] = old[c]
            else:
                e = e_new
        if s >= burn_in:
            out[s - burn_in] = pos
    return out


@njit(cache=True)
def nearest_neighbor_distances(snaps):
    m, n, d = snaps.shape
    out = np.empty((m, n))
    for s in range(m):
        for i in range(n):
            best = np.inf
            for j in range(n):
                if j != i:
                    r = dist(snaps[s, i], snaps[s, j])
                    if r < best:
                        best = r
            out[s, i] = best
    return out


@njit(cache=True)
def thinning_replicas(rng, pos0, replicas, L, reflect, kp, ep, sphere, pot, tlo, tstep, tvals,
                      mode, r_trunc, gamma, e_lb, horizon):
    """Final positions of independent thinning runs sharing one generator stream."""
    n, d = pos0.shape
    out = np.empty((replicas, n, d))
    status = ERR_NONE
    for k in range(replicas):
        pos = pos0.copy()
        res = thinning_loop(rng, pos, L, reflect, kp, ep, sphere, pot, tlo, tstep, tvals,
                            mode, r_trunc, gamma, e_lb, horizon, 1, horizon, 1 << 62, False)
        if res[9] != ERR_NONE:
            status = res[9]
            break
        out[k] = pos
    return out, status
