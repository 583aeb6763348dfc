"""Nonlinear gradient, distance profiles, convex envelopes and the weak
inf-convolution operator on a finite metric space.

The weak operator at a point x reduces to a one-dimensional problem: build
the profile u -> min { f(y) : d(x,y) = u }, take its lower convex envelope
env, and minimize env(u) + t*alpha(u/t) over u in [0, max distance].  The
minimizer set is a closed interval; two-point measures supported on profile
attainers realize its endpoints.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

ARGMIN_TOL = 1e-9
_FLAT_TOL = 1e-12


def tilde_gradient(f, space):
    """|grad f|(x) = max_y max(0, f(x) - f(y)) / d(x, y); zero when x has no
    strictly lower point (0/0 convention at global minima)."""
    f = np.asarray(f, dtype=float)
    d = space.dist
    n = space.n
    if n == 1:
        return np.zeros(1)
    off = ~np.eye(n, dtype=bool)
    with np.errstate(divide="ignore", invalid="ignore"):
        slopes = np.where(off, (f[:, None] - f[None, :]) / d, 0.0)
    return np.maximum(slopes, 0.0).max(axis=1)


def lipschitz_seminorm(f, space):
    f = np.asarray(f, dtype=float)
    n = space.n
    if n == 1:
        return 0.0
    off = ~np.eye(n, dtype=bool)
    with np.errstate(divide="ignore", invalid="ignore"):
        slopes = np.where(off, np.abs(f[:, None] - f[None, :]) / space.dist, 0.0)
    return float(slopes.max())


def distance_profile(f, x, space):
    """Sorted distinct distances from x with the minimal f value on each
    sphere.  Returns (us, vs, attainers); attainers[k] is a point index
    realizing vs[k].  Near-equal distances are merged (relative 1e-12)."""
    f = np.asarray(f, dtype=float)
    d = space.dist[x]
    order = np.argsort(d, kind="stable")
    us, vs, att = [], [], []
    for i in order:
        u = float(d[i])
        if us and u - us[-1] <= 1e-12 * (1.0 + u):
            if f[i] < vs[-1]:
                vs[-1] = float(f[i])
                att[-1] = int(i)
        else:
            us.append(u)
            vs.append(float(f[i]))
            att.append(int(i))
    return np.array(us), np.array(vs), att


def convex_envelope(us, vs):
    """Indices of the lower convex hull of the profile points (monotone
    sweep; collinear interior points are dropped)."""
    hull = []
    m = len(us)
    for k in range(m):
        while len(hull) >= 2:
            i, j = hull[-2], hull[-1]
            if (vs[j] - vs[i]) * (us[k] - us[j]) >= (vs[k] - vs[j]) * (us[j] - us[i]):
                hull.pop()
            else:
                break
        hull.append(k)
    return hull


@dataclass
class EnvelopeProfile:
    """Lower convex envelope of a distance profile, as breakpoints.

    Every breakpoint touches the profile; slopes are strictly increasing.
    """

    x: int
    us: np.ndarray          # breakpoint distances, ascending, us[0] == 0
    vs: np.ndarray          # envelope values at breakpoints
    attainers: list         # point index realizing each breakpoint value

    @property
    def domain_max(self):
        return float(self.us[-1])

    def value(self, u):
        return np.interp(u, self.us, self.vs)

    def slopes(self):
        return np.diff(self.vs) / np.diff(self.us)

    def first_slope(self):
        if len(self.us) < 2:
            return 0.0
        return float((self.vs[1] - self.vs[0]) / (self.us[1] - self.us[0]))


def envelope(f, x, space):
    us, vs, att = distance_profile(f, x, space)
    hull = convex_envelope(us, vs)
    return EnvelopeProfile(x=x, us=us[hull], vs=vs[hull],
                           attainers=[att[k] for k in hull])


@dataclass
class ArgminSet:
    """Closed interval of optimal mean distances, with witness two-point
    measures (points, weights) realizing the endpoints."""

    u_min: float
    u_max: float
    witnesses: list = field(default_factory=list)


def _segment_argmin(u0, v0, u1, v1, t, cost):
    """Argmin interval and value of v0 + s (u - u0) + t alpha(u/t) on
    [u0, u1] for one envelope segment."""
    s = (v1 - v0) / (u1 - u0)

    def phi(u):
        return v0 + s * (u - u0) + t * cost.eval(u / t)

    if s >= 0.0:
        return u0, u0, phi(u0)

    if cost.kind == "quadratic":
        ustar = min(max(-s * t, u0), u1)
        return ustar, ustar, phi(ustar)

    if cost.kind == "power":
        g0 = s + cost.deriv(u0 / t)
        g1 = s + cost.deriv(u1 / t)
        if g0 >= 0.0:
            return u0, u0, phi(u0)
        if g1 <= 0.0:
            return u1, u1, phi(u1)
        lo, hi = u0, u1
        for _ in range(80):
            mid = 0.5 * (lo + hi)
            if s + cost.deriv(mid / t) < 0.0:
                lo = mid
            else:
                hi = mid
        ustar = 0.5 * (lo + hi)
        return ustar, ustar, phi(ustar)

    # qlin: derivative saturates at l = 2 a h, so the stationary set can be
    # a ray once the slope matches -l exactly
    l = cost.conjugate_domain_bound()
    if -s > l * (1.0 + _FLAT_TOL):
        return u1, u1, phi(u1)
    if abs(-s - l) <= _FLAT_TOL * (1.0 + l):
        knee = t * cost.h
        if knee >= u1:
            return u1, u1, phi(u1)
        lo = max(u0, knee)
        return lo, u1, phi(lo)
    ustar = min(max(t * (-s) / (2 * cost.a), u0), u1)
    return ustar, ustar, phi(ustar)


def _witness_for(env, u):
    """Two-point measure on profile attainers whose mean distance is u."""
    us, vs = env.us, env.vs
    if len(us) == 1 or u <= us[0]:
        return ((env.attainers[0],), (1.0,))
    k = int(np.searchsorted(us, u, side="right")) - 1
    if k >= len(us) - 1:
        return ((env.attainers[-1],), (1.0,))
    width = us[k + 1] - us[k]
    lam = (us[k + 1] - u) / width
    if lam >= 1.0 - 1e-14:
        return ((env.attainers[k],), (1.0,))
    if lam <= 1e-14:
        return ((env.attainers[k + 1],), (1.0,))
    return ((env.attainers[k], env.attainers[k + 1]), (float(lam), float(1.0 - lam)))


@dataclass
class WeakInfConv:
    values: np.ndarray
    argmin: list            # ArgminSet per point
    envelopes: list         # EnvelopeProfile per point


def weak_infconv(f, t, cost, space):
    """Weak inf-convolution: per point, the minimum over probability
    measures p of integral(f dp) + t alpha(mean distance / t).  Returns
    values, per-point argmin intervals and the envelopes used."""
    if t <= 0:
        raise ValueError(f"t must be positive, got {t}")
    f = np.asarray(f, dtype=float)
    n = space.n
    values = np.empty(n)
    argmins = []
    envs = []
    for x in range(n):
        env = envelope(f, x, space)
        envs.append(env)
        if len(env.us) == 1:
            values[x] = env.vs[0]
            argmins.append(ArgminSet(0.0, 0.0, [_witness_for(env, 0.0)]))
            continue
        best_val = np.inf
        pieces = []
        for k in range(len(env.us) - 1):
            lo, hi, val = _segment_argmin(env.us[k], env.vs[k],
                                          env.us[k + 1], env.vs[k + 1], t, cost)
            pieces.append((lo, hi, val))
            if val < best_val:
                best_val = val
        tol = ARGMIN_TOL * (1.0 + abs(best_val))
        lo = min(p[0] for p in pieces if p[2] <= best_val + tol)
        hi = max(p[1] for p in pieces if p[2] <= best_val + tol)
        wit = [_witness_for(env, lo)]
        if hi > lo:
            wit.append(_witness_for(env, hi))
        values[x] = best_val
        argmins.append(ArgminSet(float(lo), float(hi), wit))
    return WeakInfConv(values, argmins, envs)


def weak_infconv_bruteforce(f, t, cost, space, grid=33, rounds=12):
    """Independent oracle: exhaustive search over two-point measures with a
    uniform weight grid, adaptively refined around the best weight."""
    if t <= 0:
        raise ValueError(f"t must be positive, got {t}")
    f = np.asarray(f, dtype=float)
    n = space.n
    base = np.linspace(0.0, 1.0, grid)
    out = np.empty(n)
    for x in range(n):
        d = space.dist[x]
        fi, fj = np.repeat(f, n), np.tile(f, n)
        di, dj = np.repeat(d, n), np.tile(d, n)
        lo = np.zeros(n * n)
        hi = np.ones(n * n)
        best = np.inf
        for _ in range(rounds):
            lam = lo[:, None] + (hi - lo)[:, None] * base[None, :]
            mean_f = lam * fi[:, None] + (1.0 - lam) * fj[:, None]
            mean_d = lam * di[:, None] + (1.0 - lam) * dj[:, None]
            vals = mean_f + t * cost.eval(mean_d / t)
            best = min(best, float(vals.min()))
            k = np.argmin(vals, axis=1)
            lamstar = np.take_along_axis(lam, k[:, None], 1)[:, 0]
            w = (hi - lo) / (grid - 1)
            lo = np.maximum(0.0, lamstar - w)
            hi = np.minimum(1.0, lamstar + w)
        out[x] = best
    return out


def classical_infconv(f, t, cost, space):
    """Point-mass inf-convolution min_y f(y) + t alpha(d(x,y)/t)."""
    if t <= 0:
        raise ValueError(f"t must be positive, got {t}")
    f = np.asarray(f, dtype=float)
    return np.min(f[None, :] + t * cost.eval(space.dist / t), axis=1)


def time_derivative(f, t, cost, space, result=None):
    """Exact t-derivative of the weak inf-convolution: -beta(u/t) for u in
    the argmin interval (beta is constant on it)."""
    if result is None:
        result = weak_infconv(f, t, cost, space)
    return np.array([-cost.beta(a.u_min / t) for a in result.argmin])


def gradient_envelope_identity(f, x, space):
    """Compare |grad f|(x) with the envelope's right slope at 0.

    They agree except possibly when x is the unique global minimizer, where
    the gradient is 0 while the slope stays positive.
    """
    f = np.asarray(f, dtype=float)
    g = float(tilde_gradient(f, space)[x])
    s0 = envelope(f, x, space).first_slope()
    mins = np.flatnonzero(f <= f.min())
    unique_min = len(mins) == 1 and mins[0] == x
    return {
        "gradient": g,
        "first_slope": float(s0),
        "abs_first_slope": abs(float(s0)),
        "verdict": "unique-minimizer" if unique_min else "equal",
    }
