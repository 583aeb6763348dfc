"""Functional inequalities on finite metric spaces.

Variance and exponential-entropy functionals, multi-start subgradient
search for the best Poincare and modified log-Sobolev ratios of the
nonlinear gradient, hypercontractivity of the weak inf-convolution
semigroup, the bridge from Markov-kernel Dirichlet forms, and the
constant bookkeeping that links a Poincare constant to a
quadratic-linear entropy bound.

Every estimator returns an :class:`InequalityReport`.  A
"certified-no-violation" verdict is an empirical statement at the
configured search budget, never a proof; a "violated" verdict always
carries a witness function whose ratio re-evaluates above the tested
constant.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .calculus import lipschitz_seminorm, tilde_gradient, weak_infconv
from .cost import CostFunction, quadratic
from .space import as_function, as_measure, check_detailed_balance, kernel_moment_L

RATIO_SLACK = 1e-9

_E2 = math.exp(2.0)
_E4 = math.exp(4.0)

# search-budget defaults shared by all estimators
_RESTART_SCALES = (1e-4, 0.1, 1.0, 3.0, 10.0)
_ITERATIONS = 500
_STEP0 = 0.1


# ---------------------------------------------------------------------------
# basic functionals


def variance(f, mu):
    """Var_mu(f) = int f^2 dmu - (int f dmu)^2, computed in centered form."""
    f = np.asarray(f, dtype=float)
    mu = np.asarray(mu, dtype=float)
    if np.ptp(f) == 0:
        return 0.0
    m = float(mu @ f)
    return float(mu @ (f - m) ** 2)


def _phi2(x):
    # e^x - 1 - x without cancellation near 0
    x = np.asarray(x, dtype=float)
    small = np.abs(x) < 1e-3
    xs = np.where(small, x, 0.0)
    series = 0.5 * xs * xs * (1.0 + xs / 3.0 + xs * xs / 12.0 + xs ** 3 / 60.0 + xs ** 4 / 360.0)
    with np.errstate(over="ignore"):
        direct = np.expm1(np.where(small, 0.0, x)) - np.where(small, 0.0, x)
    return np.where(small, series, direct)


def _entropy_scaled(f, mu):
    """(ref, value) with Ent_mu(e^f) = e^ref * value and value >= 0.

    For ranges below 1 the entropy is assembled from expm1/log1p pieces
    that are individually sign-definite, so the relative error stays at
    machine level even when the entropy itself is O(range^2).  Larger
    ranges subtract the max before exponentiating (overflow guard).
    """
    rng = float(np.max(f) - np.min(f))
    if rng < 1.0:
        ref = float(mu @ f)
        delta = f - ref
        e1 = np.expm1(delta)
        t1 = float(mu @ (delta * e1))
        t2 = float(mu @ _phi2(delta))
        s = float(mu @ e1)
        t3 = (1.0 + s) * math.log1p(s) - s
        return ref, max(t1 - t2 - t3, 0.0)
    ref = float(np.max(f))
    w = np.exp(f - ref)
    total = float(mu @ w)
    return ref, max(float(mu @ (w * (f - ref))) - total * math.log(total), 0.0)


def entropy_exp(f, mu):
    """Ent_mu(e^f) = int f e^f dmu - (int e^f dmu) log int e^f dmu.

    The max of f is subtracted before exponentiating, so the value is
    finite whenever e^{max f} is; small ranges are evaluated by a
    compensated expansion to avoid cancellation.
    """
    f = np.asarray(f, dtype=float)
    mu = np.asarray(mu, dtype=float)
    if np.ptp(f) == 0:
        return 0.0
    ref, value = _entropy_scaled(f, mu)
    return math.exp(ref) * value


def lp_norm(g, mu, q):
    """(int g^q dmu)^{1/q}, with the limiting value exp(int log g dmu) at q=0."""
    g = np.asarray(g, dtype=float)
    mu = np.asarray(mu, dtype=float)
    if q <= 0:
        if np.any(g <= 0):
            raise ValueError("lp_norm with q <= 0 needs strictly positive values")
    elif np.any(g < 0):
        raise ValueError("lp_norm needs non-negative values")
    if q == 0:
        return math.exp(float(mu @ np.log(g)))
    return float(mu @ g ** q) ** (1.0 / q)


def _log_lp_norm_exp(f, mu, q):
    # log ||e^f||_q without forming e^f; q = 0 is the log-mean
    f = np.asarray(f, dtype=float)
    if q == 0:
        return float(mu @ f)
    qf = q * f
    m = float(np.max(qf))
    return (m + math.log(float(mu @ np.exp(qf - m)))) / q


# ---------------------------------------------------------------------------
# reports


@dataclass
class InequalityReport:
    """Outcome of an inequality sweep or constant search.

    `best_ratio` is the largest LHS/RHS ratio found and `witness` the
    function (or measure) achieving it.  The verdict is "violated" only
    when the witness re-evaluates above `constant` + 1e-9.
    """

    inequality: str
    constant: float
    best_ratio: float
    witness: np.ndarray | None
    verdict: str
    restarts: int
    iterations: int
    seed: int
    details: dict = field(default_factory=dict)

    @property
    def violated(self):
        return self.verdict == "violated"

    def to_json_dict(self):
        w = None if self.witness is None else [float(v) for v in np.ravel(self.witness)]
        return {
            "inequality": self.inequality,
            "constant": self.constant,
            "best_ratio": self.best_ratio,
            "witness": w,
            "verdict": self.verdict,
            "restarts": self.restarts,
            "iterations": self.iterations,
            "seed": self.seed,
            "details": dict(self.details),
        }


def _verdict(ratio, constant):
    return "violated" if ratio > constant + RATIO_SLACK else "certified-no-violation"


def worker_count():
    """Parallel workers for estimator restarts (WEAKHJ_THREADS, default 1)."""
    raw = os.environ.get("WEAKHJ_THREADS", "1")
    try:
        k = int(raw)
    except ValueError:
        k = 1
    return max(k, 1)


# ---------------------------------------------------------------------------
# subgradient ascent machinery


def _gradient_with_argmax(f, space):
    # competitor y maximizing (f(x)-f(y))/d(x,y); first index wins ties
    d = space.dist
    n = f.size
    off = ~np.eye(n, dtype=bool)
    slopes = np.where(off, (f[:, None] - f[None, :]) / np.where(off, d, 1.0), -np.inf)
    ys = np.argmax(slopes, axis=1)
    g = np.maximum(slopes[np.arange(n), ys], 0.0) if n > 1 else np.zeros(n)
    return g, ys


def _seed_function(rng, space, scale):
    # alternate Gaussian profiles with indicators of proper metric balls
    n = space.n
    if n > 1 and rng.random() < 0.5:
        center = int(rng.integers(n))
        row = space.dist[center]
        radii = np.unique(row)[:-1]
        if radii.size:
            radius = float(rng.choice(radii))
            return scale * (row <= radius).astype(float)
    return scale * rng.standard_normal(n)


def _ascend(value_and_grad, f0, iterations, range_target):
    # range_target pins the amplitude so the ascent optimizes shape only;
    # the caller rescans amplitudes along the best shape afterwards
    f = np.array(f0, dtype=float)
    best_r = -np.inf
    best_f = f.copy()
    for it in range(1, iterations + 1):
        r, gr = value_and_grad(f)
        if r > best_r:
            best_r = r
            best_f = f.copy()
        norm = float(np.linalg.norm(gr))
        if not math.isfinite(norm) or norm < 1e-15:
            break
        f = f + (_STEP0 / math.sqrt(it)) * gr / norm
        if range_target is not None:
            lo, hi = float(f.min()), float(f.max())
            if hi > lo:
                f = range_target * (f - lo) / (hi - lo)
    return best_r, best_f


def _run_restarts(value_and_grad, space, restarts, seed, fix_amplitude, scale_scan):
    children = np.random.SeedSequence(seed).spawn(restarts)

    def one(k):
        rng = np.random.default_rng(children[k])
        f0 = _seed_function(rng, space, _RESTART_SCALES[k % len(_RESTART_SCALES)])
        target = float(np.ptp(f0)) if fix_amplitude else None
        if target == 0.0:
            target = None
        return _ascend(value_and_grad, f0, _ITERATIONS, target)

    workers = worker_count()
    if workers > 1 and restarts > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(one, range(restarts)))
    else:
        results = [one(k) for k in range(restarts)]

    best_r = -np.inf
    best_f = None
    for r, fb in results:  # restart order keeps the merge deterministic
        if r > best_r:
            best_r, best_f = r, fb
    if scale_scan and best_f is not None and np.ptp(best_f) > 0:
        unit = (best_f - best_f.min()) / np.ptp(best_f)
        for s in np.logspace(-9.0, 2.0, 240):
            r = value_and_grad(s * unit)[0]
            if r > best_r:
                best_r, best_f = r, s * unit
    return best_r, best_f


def _poincare_value_and_grad(mu, space):
    d = space.dist

    def vg(f):
        g, ys = _gradient_with_argmax(f, space)
        energy = float(mu @ g ** 2)
        if energy <= 1e-300:
            return -np.inf, -f
        ratio = variance(f, mu) / energy
        mean = float(mu @ f)
        grad = 2.0 * mu * (f - mean)
        active = np.flatnonzero(g > 0)
        coef = 2.0 * ratio * mu[active] * g[active] / d[active, ys[active]]
        np.subtract.at(grad, active, coef)
        np.add.at(grad, ys[active], coef)
        return ratio, grad

    return vg


def _mlsi_value_and_grad(mu, cost, sign, space):
    d = space.dist

    def vg(f):
        if np.ptp(f) == 0:
            return -np.inf, f
        g, ys = _gradient_with_argmax(sign * f, space)
        conj = cost.conjugate(g)
        if not np.all(np.isfinite(conj)):
            return -np.inf, -f
        ref, numer = _entropy_scaled(f, mu)
        w = np.exp(f - ref)
        denom = float(mu @ (conj * w))
        if denom <= 1e-300:
            return -np.inf, -f
        ratio = numer / denom
        grad_n = mu * w * (f - ref - math.log(float(mu @ w)))
        grad_d = mu * conj * w
        active = np.flatnonzero(g > 0)
        coef = (
            sign
            * mu[active]
            * w[active]
            * cost.conjugate_deriv(g[active])
            / d[active, ys[active]]
        )
        np.add.at(grad_d, active, coef)
        np.subtract.at(grad_d, ys[active], coef)
        return ratio, grad_n - ratio * grad_d

    return vg


# ---------------------------------------------------------------------------
# constant estimators


def poincare_estimate(mu, space, restarts=64, seed=0):
    """Best ratio Var_mu(f) / int |grad f|^2 dmu found by multi-start ascent.

    The ratio is scale and shift invariant, so iterates are normalized
    to unit range.  The report tests the ratio against the diameter
    bound D^2/2.
    """
    mu = as_measure(mu, space.n)
    diameter = space.diameter
    bound = 0.5 * diameter * diameter
    details = {"diameter": diameter}
    if np.count_nonzero(mu) <= 1:
        return InequalityReport(
            "poincare", bound, 0.0, None, "certified-no-violation", restarts, 0, seed, details
        )
    ratio, witness = _run_restarts(
        _poincare_value_and_grad(mu, space), space, restarts, seed, True, False
    )
    ratio = max(ratio, 0.0)
    return InequalityReport(
        "poincare",
        bound,
        ratio,
        witness,
        _verdict(ratio, bound),
        restarts,
        restarts * _ITERATIONS,
        seed,
        details,
    )


def mlsi_verify(mu, C, cost, type="I", space=None, restarts=64, seed=0):
    """Search for f with Ent_mu(e^f) > C int alpha*(|grad (+/-f)|) e^f dmu.

    Type I uses the gradient of f, type II the gradient of -f.  The
    ratio is not scale invariant, so the best function found is also
    rescanned over two orders of magnitude in amplitude.
    """
    if C <= 0:
        raise ValueError(f"mlsi constant must be positive, got {C}")
    if type not in ("I", "II"):
        raise ValueError(f"mlsi type must be 'I' or 'II', got {type!r}")
    mu = as_measure(mu, space.n)
    sign = 1.0 if type == "I" else -1.0
    ratio, witness = _run_restarts(
        _mlsi_value_and_grad(mu, cost, sign, space), space, restarts, seed, True, True
    )
    ratio = max(ratio, 0.0)
    return InequalityReport(
        "mlsi-" + type,
        float(C),
        ratio,
        witness if ratio > 0 else None,
        _verdict(ratio, C),
        restarts,
        restarts * _ITERATIONS,
        seed,
        {"cost": cost.label()},
    )


# ---------------------------------------------------------------------------
# Markov-kernel Dirichlet forms and the bridge to the nonlinear gradient


def classical_mlsi_rhs(f, mu, K):
    """sum_{x,y} (e^{f(y)} - e^{f(x)}) (f(y) - f(x)) mu(x) K(x,y)."""
    f = np.asarray(f, dtype=float)
    k = K.matrix
    if f.shape != (k.shape[0],):
        raise ValueError(f"function has shape {f.shape}, kernel is {k.shape}")
    ef = np.exp(f)
    df = f[None, :] - f[:, None]
    de = ef[None, :] - ef[:, None]
    return float(np.sum(de * df * mu[:, None] * k))


def gross_rhs(f, mu, K):
    """sum_{x,y} (f(y) - f(x))^2 mu(x) K(x,y)."""
    f = np.asarray(f, dtype=float)
    k = K.matrix
    if f.shape != (k.shape[0],):
        raise ValueError(f"function has shape {f.shape}, kernel is {k.shape}")
    df = f[None, :] - f[:, None]
    return float(np.sum(df * df * mu[:, None] * k))


def toto_bridge_check(mu, K, space, samples=200, seed=0):
    """Sampled check that the kernel Dirichlet form is dominated by the
    nonlinear-gradient form:

        classical_mlsi_rhs(f) <= 2 L sum_x |grad f|^2(x) e^{f(x)} mu(x)

    with L the second distance moment of K.  Detailed balance is a
    premise and is checked first.
    """
    mu = as_measure(mu, space.n)
    balance = check_detailed_balance(mu, K)
    if not balance["holds"]:
        raise ValueError(
            f"detailed balance fails at {balance['witness']} "
            f"(asymmetry {balance['max_asymmetry']:.3e})"
        )
    L = kernel_moment_L(space, K)
    bound = 2.0 * L
    rng = np.random.default_rng(seed)
    best = 0.0
    witness = None
    for k in range(samples):
        f = _seed_function(rng, space, _RESTART_SCALES[k % len(_RESTART_SCALES)])
        g = tilde_gradient(f, space)
        denom = float(mu @ (g ** 2 * np.exp(f)))
        if denom <= 1e-14:
            continue
        ratio = classical_mlsi_rhs(f, mu, K) / denom
        if ratio > best:
            best, witness = ratio, f
    return InequalityReport(
        "kernel-bridge",
        bound,
        best,
        witness,
        _verdict(best, bound),
        1,
        samples,
        seed,
        {"L": L},
    )


# ---------------------------------------------------------------------------
# hypercontractivity


def hypercontractivity_check(mu, C, f, rho, t, space):
    """Compare ||e^{Q_t f}||_{rho + 2t/C} with ||e^f||_rho (quadratic cost).

    Allowed ranges: rho >= 0 with t >= 0, or rho < 0 with
    0 <= t <= -rho C / 2.  Norms are evaluated in log space, with the
    q = 0 norm the exponential of the mean log.
    """
    mu = as_measure(mu, space.n)
    f = as_function(f, space.n)
    if t < 0:
        raise ValueError(f"time must be non-negative, got {t}")
    if rho < 0 and t > -rho * C / 2 + 1e-12:
        raise ValueError(
            f"with rho={rho} the admissible range is t <= {-rho * C / 2:.6g}, got {t}"
        )
    q = rho + 2.0 * t / C
    if t == 0:
        value = _log_lp_norm_exp(f, mu, rho)
        return {"holds": True, "q": q, "log_lhs": value, "log_rhs": value, "margin": 0.0}
    qtf = weak_infconv(f, t, quadratic(), space).values
    log_lhs = _log_lp_norm_exp(qtf, mu, q)
    log_rhs = _log_lp_norm_exp(f, mu, rho)
    return {
        "holds": bool(log_lhs <= log_rhs + 1e-10),
        "q": q,
        "log_lhs": log_lhs,
        "log_rhs": log_rhs,
        "margin": log_rhs - log_lhs,
    }


# ---------------------------------------------------------------------------
# quadratic-linear constants


def bobkov_ledoux_K(C, c):
    """Entropy constant K(c) produced from a Poincare constant C for
    c-Lipschitz functions, valid for 0 < c < 2/sqrt(C):

        K = (C/2) ((2 + 2e^2 + c sqrt(C)) / (2 - c sqrt(C)))^2 e^{c sqrt(5C)}
    """
    if C <= 0:
        raise ValueError(f"Poincare constant must be positive, got {C}")
    root = math.sqrt(C)
    if not 0 < c < 2.0 / root:
        raise ValueError(f"Lipschitz bound must lie in (0, {2.0 / root:.6g}), got {c}")
    frac = (2.0 + 2.0 * _E2 + c * root) / (2.0 - c * root)
    return 0.5 * C * frac * frac * math.exp(c * math.sqrt(5.0 * C))


def bobkov_ledoux_params(C, c):
    """Companion constants: the quadratic-linear cost alpha_a^h with
    a = 1/(4K), h = 2cK, and the transport constant C2 = K/2."""
    K = bobkov_ledoux_K(C, c)
    return {"K": K, "a": 1.0 / (4.0 * K), "h": 2.0 * c * K, "C2": K / 2.0}


def qlin_scaling_check(f, t, a, h, space):
    """Check the scaling identity Q_1(t f) = t Q_t f for the
    quadratic-linear cost, valid while t < a h / Lip(f)."""
    f = as_function(f, space.n)
    if t <= 0:
        raise ValueError(f"time must be positive, got {t}")
    lip = lipschitz_seminorm(f, space)
    if lip > 0 and t >= a * h / lip:
        raise ValueError(
            f"scaling identity needs t < a h / Lip(f) = {a * h / lip:.6g}, got {t}"
        )
    cost = CostFunction("qlin", a=a, h=h)
    lhs = weak_infconv(t * f, 1.0, cost, space).values
    rhs = t * weak_infconv(f, t, cost, space).values
    diff = float(np.max(np.abs(lhs - rhs)))
    return {"holds": bool(diff <= 1e-10), "max_diff": diff, "lhs": lhs, "rhs": rhs}


def appendix_checks(mu, C, f, c, space):
    """Evaluate the three auxiliary inequalities that turn a Poincare
    constant C into an entropy bound for c-Lipschitz functions.

    * variance-exponential:  Var(f e^{f/2}) against
      C int |grad f|^2 (1 + e^4 + f + f^2/4) e^f dmu  (any f);
    * second-moment-exponential:  int f^2 e^f dmu against
      C ((2+2e^2+c sqrt(C))/(2-c sqrt(C)))^2 int |grad f|^2 e^f dmu
      (needs int f dmu = 0, Lip(f) <= c, c < 2/sqrt(C));
    * second-moment-tilt:  int f^2 dmu against
      e^{c sqrt(5C)} int f^2 e^{-|f|} dmu  (needs the same premises
      except the bound on c).

    C must itself be a certified Poincare constant for mu; that premise
    is the caller's responsibility.  Premise failures on f are reported
    per inequality rather than raised.
    """
    mu = as_measure(mu, space.n)
    f = as_function(f, space.n)
    g = tilde_gradient(f, space)
    ef = np.exp(f)
    out = {}

    lhs = variance(f * np.exp(f / 2.0), mu)
    rhs = C * float(mu @ (g ** 2 * (1.0 + _E4 + f + f ** 2 / 4.0) * ef))
    out["variance-exponential"] = {
        "premise": "ok",
        "holds": bool(lhs <= rhs * (1.0 + 1e-9) + 1e-12),
        "lhs": lhs,
        "rhs": rhs,
    }

    mean = float(mu @ f)
    lip = lipschitz_seminorm(f, space)
    premises = []
    if abs(mean) > 1e-9:
        premises.append(f"mean {mean:.3e} != 0")
    if lip > c * (1.0 + 1e-12):
        premises.append(f"Lip(f) = {lip:.6g} exceeds c = {c:.6g}")
    centered_ok = not premises

    root = math.sqrt(C)
    if c * root >= 2.0:
        reason = "; ".join(premises + [f"c = {c:.6g} not below 2/sqrt(C) = {2.0 / root:.6g}"])
        out["second-moment-exponential"] = {"premise": reason, "holds": None}
    elif not centered_ok:
        out["second-moment-exponential"] = {"premise": "; ".join(premises), "holds": None}
    else:
        lhs = float(mu @ (f ** 2 * ef))
        frac = (2.0 + 2.0 * _E2 + c * root) / (2.0 - c * root)
        rhs = C * frac * frac * float(mu @ (g ** 2 * ef))
        out["second-moment-exponential"] = {
            "premise": "ok",
            "holds": bool(lhs <= rhs * (1.0 + 1e-9) + 1e-12),
            "lhs": lhs,
            "rhs": rhs,
        }

    if not centered_ok:
        out["second-moment-tilt"] = {"premise": "; ".join(premises), "holds": None}
    else:
        lhs = float(mu @ f ** 2)
        rhs = math.exp(c * math.sqrt(5.0 * C)) * float(mu @ (f ** 2 * np.exp(-np.abs(f))))
        out["second-moment-tilt"] = {
            "premise": "ok",
            "holds": bool(lhs <= rhs * (1.0 + 1e-9) + 1e-12),
            "lhs": lhs,
            "rhs": rhs,
        }
    return out


# ---------------------------------------------------------------------------
# concentration


def herbst_tail_check(mu, C, space, samples=200, seed=0):
    """Sampled check of the Gaussian tail bound mu(f >= h) <= e^{-h^2/(4C)}
    for centered 1-Lipschitz functions; C is a certified transport or
    entropy constant.  The reported ratio is tail mass over bound."""
    mu = as_measure(mu, space.n)
    rng = np.random.default_rng(seed)
    best = 0.0
    witness = None
    for k in range(samples):
        f = _seed_function(rng, space, _RESTART_SCALES[k % len(_RESTART_SCALES)])
        lip = lipschitz_seminorm(f, space)
        if lip <= 1e-14:
            continue
        f = f / lip
        f = f - float(mu @ f)
        for h in np.unique(f[f > 1e-12]):
            tail = float(mu @ (f >= h - 1e-12))
            ratio = tail / math.exp(-h * h / (4.0 * C))
            if ratio > best:
                best, witness = ratio, f
    return InequalityReport(
        "herbst-tail",
        1.0,
        best,
        witness,
        _verdict(best, 1.0),
        1,
        samples,
        seed,
        {"C": float(C)},
    )
