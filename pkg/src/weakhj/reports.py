"""Assembled verification reports for the worked example spaces.

Each function runs a library verification suite and returns a plain
JSON-ready dict; the command-line layer serializes these untouched.
The two-point report checks every closed-form value of the smallest
space.  The hypercube and symmetric-group reports measure the tight
Poincare and entropy ratios and record them against the commonly
quoted n/4 and n/8 targets without asserting them.  `chain_report`
wires one certified entropy constant through the transport, dual and
hypercontractivity consequences with consistent bookkeeping: a
certified ratio sup C_m in the form Ent(e^f) <= C_m int alpha*(|grad
f|) e^f dmu yields the chain constant C = 2 C_m, transport checks at
C/2 = C_m, the dual bound at C, and norm growth exponent rho + 2t/C.
"""

from __future__ import annotations

import numpy as np

from .cost import quadratic
from .calculus import time_derivative, weak_infconv
from .funcineq import (
    hypercontractivity_check,
    mlsi_verify,
    poincare_estimate,
)
from .hj import hj_boundary, hj_residual
from .space import as_measure, build_example, uniform_measure
from .transport import check_transport_entropy, dual_sweep

_HC_LEGS = ((0.0, 1.0), (0.5, 1.0), (1.0, 0.5))


def two_point_report(t_grid=None, seed=0):
    """Closed-form verification on the two-point space, f = (1, 0).

    Expected values: Q~_t f = (1 - t/2, 0) on (0, 1); d/dt Q~_t f(0) =
    -1/2; the subsolution residual at 0 equals -1/2 + (1 - t/2)^2/2 and
    stays strictly negative; the boundary limit is -1/2; the Poincare
    ratio is 1/2.
    """
    space = build_example("two_point")
    mu = uniform_measure(2)
    cost = quadratic()
    f = np.array([1.0, 0.0])
    if t_grid is None:
        t_grid = np.linspace(0.1, 0.9, 9)
    ts = [float(t) for t in t_grid]

    table = []
    value_err = 0.0
    deriv_err = 0.0
    strict = True
    for t in ts:
        res = weak_infconv(f, t, cost, space)
        dq = time_derivative(f, t, cost, space, result=res)
        hj = hj_residual(f, t, cost, space)
        expected = [1.0 - t / 2.0, 0.0]
        residual0 = -0.5 + (1.0 - t / 2.0) ** 2 / 2.0
        value_err = max(value_err, float(np.max(np.abs(res.values - expected))))
        deriv_err = max(deriv_err, abs(float(dq[0]) + 0.5))
        strict = strict and hj.residuals[0] < 0.0 and hj.holds
        table.append({
            "t": t,
            "values": [float(v) for v in res.values],
            "expected": expected,
            "derivative": [float(v) for v in dq],
            "residual": [float(v) for v in hj.residuals],
            "residual_expected": [residual0, 0.0],
        })

    boundary = hj_boundary(f, cost, space)
    poincare = poincare_estimate(mu, space, seed=seed)
    return {
        "space": "two_point",
        "f": [1.0, 0.0],
        "cost": cost.label(),
        "table": table,
        "max_value_error": value_err,
        "max_derivative_error": deriv_err,
        "residual_strictly_negative": bool(strict),
        "boundary": boundary.to_json_dict(),
        "poincare": poincare.to_json_dict(),
        "poincare_expected": 0.5,
        "holds": bool(value_err <= 1e-12 and deriv_err <= 1e-12 and strict
                      and boundary.holds
                      and abs(poincare.best_ratio - 0.5) <= 1e-6),
        "seed": seed,
    }


def chain_report(space, mu=None, C=None, restarts=24, samples=300, seed=0):
    """Entropy constant and its transport/dual/norm-growth consequences.

    With C_m the certified (or supplied) constant of Ent(e^f) <= C_m
    int alpha*(|grad f|) e^f dmu for the quadratic cost, the chain runs
    at C = 2 C_m: sampled transport-entropy checks in both directions
    at C_m, the exponential dual bound at C, and hypercontractive norm
    growth with exponent rho + 2t/C on a small (rho, t) grid.
    `coherent` is True when every leg certifies.
    """
    cost = quadratic()
    mu = uniform_measure(space.n) if mu is None else as_measure(mu, space.n)
    estimated = C is None
    est = mlsi_verify(mu, 1.0 if estimated else C, cost, "I", space,
                      restarts=restarts, seed=seed)
    c_m = max(est.best_ratio, 1e-12) if estimated else float(C)
    chain_c = 2.0 * c_m

    te = {d: check_transport_entropy(mu, c_m, cost, space, direction=d,
                                     n_samples=samples, seed=seed)
          for d in ("I", "II")}
    dual = dual_sweep(mu, chain_c, cost, space, n_samples=samples, seed=seed)

    rng = np.random.default_rng(seed)
    hc_legs = []
    hc_ok = True
    for rho, t in _HC_LEGS:
        worst = None
        violations = 0
        for _ in range(50):
            g = rng.normal(0.0, 1.0, space.n)
            out = hypercontractivity_check(mu, chain_c, g, rho, t, space)
            if not out["holds"]:
                violations += 1
            if worst is None or out["margin"] < worst:
                worst = out["margin"]
        hc_ok = hc_ok and violations == 0
        hc_legs.append({"rho": rho, "t": t, "q": rho + 2.0 * t / chain_c,
                        "functions": 50, "violations": violations,
                        "min_margin": float(worst)})

    legs_ok = (not est.violated and not te["I"].violated
               and not te["II"].violated and not dual.violated and hc_ok)
    return {
        "space": {"n": space.n, "diameter": space.diameter},
        "cost": cost.label(),
        "entropy_constant": c_m,
        "entropy_constant_estimated": bool(estimated),
        "entropy_ratio": est.best_ratio,
        "chain_constant": chain_c,
        "mlsi": est.to_json_dict(),
        "transport": {d: r.to_json_dict() for d, r in te.items()},
        "dual": dual.to_json_dict(),
        "hypercontractivity": hc_legs,
        "coherent": bool(legs_ok),
        "samples": samples,
        "seed": seed,
    }


def hypercube_report(n=2, restarts=24, samples=300, seed=0):
    """Measured tight constants on the n-cube against quoted targets.

    Records the multi-start Poincare and entropy ratio estimates, the
    chain constant 2 C_m, and whether the quoted n/4 (entropy), n/8
    (transport) and n/2 levels are met.  The n/4-vs-n/2 bookkeeping
    discrepancy is recorded here, never asserted: measured tight ratios
    on small cubes sit at the n/2 level, above the n/4 and n/8 quotes.
    """
    space = build_example("hypercube", n)
    mu = uniform_measure(space.n)
    cost = quadratic()
    poincare = poincare_estimate(mu, space, restarts=restarts, seed=seed)
    est = mlsi_verify(mu, 1.0, cost, "I", space, restarts=restarts, seed=seed)
    c_m = max(est.best_ratio, 1e-12)
    te = check_transport_entropy(mu, n / 8.0, cost, space, direction="I",
                                 n_samples=samples, seed=seed)
    slack = 1e-9
    return {
        "space": f"hypercube({n})",
        "vertices": space.n,
        "poincare": poincare.to_json_dict(),
        "entropy_ratio": est.best_ratio,
        "entropy_witness": est.to_json_dict()["witness"],
        "chain_constant": 2.0 * c_m,
        "quoted_targets": {"entropy": n / 4.0, "transport": n / 8.0,
                           "fallback_level": n / 2.0},
        "targets_met": {
            "entropy_quarter": bool(est.best_ratio <= n / 4.0 + slack),
            "transport_eighth": bool(te.best_ratio <= n / 8.0 + slack),
            "half_level": bool(est.best_ratio <= n / 2.0 + slack),
        },
        "transport_sampled": te.to_json_dict(),
        "note": ("the quoted n/4 entropy and n/8 transport targets are "
                 "recorded against measured tight ratios, which sit at the "
                 "n/2 level on small cubes; the n/4-vs-n/2 discrepancy is "
                 "recorded, not asserted"),
        "seed": seed,
    }


def symmetric_group_report(n=3, restarts=8, seed=0):
    """Small-budget constants survey on the transposition graph of S_n.

    A stand-in for the large-n regimes that a desk-scale run cannot
    reach; reports measured Poincare and entropy ratios, the chain
    constant, and the diameter bound, asserting nothing.
    """
    space = build_example("symmetric_group", n)
    mu = uniform_measure(space.n)
    poincare = poincare_estimate(mu, space, restarts=restarts, seed=seed)
    est = mlsi_verify(mu, 1.0, quadratic(), "I", space, restarts=restarts, seed=seed)
    return {
        "space": f"symmetric_group({n})",
        "vertices": space.n,
        "diameter": space.diameter,
        "diameter_bound": 0.5 * space.diameter ** 2,
        "poincare": poincare.to_json_dict(),
        "entropy_ratio": est.best_ratio,
        "chain_constant": 2.0 * max(est.best_ratio, 1e-12),
        "note": ("desk-scale substitute: constants are measured lower "
                 "bounds at a small search budget, recorded without "
                 "assertion"),
        "seed": seed,
    }


def constants_report(space, mu=None, restarts=24, seed=0):
    """Poincare and entropy ratio estimates with chain bookkeeping."""
    mu = uniform_measure(space.n) if mu is None else as_measure(mu, space.n)
    poincare = poincare_estimate(mu, space, restarts=restarts, seed=seed)
    est = mlsi_verify(mu, 1.0, quadratic(), "I", space, restarts=restarts, seed=seed)
    return {
        "space": {"n": space.n, "diameter": space.diameter},
        "poincare": poincare.to_json_dict(),
        "diameter_bound": 0.5 * space.diameter ** 2,
        "entropy_ratio": est.best_ratio,
        "chain_constant": 2.0 * max(est.best_ratio, 1e-12),
        "restarts": restarts,
        "seed": seed,
    }
