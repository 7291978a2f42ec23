"""Barrier selection: regime dispatch, the epsilon gap, and the b* bisection.

In the hybrid regime the minimum of a -> Gamma(a, b) sits at a(b) = (b-eps)+,
and GammaMin(b) = Gamma(a(b), b) increases strictly from beta*psi'(0+)/q < 0
to +infinity, so a plain bisection on b is exact and robust.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .errors import NumericError, RegimeError
from .levy import LevyModel
from .scale import ScaleEngine, build_engine
from .valuation import (Gamma, ProblemParams, Regime, ValueFunction, continuous_value,
                        gamma_small, hybrid_value, kappa_fn, periodic_value)

BISECT_MAX_ITER = 200
BISECT_WIDTH = 1e-12


@dataclass
class HybridSolution:
    """Solved strategy: regime, barriers, value handle, and solve diagnostics."""

    regime: Regime
    a_star: float
    b_star: float          # math.inf tags the unbounded continuous barrier
    value: ValueFunction
    epsilon: float | None = None
    diagnostics: dict = field(default_factory=dict)

    @property
    def barriers(self) -> tuple[float, float]:
        return (self.a_star, self.b_star)


def epsilon_root(params: ProblemParams, engine: ScaleEngine) -> float:
    """Unique eps > 0 with (beta*(q+r) - r) * Z^{(q+r)}(eps) = q.

    This is the interior gap b* - a*; it only exists in the hybrid regime.
    """
    if params.regime is not Regime.HYBRID:
        raise RegimeError("epsilon is defined only for r/(q+r) < beta < 1")
    hi = 1.0
    n = 0
    while kappa_fn(params, engine, hi) > 0.0:
        hi *= 2.0
        n += 1
        if n > 200:
            raise NumericError("bracket expansion for epsilon failed")
    lo = 0.0
    for _ in range(BISECT_MAX_ITER):
        mid = 0.5 * (lo + hi)
        if kappa_fn(params, engine, mid) > 0.0:
            lo = mid
        else:
            hi = mid
        if hi - lo < BISECT_WIDTH:
            break
    eps = 0.5 * (lo + hi)
    if abs(kappa_fn(params, engine, eps)) > 1e-12:
        raise NumericError("epsilon root residual above 1e-12")
    return eps


def a_of_b(params: ProblemParams, engine: ScaleEngine, b: float,
           eps: float | None = None) -> float:
    """Minimizer of a -> Gamma(a, b); equals (b - eps) clipped at 0."""
    if params.regime is not Regime.HYBRID:
        raise RegimeError("a(b) is defined only in the hybrid regime")
    if b <= 0.0:
        raise ValueError("b must be > 0")
    if eps is None:
        eps = epsilon_root(params, engine)
    return max(b - eps, 0.0)


def solve(params: ProblemParams, model: LevyModel) -> HybridSolution:
    """Select the optimal strategy for (model, params)."""
    engine = build_engine(model, params.q, params.r)
    regime = params.regime

    if regime is Regime.PURE_PERIODIC:
        a_p, vf = periodic_value(params, engine)
        return HybridSolution(regime, a_p, math.inf, vf,
                              diagnostics={"a_p_star": a_p})

    if regime is Regime.PURE_CONTINUOUS:
        b_c, vf = continuous_value(params, engine)
        return HybridSolution(regime, b_c, b_c, vf,
                              diagnostics={"b_c_star": b_c})

    eps = epsilon_root(params, engine)

    def gamma_min(b: float) -> float:
        return Gamma(params, engine, a_of_b(params, engine, b, eps), b)

    b_lo = 1e-9
    if gamma_min(b_lo) >= 0.0:
        raise NumericError("GammaMin is not negative near b = 0; model assumptions broken?")
    b_hi = max(1.0, eps)
    n = 0
    while gamma_min(b_hi) <= 0.0:
        b_hi *= 2.0
        n += 1
        if n > 200:
            raise NumericError("bracket expansion for b* failed (GammaMin never positive)")

    iters = 0
    for iters in range(1, BISECT_MAX_ITER + 1):
        mid = 0.5 * (b_lo + b_hi)
        if gamma_min(mid) < 0.0:
            b_lo = mid
        else:
            b_hi = mid
        if b_hi - b_lo < BISECT_WIDTH:
            break
    b_star = 0.5 * (b_lo + b_hi)
    a_star = a_of_b(params, engine, b_star, eps)

    resid_gamma = Gamma(params, engine, a_star, b_star)
    diagnostics = {
        "epsilon": eps,
        "residual_Gamma": resid_gamma,
        "iterations": iters,
        "bracket_width": b_hi - b_lo,
    }
    if a_star > 0.0:
        diagnostics["residual_gamma_small"] = gamma_small(params, engine, a_star, b_star)
    else:
        diagnostics["kappa_at_b"] = kappa_fn(params, engine, b_star)
    if abs(resid_gamma) > 1e-10:
        raise NumericError(f"smooth-fit residual Gamma(a*, b*) = {resid_gamma:g} too large")

    vf = hybrid_value(params, engine, a_star, b_star)
    return HybridSolution(Regime.HYBRID, a_star, b_star, vf, epsilon=eps,
                          diagnostics=diagnostics)


def sweep(params: ProblemParams, model: LevyModel, variable: str,
          values: list[float]) -> list[HybridSolution]:
    """Solve along a beta- or r-sweep; pure-regime endpoints are dispatched too.

    An r = 0 entry means periodic opportunities vanish: the pure-continuous
    solution is returned for it (its value functions do not involve r).
    """
    if variable not in ("beta", "r"):
        raise ValueError("variable must be 'beta' or 'r'")
    out = []
    for v in values:
        if variable == "beta":
            p = ProblemParams(params.q, params.r, v)
        else:
            if v == 0.0:
                engine = build_engine(model, params.q, params.r)
                pc = ProblemParams(params.q, params.r, max(params.beta, 1.0))
                b_c, vf = continuous_value(pc, engine)
                out.append(HybridSolution(Regime.PURE_CONTINUOUS, b_c, b_c, vf,
                                          diagnostics={"r": 0.0}))
                continue
            p = ProblemParams(params.q, v, params.beta)
        out.append(solve(p, model))
    return out
