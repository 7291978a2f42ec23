"""Closed-form dividend values for barrier strategies.

Builds the two-barrier value v_{a,b}, its periodic/continuous components, the
pure-regime values, the smooth-fit objective Gamma and its a-derivative, and
the piecewise closed forms of the generator and of the periodic-payment gain
term used by the verification module.
"""

from __future__ import annotations

import bisect
import enum
import math
from dataclasses import dataclass

from .errors import RegimeError
from .expsum import ExpSum
from .scale import ScaleEngine

# When enabled, v_hybrid cross-checks the periodic/continuous NPV decomposition
# f_p + beta*f_c against the assembled value at every call.
DEBUG_DECOMPOSITION = False


class Regime(enum.Enum):
    HYBRID = "hybrid"
    PURE_PERIODIC = "pure_periodic"
    PURE_CONTINUOUS = "pure_continuous"


@dataclass(frozen=True)
class ProblemParams:
    """Discount rate q, periodic decision intensity r, and payout ratio beta."""

    q: float
    r: float
    beta: float

    def __post_init__(self):
        if self.q <= 0.0 or self.r <= 0.0 or self.beta <= 0.0:
            raise ValueError("q, r, beta must all be > 0")

    @property
    def regime(self) -> Regime:
        if self.beta <= self.r / (self.q + self.r):
            return Regime.PURE_PERIODIC
        if self.beta >= 1.0:
            return Regime.PURE_CONTINUOUS
        return Regime.HYBRID


def _check_pair(a: float, b: float):
    if not (0.0 <= a < b):
        raise ValueError(f"need 0 <= a < b, got a={a}, b={b}")


def _check_engine(params: ProblemParams, engine: ScaleEngine):
    if abs(engine.q - params.q) > 1e-12 or abs(engine.r - params.r) > 1e-12:
        raise ValueError("engine was built for different (q, r)")


# ---------------------------------------------------------------------------
# smooth-fit objective

def Gamma(params: ProblemParams, engine: ScaleEngine, a: float, b: float,
          x: float = 0.0) -> float:
    """Gamma(a, b; x); Gamma(a, b) is the x = 0 value whose root fixes b*."""
    _check_pair(a, b)
    _check_engine(params, engine)
    q, r, beta = params.q, params.r, params.beta
    s = a - x
    dp = engine.model.psi_prime_at_zero()
    return (r / (q + r) * engine.fam_q.Zbar_at(s)
            + beta * dp / q
            + (beta - r / (q + r))
            * (engine.composite("Zbar", a, b, x)
               + (r / q) * engine.fam_q.Z_at(s) * engine.fam_qr.Zbar_at(b - a)))


def kappa_fn(params: ProblemParams, engine: ScaleEngine, y: float) -> float:
    """kappa(y) = 1 - (beta*(q+r) - r) * Z^{(q+r)}(y) / q; decreasing in y."""
    if y < 0.0:
        raise ValueError("y must be >= 0")
    _check_engine(params, engine)
    q, r, beta = params.q, params.r, params.beta
    return 1.0 - (beta * (q + r) - r) * engine.fam_qr.Z_at(y) / q


def gamma_small(params: ProblemParams, engine: ScaleEngine, a: float, b: float) -> float:
    """d Gamma(a, b) / da = (r/(q+r)) Z^{(q)}(a) kappa(b - a), for 0 < a < b."""
    if not (0.0 < a < b):
        raise ValueError(f"need 0 < a < b, got a={a}, b={b}")
    _check_engine(params, engine)
    q, r = params.q, params.r
    return r / (q + r) * engine.fam_q.Z_at(a) * kappa_fn(params, engine, b - a)


# ---------------------------------------------------------------------------
# periodic / continuous NPV components

def _k_small(params, engine, a, b, x) -> float:
    q, r = params.q, params.r
    s = a - x
    return (r / (q + r)) * (engine.fam_q.Zbar_at(s)
                            - (r / q) * engine.fam_qr.Zbar_at(b - a) * engine.fam_q.Z_at(s)
                            - engine.composite("Zbar", a, b, x))


def _i_small(params, engine, a, b, x) -> float:
    q, r = params.q, params.r
    s = a - x
    dp = engine.model.psi_prime_at_zero()
    delta = b - a
    return (engine.composite("Zbar", a, b, x)
            - dp * engine.composite("Wbar", a, b, x)
            + (r / q) * engine.fam_q.Z_at(s)
            * (engine.fam_qr.Zbar_at(delta) - dp * engine.fam_qr.Wbar_at(delta)))


def f_p(params: ProblemParams, engine: ScaleEngine, a: float, b: float, x: float) -> float:
    """Expected NPV of the periodically collected dividends under (a, b)."""
    _check_pair(a, b)
    _check_engine(params, engine)
    ratio = engine.kernel_K(a, b, x) / engine.kernel_K(a, b, 0.0)
    return ratio * _k_small(params, engine, a, b, 0.0) - _k_small(params, engine, a, b, x)


def f_c(params: ProblemParams, engine: ScaleEngine, a: float, b: float, x: float) -> float:
    """Expected NPV of the continuously collected dividends under (a, b)."""
    _check_pair(a, b)
    _check_engine(params, engine)
    ratio = engine.kernel_K(a, b, x) / engine.kernel_K(a, b, 0.0)
    return ratio * _i_small(params, engine, a, b, 0.0) - _i_small(params, engine, a, b, x)


# ---------------------------------------------------------------------------
# piecewise value functions

class ValueFunction:
    """Piecewise exponential-sum value with analytic derivatives of any order.

    Regions are left-closed: an evaluation at an interior knot uses the
    right-hand segment unless `side="left"` asks for the one-sided limit.
    """

    def __init__(self, regime: Regime, a_star: float, b_star: float,
                 knots: list[float], segments: list[ExpSum]):
        if len(segments) != len(knots) + 1:
            raise ValueError("need one more segment than interior knots")
        self.regime = regime
        self.a_star = a_star
        self.b_star = b_star
        self.knots = list(knots)
        self.segments = segments

    def __call__(self, x: float, order: int = 0, side: str = "right") -> float:
        if x < 0.0:
            raise ValueError("value function is defined on x >= 0")
        if side == "left":
            idx = bisect.bisect_left(self.knots, x)
        else:
            idx = bisect.bisect_right(self.knots, x)
        return self.segments[idx](x, order)

    def deriv_jump(self, knot: float, order: int) -> float:
        """Right minus left one-sided derivative at an interior knot."""
        return self(knot, order, side="right") - self(knot, order, side="left")


def hybrid_value(params: ProblemParams, engine: ScaleEngine, a: float, b: float) -> ValueFunction:
    """v_{a,b} as a piecewise ExpSum over [0, a], [a, b], [b, inf)."""
    _check_pair(a, b)
    _check_engine(params, engine)
    q, r, beta = params.q, params.r, params.beta
    dp = engine.model.psi_prime_at_zero()
    delta = b - a
    zqr_d = engine.fam_qr.Z_at(delta)
    zbqr_d = engine.fam_qr.Zbar_at(delta)
    wgt = beta - r / (q + r)

    pack = engine.composites(a, b)
    # s-side (x <= a) ingredients
    K_s = pack.z_theta_s(0.0).scaled(q / ((q + r) * zqr_d)) + engine.fam_q.Z.scaled(r / (q + r))
    G_s = (engine.fam_q.Zbar.scaled(r / (q + r))
           + (pack.Zbar_s + engine.fam_q.Z.scaled((r / q) * zbqr_d)).scaled(wgt)
           + ExpSum.constant(beta * dp / q))
    gamma_ab = G_s(a)
    ratio = gamma_ab / K_s(a)

    seg_low = K_s.compose_affine(a, -1.0).scaled(ratio) - G_s.compose_affine(a, -1.0)

    # a < x < b: composites collapse onto the single (q+r) family at b - x
    K_mid = (engine.fam_qr.Z.compose_affine(b, -1.0).scaled(q / ((q + r) * zqr_d))
             + ExpSum.constant(r / (q + r)))
    G_mid = (ExpSum.affine(a * r / (q + r), -r / (q + r))
             + engine.fam_qr.Zbar.compose_affine(b, -1.0).scaled(wgt)
             + ExpSum.constant(beta * dp / q + wgt * (r / q) * zbqr_d))
    seg_mid = K_mid.scaled(ratio) - G_mid

    # x >= b: Z-type terms are trivial, v is affine with slope beta
    K_hi = (q / zqr_d + r) / (q + r)
    G_hi = (ExpSum.affine(a * r / (q + r) + wgt * b, -r / (q + r) - wgt)
            + ExpSum.constant(beta * dp / q + wgt * (r / q) * zbqr_d))
    seg_hi = ExpSum.constant(K_hi * ratio) - G_hi

    if a > 0.0:
        return ValueFunction(Regime.HYBRID, a, b, [a, b], [seg_low, seg_mid, seg_hi])
    return ValueFunction(Regime.HYBRID, a, b, [b], [seg_mid, seg_hi])


def v_hybrid(params: ProblemParams, engine: ScaleEngine, a: float, b: float,
             x: float) -> float:
    """Scalar v_{a,b}(x) = (K(a-x)/K(a)) Gamma(a,b) - Gamma(a,b;x)."""
    _check_pair(a, b)
    _check_engine(params, engine)
    if x < 0.0:
        raise ValueError("x must be >= 0")
    ratio = engine.kernel_K(a, b, x) / engine.kernel_K(a, b, 0.0)
    val = ratio * Gamma(params, engine, a, b) - Gamma(params, engine, a, b, x)
    if DEBUG_DECOMPOSITION:
        split = f_p(params, engine, a, b, x) + params.beta * f_c(params, engine, a, b, x)
        if abs(split - val) > 1e-9 * max(1.0, abs(val)):
            raise AssertionError(
                f"NPV decomposition broke: f_p + beta*f_c = {split!r}, v = {val!r}")
    return val


def periodic_barrier(params: ProblemParams, engine: ScaleEngine) -> float:
    """Optimal pure-periodic barrier a*_p (0 when the drift is too mild)."""
    _check_engine(params, engine)
    q, r = params.q, params.r
    dp = engine.model.psi_prime_at_zero()
    phi_qr = engine.phi_qr
    if dp >= -q * (q + r) / (r * phi_qr):
        return 0.0

    def gap(a: float) -> float:
        lhs = -phi_qr * (r / (r + q)) * (engine.fam_q.Zbar_at(a) + dp / q)
        rhs = (r / (r + q)) * engine.fam_q.Z_at(a) \
            + (q / (r + q)) * engine.fam_q.Z_theta_at(a, phi_qr)
        return lhs - rhs

    hi = 1.0
    while gap(hi) > 0.0:
        hi *= 2.0
    lo = 0.0
    while hi - lo > 1e-10:
        mid = 0.5 * (lo + hi)
        if gap(mid) > 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def periodic_value(params: ProblemParams, engine: ScaleEngine) -> tuple[float, ValueFunction]:
    """Pure-periodic barrier and value function (continuous barrier disabled)."""
    _check_engine(params, engine)
    q, r = params.q, params.r
    dp = engine.model.psi_prime_at_zero()
    phi_qr = engine.phi_qr
    a_p = periodic_barrier(params, engine)

    if a_p == 0.0:
        seg = (ExpSum.affine(-r * dp / (r + q) ** 2, r / (r + q))
               + ExpSum([r * dp / (r + q) ** 2], [-phi_qr], [0]))
        return 0.0, ValueFunction(Regime.PURE_PERIODIC, 0.0, math.inf, [], [seg])

    base_s = -(engine.fam_q.Zbar.scaled(r / (r + q))
               + ExpSum.constant(r * dp / ((r + q) * q))
               + engine.fam_q.Z.scaled(r / ((r + q) * phi_qr))
               + engine.fam_q.z_theta(phi_qr).scaled(q / ((r + q) * phi_qr)))
    seg_low = base_s.compose_affine(a_p, -1.0)
    # x > a_p: Zbar(s) = s, Z(s) = 1, Z(s, phi) = exp(phi*s) with s = a_p - x
    seg_hi = (ExpSum.affine(-(r / (r + q)) * (a_p + dp / q) - r / ((r + q) * phi_qr),
                            r / (r + q))
              + ExpSum([-q / ((r + q) * phi_qr) * math.exp(phi_qr * a_p)], [-phi_qr], [0]))
    return a_p, ValueFunction(Regime.PURE_PERIODIC, a_p, math.inf, [a_p], [seg_low, seg_hi])


def v_periodic(params: ProblemParams, engine: ScaleEngine, x: float) -> tuple[float, float]:
    a_p, vf = periodic_value(params, engine)
    return a_p, vf(x)


def continuous_barrier(params: ProblemParams, engine: ScaleEngine) -> float:
    """b*_c, the inverse of Zbar^{(q)} at -psi'(0+)/q (monotone bisection)."""
    _check_engine(params, engine)
    target = -engine.model.psi_prime_at_zero() / params.q
    hi = 1.0
    while engine.fam_q.Zbar_at(hi) < target:
        hi *= 2.0
    lo = 0.0
    while hi - lo > 1e-10:
        mid = 0.5 * (lo + hi)
        if engine.fam_q.Zbar_at(mid) < target:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def continuous_value(params: ProblemParams, engine: ScaleEngine) -> tuple[float, ValueFunction]:
    """Pure-continuous barrier and value function (periodic strategy disabled)."""
    _check_engine(params, engine)
    beta = params.beta
    dp = engine.model.psi_prime_at_zero()
    b_c = continuous_barrier(params, engine)
    seg_low = (engine.fam_q.Zbar.compose_affine(b_c, -1.0)
               .scaled(-beta) + ExpSum.constant(-beta * dp / params.q))
    seg_hi = ExpSum.affine(-beta * b_c - beta * dp / params.q, beta)
    return b_c, ValueFunction(Regime.PURE_CONTINUOUS, b_c, b_c, [b_c], [seg_low, seg_hi])


def v_continuous(params: ProblemParams, engine: ScaleEngine, x: float) -> tuple[float, float]:
    b_c, vf = continuous_value(params, engine)
    return b_c, vf(x)


# ---------------------------------------------------------------------------
# verification helpers

def m_fn(params: ProblemParams, engine: ScaleEngine, a_star: float, b_star: float,
         x: float) -> float:
    """Closed form of max_{0<=l<=x} {l + v(x-l) - v(x)} at a solved hybrid pair."""
    _check_engine(params, engine)
    if x <= a_star:
        return 0.0
    q, r, beta = params.q, params.r, params.beta
    return (q / (q + r) * (x - a_star)
            - (beta - r / (q + r))
            * (engine.fam_qr.Zbar_at(b_star - a_star) - engine.fam_qr.Zbar_at(b_star - x)))


def generator_closed_form(params: ProblemParams, engine: ScaleEngine, a_star: float,
                          b_star: float, x: float) -> float:
    """(L - q) v_{a*,b*} piecewise: 0 below a*, then the two displayed branches."""
    _check_engine(params, engine)
    if x <= 0.0:
        raise ValueError("x must be > 0")
    q, r, beta = params.q, params.r, params.beta
    wgt = beta - r / (q + r)
    if x <= a_star:
        return 0.0
    if x < b_star:
        return r * (q / (q + r) * (a_star - x)
                    - wgt * (engine.fam_qr.Zbar_at(b_star - x)
                             - engine.fam_qr.Zbar_at(b_star - a_star)))
    return (q * r / (q + r) * (a_star - x)
            - wgt * (q * (x - b_star) - r * engine.fam_qr.Zbar_at(b_star - a_star)))
