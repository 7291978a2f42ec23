"""Monte Carlo simulator of the controlled surplus and raw-exit oracles.

Paths are event-driven: Poisson jump and decision times are drawn exactly and
the Brownian-with-drift segments between them run on a fixed sub-grid dt with
classical reflection at b, Parisian push-downs to a at decision times, and a
Brownian-bridge ruin correction between grid points.

Inner loops are numba kernels over a self-contained xorshift128+ stream with a
ziggurat normal sampler; every path owns a sub-stream keyed by (seed, global
path index), so results are bit-reproducible and independent of chunking.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .levy import LevyModel
from .valuation import ProblemParams

# --------------------------------------------------------------------------
# xorshift128+ / splitmix64 / ziggurat (Doornik's ZIGNOR layout, 128 layers)

_ZIG_C = 128
_ZIG_R = 3.442619855899
_ZIG_V = 9.91256303526217e-3


def _build_ziggurat():
    x = np.zeros(_ZIG_C + 1)
    f = math.exp(-0.5 * _ZIG_R * _ZIG_R)
    x[0] = _ZIG_V / f
    x[1] = _ZIG_R
    for k in range(2, _ZIG_C):
        x[k] = math.sqrt(-2.0 * math.log(_ZIG_V / x[k - 1]
                                         + math.exp(-0.5 * x[k - 1] * x[k - 1])))
    ratio = np.array([x[k + 1] / x[k] for k in range(_ZIG_C)])
    return x, ratio


_ZIG_X, _ZIG_RATIO = _build_ziggurat()

_U64_1 = np.uint64(1)
_INV_2_53 = 1.0 / 9007199254740992.0


@njit(cache=True, inline="always")
def _sm64(z):
    z = (z + np.uint64(0x9E3779B97F4A7C15)) & np.uint64(0xFFFFFFFFFFFFFFFF)
    z = ((z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)) & np.uint64(0xFFFFFFFFFFFFFFFF)
    z = ((z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)) & np.uint64(0xFFFFFFFFFFFFFFFF)
    return z ^ (z >> np.uint64(31))


@njit(cache=True, inline="always")
def _stream_init(seed, idx):
    h = _sm64(np.uint64(seed) ^ _sm64(np.uint64(idx) + np.uint64(0x5851F42D4C957F2D)))
    s0 = _sm64(h)
    s1 = _sm64(s0 ^ np.uint64(0xDE769B97F4A7C15E))
    if s0 == np.uint64(0) and s1 == np.uint64(0):
        s0 = _U64_1
    return s0, s1


@njit(cache=True, inline="always")
def _next_u64(s0, s1):
    x = s0
    y = s1
    s0 = y
    x ^= (x << np.uint64(23)) & np.uint64(0xFFFFFFFFFFFFFFFF)
    s1 = x ^ y ^ (x >> np.uint64(18)) ^ (y >> np.uint64(5))
    return (s1 + y) & np.uint64(0xFFFFFFFFFFFFFFFF), s0, s1


@njit(cache=True, inline="always")
def _runif(s0, s1):
    r, s0, s1 = _next_u64(s0, s1)
    return float(r >> np.uint64(11)) * _INV_2_53, s0, s1


@njit(cache=True, inline="always")
def _runif_pos(s0, s1):
    r, s0, s1 = _next_u64(s0, s1)
    return float((r >> np.uint64(11)) + _U64_1) * _INV_2_53, s0, s1


@njit(cache=True, inline="always")
def _rexp(s0, s1, scale):
    u, s0, s1 = _runif_pos(s0, s1)
    return -math.log(u) * scale, s0, s1


@njit(cache=True, inline="always")
def _rnorm(s0, s1, zx, zr):
    while True:
        r, s0, s1 = _next_u64(s0, s1)
        u = 2.0 * (float(r >> np.uint64(11)) * _INV_2_53) - 1.0
        i = int(r & np.uint64(0x7F))
        if abs(u) < zr[i]:
            return u * zx[i], s0, s1
        if i == 0:
            while True:
                ua, s0, s1 = _runif_pos(s0, s1)
                ub, s0, s1 = _runif_pos(s0, s1)
                x = -math.log(ua) / _ZIG_R
                y = -math.log(ub)
                if y + y >= x * x:
                    v = _ZIG_R + x
                    return (v if u > 0.0 else -v), s0, s1
        x = u * zx[i]
        f0 = math.exp(-0.5 * (zx[i] * zx[i] - x * x))
        f1 = math.exp(-0.5 * (zx[i + 1] * zx[i + 1] - x * x))
        w, s0, s1 = _runif(s0, s1)
        if f1 + w * (f0 - f1) < 1.0:
            return x, s0, s1


@njit(cache=True, inline="always")
def _sample_pt(s0, s1, alpha_cum, rates, trans_cum):
    u, s0, s1 = _runif(s0, s1)
    s = 0
    while u > alpha_cum[s]:
        s += 1
    t = 0.0
    m = alpha_cum.shape[0]
    while True:
        e, s0, s1 = _rexp(s0, s1, 1.0 / rates[s])
        t += e
        u, s0, s1 = _runif(s0, s1)
        j = 0
        while j < m and u > trans_cum[s, j]:
            j += 1
        if j >= m:
            return t, s0, s1
        s = j


# --------------------------------------------------------------------------
# configuration / estimates

_CHUNK = 100_000


@dataclass
class SimConfig:
    """Path count, sub-grid resolution, discount truncation, and start point."""

    paths: int
    dt: float = 1e-3
    horizon_eps: float = 1e-8
    seed: int = 12345
    x0: float = 1.0

    def __post_init__(self):
        if self.paths < 1:
            raise ValueError("paths must be >= 1")
        if self.dt <= 0.0:
            raise ValueError("dt must be > 0")
        if not 0.0 < self.horizon_eps < 1.0:
            raise ValueError("horizon_eps must be in (0, 1)")
        if self.x0 < 0.0:
            raise ValueError("x0 must be >= 0")

    def t_max(self, q: float) -> float:
        return -math.log(self.horizon_eps) / q


@dataclass
class SimEstimate:
    mean: float
    ci_half_width_99: float
    n_paths: int
    dt: float
    truncation_bound: float

    @classmethod
    def from_samples(cls, samples: np.ndarray, dt: float, bound: float) -> "SimEstimate":
        n = samples.size
        std = float(samples.std(ddof=1)) if n > 1 else 0.0
        return cls(float(samples.mean()), 2.576 * std / math.sqrt(n), n, dt, bound)


def _pt_tables(model: LevyModel):
    """Cumulative start/transition tables for the absorbing-chain sampler."""
    if model.jump is None:
        one = np.ones(1)
        return one, one, np.ones((1, 1))
    jump = model.jump
    m = jump.m
    alpha_cum = np.cumsum(jump.alpha)
    alpha_cum[-1] = 1.0
    rates = -np.diag(jump.T).copy()
    trans_cum = np.zeros((m, m))
    for i in range(m):
        probs = jump.T[i] / rates[i]
        probs[i] = 0.0
        trans_cum[i] = np.cumsum(probs)
    return alpha_cum, rates, trans_cum


# --------------------------------------------------------------------------
# kernels

@njit(cache=True)
def _controlled_kernel(n, idx0, seed, x0, a, b, b_fin, c, sigma, kappa, q, r_rate,
                       dt, t_max, alpha_cum, rates, trans_cum, zx, zr,
                       lp_out, lc_out, ruin_out):
    sigma2 = sigma * sigma
    sdt = sigma * math.sqrt(dt)
    decay = math.exp(-q * dt)
    jump_scale = 1.0 / kappa if kappa > 0.0 else 0.0
    for i in range(n):
        s0, s1 = _stream_init(seed, idx0 + i)
        u = x0
        t = 0.0
        disc = 1.0
        lp = 0.0
        lc = 0.0
        ruin_t = np.inf
        ruined = False
        if u <= 0.0:
            # touching zero means immediate ruin (downward creeping)
            lp_out[i] = 0.0
            lc_out[i] = 0.0
            ruin_out[i] = 0.0
            continue
        if b_fin and u > b:
            lc += u - b
            u = b
        if kappa > 0.0:
            tj, s0, s1 = _rexp(s0, s1, jump_scale)
        else:
            tj = np.inf
        td, s0, s1 = _rexp(s0, s1, 1.0 / r_rate)
        while t < t_max and not ruined:
            te = tj if tj < td else td
            if te > t_max:
                te = t_max
            if sigma == 0.0:
                # pure downward drift between events: exact, no sub-grid needed
                if u - c * (te - t) <= 0.0:
                    ruin_t = t + u / c
                    ruined = True
                    break
                u -= c * (te - t)
                disc *= math.exp(-q * (te - t))
                t = te
            else:
                while t < te - 1e-12:
                    if t + dt <= te:
                        h = dt
                        d = decay
                        s_h = sdt
                    else:
                        h = te - t
                        d = math.exp(-q * h)
                        s_h = sigma * math.sqrt(h)
                    g, s0, s1 = _rnorm(s0, s1, zx, zr)
                    un = u - c * h + s_h * g
                    t += h
                    disc *= d
                    if un <= 0.0:
                        ruined = True
                        ruin_t = t
                        break
                    prod = 2.0 * u * un
                    den = sigma2 * h
                    if prod < 40.0 * den:
                        w, s0, s1 = _runif(s0, s1)
                        if w < math.exp(-prod / den):
                            ruined = True
                            ruin_t = t
                            break
                    if b_fin and un > b:
                        lc += disc * (un - b)
                        un = b
                    u = un
                if ruined:
                    break
                t = te
            if te >= t_max:
                break
            if tj < td:
                z, s0, s1 = _sample_pt(s0, s1, alpha_cum, rates, trans_cum)
                u += z
                if b_fin and u > b:
                    lc += disc * (u - b)
                    u = b
                e, s0, s1 = _rexp(s0, s1, jump_scale)
                tj = te + e
            else:
                if u > a:
                    lp += disc * (u - a)
                    u = a
                    if a <= 0.0:
                        ruined = True
                        ruin_t = te
                e, s0, s1 = _rexp(s0, s1, 1.0 / r_rate)
                td = te + e
        lp_out[i] = lp
        lc_out[i] = lc
        ruin_out[i] = ruin_t


@njit(cache=True)
def _raw_exit_kernel(n, idx0, seed, x0, a, b, c, sigma, kappa, q, theta, dt, t_max,
                     alpha_cum, rates, trans_cum, zx, zr,
                     down_out, up_out, censored_out):
    sigma2 = sigma * sigma
    sdt = sigma * math.sqrt(dt)
    decay = math.exp(-q * dt)
    jump_scale = 1.0 / kappa if kappa > 0.0 else 0.0
    for i in range(n):
        s0, s1 = _stream_init(seed, idx0 + i)
        x = x0
        t = 0.0
        disc = 1.0
        down = 0.0
        up = 0.0
        done = False
        censored = False
        if x <= a:
            down_out[i] = 1.0
            up_out[i] = 0.0
            censored_out[i] = False
            continue
        if x >= b:
            down_out[i] = 0.0
            up_out[i] = math.exp(theta * (b - x))
            censored_out[i] = False
            continue
        if kappa > 0.0:
            tj, s0, s1 = _rexp(s0, s1, jump_scale)
        else:
            tj = np.inf
        while not done:
            te = tj
            if te > t_max:
                te = t_max
            if sigma == 0.0:
                if x - c * (te - t) <= a:
                    hit = (x - a) / c
                    down = disc * math.exp(-q * hit)
                    done = True
                    break
                x -= c * (te - t)
                disc *= math.exp(-q * (te - t))
                t = te
            else:
                while t < te - 1e-12 and not done:
                    if t + dt <= te:
                        h = dt
                        d = decay
                        s_h = sdt
                    else:
                        h = te - t
                        d = math.exp(-q * h)
                        s_h = sigma * math.sqrt(h)
                    g, s0, s1 = _rnorm(s0, s1, zx, zr)
                    xn = x - c * h + s_h * g
                    t += h
                    disc *= d
                    if xn <= a:
                        down = disc
                        done = True
                        break
                    if xn >= b:
                        up = disc  # continuous up-crossing: X(tau) = b
                        done = True
                        break
                    den = sigma2 * h
                    pd = 2.0 * (x - a) * (xn - a)
                    if pd < 40.0 * den:
                        w, s0, s1 = _runif(s0, s1)
                        if w < math.exp(-pd / den):
                            down = disc
                            done = True
                            break
                    pu = 2.0 * (b - x) * (b - xn)
                    if pu < 40.0 * den:
                        w, s0, s1 = _runif(s0, s1)
                        if w < math.exp(-pu / den):
                            up = disc
                            done = True
                            break
                    x = xn
                if done:
                    break
                t = te
            if te >= t_max:
                censored = True
                break
            z, s0, s1 = _sample_pt(s0, s1, alpha_cum, rates, trans_cum)
            x += z
            if x > b:
                up = disc * math.exp(theta * (b - x))
                done = True
                break
            e, s0, s1 = _rexp(s0, s1, jump_scale)
            tj = te + e
        down_out[i] = down
        up_out[i] = up
        censored_out[i] = censored


@njit(cache=True)
def _reflected_clock_kernel(n, idx0, seed, a, b, c, sigma, kappa, q, r_rate, dt,
                            t_max, alpha_cum, rates, trans_cum, zx, zr,
                            out, censored_out):
    # classically reflected at b, started at b; payoff e^{-q min(eta_a^-, e_r)}
    sigma2 = sigma * sigma
    sdt = sigma * math.sqrt(dt)
    decay = math.exp(-q * dt)
    jump_scale = 1.0 / kappa if kappa > 0.0 else 0.0
    for i in range(n):
        s0, s1 = _stream_init(seed, idx0 + i)
        u = b
        t = 0.0
        disc = 1.0
        val = 0.0
        done = False
        censored = False
        er, s0, s1 = _rexp(s0, s1, 1.0 / r_rate)
        if kappa > 0.0:
            tj, s0, s1 = _rexp(s0, s1, jump_scale)
        else:
            tj = np.inf
        while not done:
            te = tj if tj < er else er
            if te > t_max:
                te = t_max
            if sigma == 0.0:
                if u - c * (te - t) <= a:
                    hit = (u - a) / c
                    val = disc * math.exp(-q * hit)
                    done = True
                    break
                u -= c * (te - t)
                disc *= math.exp(-q * (te - t))
                t = te
            else:
                while t < te - 1e-12 and not done:
                    if t + dt <= te:
                        h = dt
                        d = decay
                        s_h = sdt
                    else:
                        h = te - t
                        d = math.exp(-q * h)
                        s_h = sigma * math.sqrt(h)
                    g, s0, s1 = _rnorm(s0, s1, zx, zr)
                    un = u - c * h + s_h * g
                    t += h
                    disc *= d
                    if un <= a:
                        val = disc
                        done = True
                        break
                    den = sigma2 * h
                    pd = 2.0 * (u - a) * (un - a)
                    if pd < 40.0 * den:
                        w, s0, s1 = _runif(s0, s1)
                        if w < math.exp(-pd / den):
                            val = disc
                            done = True
                            break
                    if un > b:
                        un = b
                    u = un
                if done:
                    break
                t = te
            if te >= t_max:
                censored = True
                break
            if tj < er:
                z, s0, s1 = _sample_pt(s0, s1, alpha_cum, rates, trans_cum)
                u += z
                if u > b:
                    u = b
                e, s0, s1 = _rexp(s0, s1, jump_scale)
                tj = te + e
            else:
                val = disc  # the clock rang first: payoff e^{-q e_r}
                done = True
        out[i] = val
        censored_out[i] = censored


@njit(cache=True)
def _decomposition_kernel(n, idx0, seed, x0, a, b, b_fin, c, sigma, kappa, r_rate,
                          dt, t_max, alpha_cum, rates, trans_cum, zx, zr):
    """Max |U + Lp + Lc - X| over all sample times (undiscounted bookkeeping)."""
    worst = 0.0
    for i in range(n):
        s0, s1 = _stream_init(seed, idx0 + i)
        u = x0
        x = x0
        lp = 0.0
        lc = 0.0
        t = 0.0
        if b_fin and u > b:
            lc += u - b
            u = b
        if kappa > 0.0:
            tj, s0, s1 = _rexp(s0, s1, 1.0 / kappa)
        else:
            tj = np.inf
        td, s0, s1 = _rexp(s0, s1, 1.0 / r_rate)
        alive = True
        while t < t_max and alive:
            te = tj if tj < td else td
            if te > t_max:
                te = t_max
            while t < te - 1e-12:
                h = dt if t + dt <= te else te - t
                g, s0, s1 = _rnorm(s0, s1, zx, zr)
                dx = -c * h + sigma * math.sqrt(h) * g
                x += dx
                un = u + dx
                t += h
                if un <= 0.0:
                    u = un
                    alive = False
                else:
                    if b_fin and un > b:
                        lc += un - b
                        un = b
                    u = un
                err = abs(u + lp + lc - x)
                if err > worst:
                    worst = err
                if not alive:
                    break
            if not alive or te >= t_max:
                break
            t = te
            if tj < td:
                z, s0, s1 = _sample_pt(s0, s1, alpha_cum, rates, trans_cum)
                x += z
                u += z
                if b_fin and u > b:
                    lc += u - b
                    u = b
                e, s0, s1 = _rexp(s0, s1, 1.0 / kappa)
                tj = te + e
            else:
                if u > a:
                    lp += u - a
                    u = a
                e, s0, s1 = _rexp(s0, s1, 1.0 / r_rate)
                td = te + e
            err = abs(u + lp + lc - x)
            if err > worst:
                worst = err
    return worst


# --------------------------------------------------------------------------
# user-facing wrappers

def truncation_bound(model: LevyModel, params: ProblemParams, config: SimConfig,
                     a: float, b: float) -> float:
    """Analytic bound on the discounted dividend mass beyond the horizon.

    Dividends after T are worth at most max(1, beta) * (U(T) + discounted
    future upward input); the input rate is kappa*E[Z] + max(-c, 0) plus the
    Brownian running-max growth.  For b = inf the surplus at T is bounded by
    the last push-down level plus one mean renewal gap of input.
    """
    q = params.q
    up_rate = model.kappa * model.jump_mean + max(-model.c, 0.0)
    if math.isfinite(b):
        u_cap = b
    else:
        u_cap = max(config.x0, a) + up_rate / params.r + model.sigma * math.sqrt(
            2.0 / (math.pi * params.r))
    scale = max(1.0, params.beta) * (u_cap + up_rate / q
                                     + model.sigma / math.sqrt(2.0 * q))
    return config.horizon_eps * scale


def _run_chunks(total: int, seed: int, runner):
    outs = []
    start = 0
    while start < total:
        n = min(_CHUNK, total - start)
        outs.append(runner(n, start, seed))
        start += n
    return [np.concatenate(parts) for parts in zip(*outs)]


def simulate_paths(model: LevyModel, params: ProblemParams, config: SimConfig,
                   a: float, b: float):
    """Per-path (discounted L_p, discounted L_c, ruin time; inf = censored)."""
    alpha_cum, rates, trans_cum = _pt_tables(model)
    t_max = config.t_max(params.q)
    b_fin = math.isfinite(b)

    def runner(n, idx0, seed):
        lp = np.empty(n)
        lc = np.empty(n)
        ruin = np.empty(n)
        _controlled_kernel(n, idx0, seed, config.x0, a, b if b_fin else np.inf,
                           b_fin, model.c, model.sigma, model.kappa, params.q,
                           params.r, config.dt, t_max, alpha_cum, rates, trans_cum,
                           _ZIG_X, _ZIG_RATIO, lp, lc, ruin)
        return lp, lc, ruin

    return _run_chunks(config.paths, config.seed, runner)


def estimate_value(model: LevyModel, params: ProblemParams, config: SimConfig,
                   a: float, b: float) -> tuple[SimEstimate, SimEstimate, SimEstimate]:
    """(vp, vc, v) estimates under the (a, b) strategy; v combines per path."""
    lp, lc, _ruin = simulate_paths(model, params, config, a, b)
    bound = truncation_bound(model, params, config, a, b)
    vp = SimEstimate.from_samples(lp, config.dt, bound)
    vc = SimEstimate.from_samples(lc, config.dt, bound)
    v = SimEstimate.from_samples(lp + params.beta * lc, config.dt, bound)
    return vp, vc, v


@dataclass
class ExitOracle:
    """Raw-path estimates of the two-sided exit identities.

    The crossing convention is `touch counts as crossing`: downward passages
    creep for spectrally positive paths, so the open/closed distinction only
    matters at the start point, where tau = 0 either way.
    """

    down: SimEstimate                  # E_x[e^{-q tau_a^-}; tau_b^+ > tau_a^-]
    up: SimEstimate                    # E_x[e^{-q tau_b^+ + theta(b - X)}; tau_b^+ < tau_a^-]
    reflected_clock: SimEstimate | None
    convention: str = "touch-as-crossing"


def exit_oracle(model: LevyModel, q: float, a: float, b: float, x: float,
                theta: float, paths: int, *, dt: float = 1e-3, seed: int = 2468,
                r: float | None = None, horizon_eps: float = 1e-9) -> ExitOracle:
    if not a <= x <= b:
        raise ValueError("need a <= x <= b")
    alpha_cum, rates, trans_cum = _pt_tables(model)
    t_max = -math.log(horizon_eps) / q

    def run_exit(n, idx0, seed_k):
        down = np.empty(n)
        up = np.empty(n)
        cens = np.empty(n, dtype=np.bool_)
        _raw_exit_kernel(n, idx0, seed_k, x, a, b, model.c, model.sigma,
                         model.kappa, q, theta, dt, t_max, alpha_cum, rates,
                         trans_cum, _ZIG_X, _ZIG_RATIO, down, up, cens)
        return down, up, cens

    down, up, cens = _run_chunks(paths, seed, run_exit)
    # censored paths contribute 0 but are worth at most e^{-q t_max} each
    bound = horizon_eps * float(np.mean(cens))
    est_down = SimEstimate.from_samples(down, dt, bound)
    est_up = SimEstimate.from_samples(up, dt, bound)

    est_clock = None
    if r is not None:
        def run_clock(n, idx0, seed_k):
            out = np.empty(n)
            cens_k = np.empty(n, dtype=np.bool_)
            _reflected_clock_kernel(n, idx0, seed_k, a, b, model.c, model.sigma,
                                    model.kappa, q, r, dt, t_max, alpha_cum,
                                    rates, trans_cum, _ZIG_X, _ZIG_RATIO,
                                    out, cens_k)
            return out, cens_k

        out, cens2 = _run_chunks(paths, seed + 1, run_clock)
        est_clock = SimEstimate.from_samples(out, dt, horizon_eps * float(np.mean(cens2)))

    return ExitOracle(est_down, est_up, est_clock)


def decomposition_error(model: LevyModel, params: ProblemParams, config: SimConfig,
                        a: float, b: float) -> float:
    """Max |U + L_p + L_c - X| over sample times (bookkeeping invariant)."""
    alpha_cum, rates, trans_cum = _pt_tables(model)
    b_fin = math.isfinite(b)
    return _decomposition_kernel(config.paths, 0, config.seed, config.x0, a,
                                 b if b_fin else np.inf, b_fin, model.c,
                                 model.sigma, model.kappa, params.r, config.dt,
                                 config.t_max(params.q), alpha_cum, rates,
                                 trans_cum, _ZIG_X, _ZIG_RATIO)
