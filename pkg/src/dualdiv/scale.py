"""Scale-function engine: closed exponential-sum forms for one (q, r) pair.

For rational Laplace exponents (Brownian part + phase-type jumps) the scale
function is a linear combination of complex exponentials whose rates are the
roots of psi(zeta) = q.  Roots come from the companion matrix of the
cleared-denominator polynomial and are polished by Newton on psi itself; the
partial-fraction weight of root zeta is 1/psi'(zeta).
"""

from __future__ import annotations

import numpy as np

from .errors import NumericError
from .expsum import ExpSum
from .levy import LevyModel

ROOT_RESIDUAL_TOL = 1e-10
ROOT_SEPARATION_TOL = 1e-8

_ENGINE_CACHE: dict = {}


def _cleared_polynomial(model: LevyModel, q: float) -> np.ndarray:
    """Coefficients (highest first) of the polynomial with the roots of psi = q."""
    if model.sigma > 0.0:
        quad = np.array([0.5 * model.sigma**2, model.c, -q])
    else:
        quad = np.array([model.c, -q])
    if model.kappa == 0.0:
        return quad
    jump = model.jump
    m = jump.m
    denom = np.real(np.poly(np.linalg.eigvals(jump.T)))
    # numerator of zhat*denom by least-squares interpolation at positive points
    pts = np.linspace(0.5, 0.5 + m, 2 * m)
    vals = [complex(jump.laplace(p)).real * np.polyval(denom, p) for p in pts]
    numer = np.polyfit(pts, vals, m - 1)
    quad = quad.copy()
    quad[-1] -= model.kappa  # drift/diffusion part minus (q + kappa)
    return np.polyadd(np.polymul(quad, denom), model.kappa * numer)


def _polish_root(model: LevyModel, q: float, zeta: complex) -> complex:
    for _ in range(24):
        f = model.psi_complex(zeta) - q
        if abs(f) < 1e-14 * max(1.0, q):
            break
        fp = model.psi_prime_complex(zeta)
        if fp == 0:
            break
        step = f / fp
        zeta = zeta - step
        if abs(step) < 1e-16 * max(1.0, abs(zeta)):
            break
    return zeta


def _pair_conjugates(roots: np.ndarray, scale: float) -> np.ndarray:
    """Snap near-real roots to the real axis and enforce exact conjugate pairs."""
    real_tol = 1e-9 * scale
    out = []
    pos = [z for z in roots if z.imag > real_tol]
    neg = [z for z in roots if z.imag < -real_tol]
    out.extend(complex(z.real, 0.0) for z in roots if abs(z.imag) <= real_tol)
    if len(pos) != len(neg):
        raise NumericError("scale-function roots are not closed under conjugation")
    for z in pos:
        j = int(np.argmin([abs(z - np.conj(w)) for w in neg]))
        w = neg.pop(j)
        avg = 0.5 * (z + np.conj(w))
        out.append(avg)
        out.append(np.conj(avg))
    return np.array(sorted(out, key=lambda z: (z.real, z.imag)), dtype=complex)


def _scale_roots_weights(model: LevyModel, q: float):
    poly = _cleared_polynomial(model, q)
    raw = np.roots(poly)
    polished = np.array([_polish_root(model, q, z) for z in raw], dtype=complex)
    scale = max(1.0, float(np.max(np.abs(polished))))
    roots = _pair_conjugates(polished, scale)

    resid = np.array([abs(model.psi_complex(z) - q) for z in roots])
    if np.any(resid > ROOT_RESIDUAL_TOL * max(1.0, q)):
        raise NumericError(
            f"root residual {resid.max():g} exceeds tolerance for psi = {q}")
    n = roots.size
    for i in range(n):
        for j in range(i + 1, n):
            if abs(roots[i] - roots[j]) < ROOT_SEPARATION_TOL * scale:
                raise NumericError(
                    "near-repeated scale-function roots; perturb the model parameters")
    n_pos = int(np.sum(roots.real > 0.0))
    if n_pos != 1:
        raise NumericError(f"expected exactly one root in the right half-plane, got {n_pos}")

    weights = np.array([1.0 / model.psi_prime_complex(z) for z in roots], dtype=complex)
    return roots, weights


class ScaleFamily:
    """W, Wbar, Z, Zbar and Z(., theta) for a single killing rate q.

    The ExpSum members are the x >= 0 branches; the *_at accessors apply the
    canonical extension to x < 0 (W = 0, Wbar = 0, Z = 1, Zbar = x,
    Z(x, theta) = exp(theta*x)).
    """

    def __init__(self, model: LevyModel, q: float):
        self.model = model
        self.q = q
        self.roots, self.weights = _scale_roots_weights(model, q)
        self.W = ExpSum(self.weights, self.roots, np.zeros(self.roots.size, dtype=int))
        self.Wbar = self.W.antideriv()
        self.Z = self.Wbar.scaled(q).plus_const(1.0)
        self.Zbar = self.Z.antideriv()
        self._ztheta: dict[float, ExpSum] = {}

    def z_theta(self, theta: float) -> ExpSum:
        """ExpSum of Z(x, theta) on x >= 0."""
        theta = float(theta)
        if theta < 0.0:
            raise ValueError("theta must be >= 0")
        got = self._ztheta.get(theta)
        if got is not None:
            return got
        pref = self.q - self.model.psi(theta)
        coeffs, rates, powers = [], [], []
        theta_coeff = 1.0 + 0.0j
        for c, rho in zip(self.weights, self.roots):
            d = rho - theta
            if abs(d) < 1e-9 * max(1.0, abs(rho), theta):
                coeffs.append(pref * c)
                rates.append(theta)
                powers.append(1)
            else:
                coeffs.append(pref * c / d)
                rates.append(rho)
                powers.append(0)
                theta_coeff -= pref * c / d
        coeffs.append(theta_coeff)
        rates.append(theta)
        powers.append(0)
        out = ExpSum(coeffs, rates, powers)
        self._ztheta[theta] = out
        return out

    # piecewise accessors -----------------------------------------------

    def W_at(self, x: float, order: int = 0) -> float:
        if x < 0.0:
            return 0.0
        return self.W(x, order)

    def Wbar_at(self, x: float) -> float:
        return self.Wbar(x) if x > 0.0 else 0.0

    def Z_at(self, x: float) -> float:
        return self.Z(x) if x > 0.0 else 1.0

    def Zbar_at(self, x: float) -> float:
        return self.Zbar(x) if x > 0.0 else float(x)

    def Z_theta_at(self, x: float, theta: float) -> float:
        if x > 0.0:
            return self.z_theta(theta)(x)
        return float(np.exp(theta * x))


class CompositeSet:
    """(q, r)-composites for one barrier pair a < b, on the s = a - x >= 0 side.

    Defining form: F_comp(s) = F^{(q+r)}(s + b - a) - r * (W^{(q)} conv F^{(q+r)}(. + b - a))(s),
    evaluated by exact ExpSum convolution.
    """

    def __init__(self, engine: "ScaleEngine", a: float, b: float):
        if not a < b:
            raise ValueError("composites need a < b")
        self.engine = engine
        self.a = float(a)
        self.b = float(b)
        self.delta = float(b - a)
        self._ztheta: dict[float, ExpSum] = {}
        fq = engine.fam_q
        self.W_s = self._build(engine.fam_qr.W, fq)
        self.Wbar_s = self._build(engine.fam_qr.Wbar, fq)
        self.Zbar_s = self._build(engine.fam_qr.Zbar, fq)

    def _build(self, base: ExpSum, fq: ScaleFamily) -> ExpSum:
        shifted = base.shift(self.delta)
        return shifted - fq.W.convolve(shifted).scaled(self.engine.r)

    def z_theta_s(self, theta: float) -> ExpSum:
        theta = float(theta)
        got = self._ztheta.get(theta)
        if got is None:
            got = self._build(self.engine.fam_qr.z_theta(theta), self.engine.fam_q)
            self._ztheta[theta] = got
        return got


COMPOSITE_KINDS = ("W", "Wbar", "Z_theta", "Zbar")


class ScaleEngine:
    """All scale objects for one (model, q, r); immutable after construction."""

    def __init__(self, model: LevyModel, q: float, r: float):
        if q <= 0.0 or r <= 0.0:
            raise ValueError("q and r must be > 0")
        self.model = model
        self.q = float(q)
        self.r = float(r)
        self.fam_q = ScaleFamily(model, self.q)
        self.fam_qr = ScaleFamily(model, self.q + self.r)
        self.phi_q = model.phi(self.q)
        self.phi_qr = model.phi(self.q + self.r)
        pos_root = self.fam_q.roots[self.fam_q.roots.real > 0.0][0]
        if abs(pos_root - self.phi_q) > 1e-9 * max(1.0, self.phi_q):
            raise NumericError("positive scale root disagrees with phi(q)")
        self._composites: dict[tuple[float, float], CompositeSet] = {}

    # single-parameter family surface (the q-family) ----------------------

    def W(self, x: float, order: int = 0) -> float:
        if order not in (0, 1, 2):
            raise ValueError("derivative order must be 0, 1, or 2")
        return self.fam_q.W_at(x, order)

    def Z(self, x: float) -> float:
        return self.fam_q.Z_at(x)

    def Wbar(self, x: float) -> float:
        return self.fam_q.Wbar_at(x)

    def Zbar(self, x: float) -> float:
        return self.fam_q.Zbar_at(x)

    def Z_theta(self, x: float, theta: float) -> float:
        return self.fam_q.Z_theta_at(x, theta)

    # two-parameter composites --------------------------------------------

    def composites(self, a: float, b: float) -> CompositeSet:
        key = (float(a), float(b))
        got = self._composites.get(key)
        if got is None:
            got = CompositeSet(self, a, b)
            self._composites[key] = got
        return got

    def composite(self, kind: str, a: float, b: float, x: float,
                  theta: float = 0.0) -> float:
        """Evaluate W/Wbar/Z_theta/Zbar composite at argument a - x (any real x)."""
        if kind not in COMPOSITE_KINDS:
            raise ValueError(f"kind must be one of {COMPOSITE_KINDS}")
        if not a < b:
            raise ValueError("composite evaluation needs a < b")
        s = a - x
        if s >= 0.0:
            pack = self.composites(a, b)
            if kind == "W":
                return pack.W_s(s)
            if kind == "Wbar":
                return pack.Wbar_s(s)
            if kind == "Zbar":
                return pack.Zbar_s(s)
            return pack.z_theta_s(theta)(s)
        t = b - x
        fam = self.fam_qr
        if kind == "W":
            return fam.W_at(t)
        if kind == "Wbar":
            return fam.Wbar_at(t)
        if kind == "Zbar":
            return fam.Zbar_at(t)
        return fam.Z_theta_at(t, theta)

    # kernels ---------------------------------------------------------------

    def kernel_K(self, a: float, b: float, x: float) -> float:
        q, r = self.q, self.r
        z_comp = self.composite("Z_theta", a, b, x, 0.0)
        return (q * z_comp / self.fam_qr.Z_at(b - a) + r * self.fam_q.Z_at(a - x)) / (q + r)

    def kernel_H(self, a: float, b: float, x: float) -> float:
        q, r = self.q, self.r
        delta = b - a
        w_comp = self.composite("W", a, b, x)
        z_comp = self.composite("Z_theta", a, b, x, 0.0)
        return ((w_comp / self.fam_qr.W_at(delta)) * (r * self.fam_qr.Z_at(delta) + q)
                + r * (self.fam_q.Z_at(a - x) - z_comp)) / (q + r)

    def kernel_I(self, a: float, b: float, x: float, theta: float = 0.0) -> float:
        delta = b - a
        return (self.composite("Z_theta", a, b, x, theta)
                - self.composite("W", a, b, x)
                * self.fam_qr.Z_theta_at(delta, theta) / self.fam_qr.W_at(delta))

    def kernel_J(self, a: float, b: float, x: float) -> float:
        delta = b - a
        dp = self.model.psi_prime_at_zero()
        w_comp = self.composite("W", a, b, x)
        return (self.composite("Zbar", a, b, x)
                - dp * self.composite("Wbar", a, b, x)
                - (w_comp / self.fam_qr.W_at(delta))
                * (self.fam_qr.Zbar_at(delta) - dp * self.fam_qr.Wbar_at(delta)))


def build_engine(model: LevyModel, q: float, r: float) -> ScaleEngine:
    """Engine factory with a (model, q, r) cache; engines are immutable."""
    key = (model.cache_key(), float(q), float(r))
    got = _ENGINE_CACHE.get(key)
    if got is None:
        got = ScaleEngine(model, q, r)
        _ENGINE_CACHE[key] = got
    return got
