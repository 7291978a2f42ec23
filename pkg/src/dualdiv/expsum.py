"""Exact algebra on finite sums of c * x^k * exp(rho*x) with complex c, rho.

Every scale-function object in this package is such a sum (constants and
polynomials ride along as rho = 0 terms).  Differentiation, antidifferentiation
from zero, affine substitution, and pairwise convolution from zero are all
closed on the representation, so no quadrature enters the closed-form path.
"""

from __future__ import annotations

import math

import numpy as np

# rates closer than this (relative) are merged via the x-multiplied limit form
RATE_COINCIDENCE_TOL = 1e-9


def _int_power_exp(rho: complex, k: int) -> tuple[list[tuple[complex, complex, int]], complex]:
    """Antiderivative from 0 of x^k exp(rho*x) as (terms, constant).

    For rho != 0 repeated integration by parts gives
      sum_{j=0..k} (-1)^(k-j) k!/(j! rho^(k-j+1)) x^j e^(rho x)  -  (-1)^k k!/rho^(k+1).
    """
    if rho == 0:
        return [(1.0 / (k + 1), 0.0 + 0.0j, k + 1)], 0.0 + 0.0j
    terms = []
    kf = math.factorial(k)
    for j in range(k + 1):
        coeff = ((-1.0) ** (k - j)) * kf / (math.factorial(j) * rho ** (k - j + 1))
        terms.append((coeff, rho, j))
    const = -((-1.0) ** k) * kf / rho ** (k + 1)
    return terms, const


class ExpSum:
    """Immutable sum  f(x) = sum_i coeffs[i] * x^powers[i] * exp(rates[i]*x)."""

    __slots__ = ("coeffs", "rates", "powers", "_derivs")

    def __init__(self, coeffs=(), rates=(), powers=()):
        merged: dict[tuple[complex, int], complex] = {}
        for c, rho, k in zip(coeffs, rates, powers):
            c = complex(c)
            if c == 0:
                continue
            key = (complex(rho), int(k))
            merged[key] = merged.get(key, 0.0 + 0.0j) + c
        items = [(c, rho, k) for (rho, k), c in merged.items() if c != 0]
        items.sort(key=lambda t: (t[1].real, t[1].imag, t[2]))
        self.coeffs = np.array([t[0] for t in items], dtype=complex)
        self.rates = np.array([t[1] for t in items], dtype=complex)
        self.powers = np.array([t[2] for t in items], dtype=np.int64)
        self._derivs: list[ExpSum] = []

    # -- constructors -------------------------------------------------------

    @classmethod
    def zero(cls) -> "ExpSum":
        return cls()

    @classmethod
    def constant(cls, value) -> "ExpSum":
        return cls([value], [0.0], [0])

    @classmethod
    def affine(cls, const, slope) -> "ExpSum":
        return cls([const, slope], [0.0, 0.0], [0, 1])

    def _terms(self):
        return zip(self.coeffs, self.rates, self.powers)

    @property
    def n_terms(self) -> int:
        return self.coeffs.size

    # -- linear algebra -----------------------------------------------------

    def __add__(self, other: "ExpSum") -> "ExpSum":
        return ExpSum(np.concatenate([self.coeffs, other.coeffs]),
                      np.concatenate([self.rates, other.rates]),
                      np.concatenate([self.powers, other.powers]))

    def __sub__(self, other: "ExpSum") -> "ExpSum":
        return self + (-other)

    def __neg__(self) -> "ExpSum":
        return ExpSum(-self.coeffs, self.rates, self.powers)

    def scaled(self, factor) -> "ExpSum":
        return ExpSum(self.coeffs * factor, self.rates, self.powers)

    def mul_power(self, j: int) -> "ExpSum":
        """x^j * f(x)."""
        return ExpSum(self.coeffs, self.rates, self.powers + int(j))

    def plus_const(self, value) -> "ExpSum":
        return self + ExpSum.constant(value)

    # -- calculus -----------------------------------------------------------

    def deriv(self) -> "ExpSum":
        coeffs, rates, powers = [], [], []
        for c, rho, k in self._terms():
            if k > 0:
                coeffs.append(c * k)
                rates.append(rho)
                powers.append(k - 1)
            if rho != 0:
                coeffs.append(c * rho)
                rates.append(rho)
                powers.append(k)
        return ExpSum(coeffs, rates, powers)

    def antideriv(self) -> "ExpSum":
        """F(x) = integral_0^x f(y) dy (so F(0) = 0)."""
        coeffs, rates, powers = [], [], []
        for c, rho, k in self._terms():
            terms, const = _int_power_exp(rho, int(k))
            for tc, trho, tk in terms:
                coeffs.append(c * tc)
                rates.append(trho)
                powers.append(tk)
            if const != 0:
                coeffs.append(c * const)
                rates.append(0.0)
                powers.append(0)
        return ExpSum(coeffs, rates, powers)

    def compose_affine(self, const: float, slope: float) -> "ExpSum":
        """g(x) = f(const + slope*x)."""
        coeffs, rates, powers = [], [], []
        for c, rho, k in self._terms():
            base = c * np.exp(rho * const)
            for j in range(int(k) + 1):
                coeffs.append(base * math.comb(int(k), j) * const ** (int(k) - j) * slope**j)
                rates.append(rho * slope)
                powers.append(j)
        return ExpSum(coeffs, rates, powers)

    def shift(self, s: float) -> "ExpSum":
        """g(x) = f(x + s)."""
        return self.compose_affine(s, 1.0)

    def convolve(self, other: "ExpSum") -> "ExpSum":
        """h(s) = integral_0^s f(s-y) * g(y) dy.

        Rates within RATE_COINCIDENCE_TOL (relative) fall back to the
        x-multiplied limit form instead of cancelling 1/(rho2-rho1) pairs.
        """
        coeffs, rates, powers = [], [], []
        for c1, rho1, k1 in self._terms():
            for c2, rho2, k2 in other._terms():
                delta = rho2 - rho1
                scale = max(1.0, abs(rho1), abs(rho2))
                coincident = abs(delta) < RATE_COINCIDENCE_TOL * scale
                for i in range(int(k1) + 1):
                    pref = c1 * c2 * math.comb(int(k1), i) * (-1.0) ** i
                    outer_pow = int(k1) - i
                    inner_k = int(k2) + i
                    if coincident:
                        coeffs.append(pref / (inner_k + 1))
                        rates.append(rho1)
                        powers.append(outer_pow + inner_k + 1)
                        continue
                    terms, const = _int_power_exp(delta, inner_k)
                    for tc, _trho, tk in terms:
                        coeffs.append(pref * tc)
                        rates.append(rho2)
                        powers.append(outer_pow + tk)
                    if const != 0:
                        coeffs.append(pref * const)
                        rates.append(rho1)
                        powers.append(outer_pow)
        return ExpSum(coeffs, rates, powers)

    # -- evaluation ---------------------------------------------------------

    def _derived(self, order: int) -> "ExpSum":
        if order == 0:
            return self
        while len(self._derivs) < order:
            prev = self._derivs[-1] if self._derivs else self
            self._derivs.append(prev.deriv())
        return self._derivs[order - 1]

    def eval(self, x, order: int = 0):
        """Complex value of the order-th derivative at x (scalar or array)."""
        f = self._derived(order)
        if f.n_terms == 0:
            return np.zeros_like(np.asarray(x, dtype=float)) * 0j if np.ndim(x) else 0.0 + 0.0j
        x_arr = np.asarray(x, dtype=float)
        if x_arr.ndim == 0:
            xv = float(x_arr)
            return complex(np.sum(f.coeffs * xv**f.powers * np.exp(f.rates * xv)))
        vals = (f.coeffs[None, :] * x_arr[..., None] ** f.powers[None, :]
                * np.exp(f.rates[None, :] * x_arr[..., None]))
        return vals.sum(axis=-1)

    def __call__(self, x, order: int = 0):
        """Real part of eval; the imaginary residue is checked by tests, not here."""
        out = self.eval(x, order)
        return out.real if np.ndim(x) else float(out.real)

    def imag_residue(self, x, order: int = 0) -> float:
        """Relative imaginary residue at x; small iff conjugate closure holds."""
        val = self.eval(x, order)
        denom = max(abs(val), 1e-300)
        return abs(np.imag(val)) / denom

    def laplace(self, theta) -> complex:
        """integral_0^inf exp(-theta*x) f(x) dx for Re(theta) > max Re(rates)."""
        total = 0.0 + 0.0j
        for c, rho, k in self._terms():
            total += c * math.factorial(int(k)) / (theta - rho) ** (int(k) + 1)
        return total
