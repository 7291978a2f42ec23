"""Spectrally positive Levy surplus model: Brownian part plus phase-type jumps.

The process is X(t) = -c*t + sigma*B(t) + sum_{n <= N(t)} Z_n with N a Poisson
process of rate kappa and Z_n i.i.d. phase-type.  Its Laplace exponent
psi(theta) = log E[exp(-theta*X(1))] is the rational function

    psi(theta) = c*theta + sigma^2*theta^2/2 + kappa*(zhat(theta) - 1),

where zhat is the jump Laplace transform alpha*(theta*I - T)^{-1}*exit.
"""

from __future__ import annotations

import numpy as np
from scipy import integrate, linalg

from .errors import NumericError


class PhaseTypeJump:
    """Phase-type jump distribution (m transient states, initial law alpha, sub-generator T)."""

    def __init__(self, alpha, T):
        alpha = np.asarray(alpha, dtype=float)
        T = np.asarray(T, dtype=float)
        if alpha.ndim != 1 or T.shape != (alpha.size, alpha.size):
            raise ValueError("alpha must be a length-m vector and T an m-by-m matrix")
        m = alpha.size
        if np.any(alpha < 0.0) or abs(alpha.sum() - 1.0) > 1e-12:
            raise ValueError("alpha must be a probability vector (entries >= 0, sum 1)")
        if np.any(np.diag(T) >= 0.0):
            raise ValueError("diagonal of T must be strictly negative")
        off = T - np.diag(np.diag(T))
        if np.any(off < 0.0):
            raise ValueError("off-diagonal entries of T must be nonnegative")
        if np.any(T.sum(axis=1) > 1e-12):
            raise ValueError("row sums of T must be <= 0")
        if np.any(np.linalg.eigvals(T).real >= 0.0):
            raise ValueError("all eigenvalues of T must have negative real part")

        self.m = m
        self.alpha = alpha
        self.T = T
        self.exit = -T @ np.ones(m)
        self.mean = float(-alpha @ np.linalg.solve(T, np.ones(m)))

        self._check_density()

    def _check_density(self):
        z_hi = self.tail_cutoff(1e-13)
        grid = np.linspace(1e-9, z_hi, 256)
        dens = np.array([self.density(z) for z in grid])
        if np.any(dens < -1e-12):
            raise ValueError("phase-type density is negative on the test grid")
        total, _ = integrate.quad(self.density, 0.0, z_hi, limit=200)
        if abs(total - 1.0) > 1e-8:
            raise ValueError(f"phase-type density integrates to {total!r}, not 1")

    def density(self, z: float) -> float:
        if z < 0.0:
            return 0.0
        return float(self.alpha @ linalg.expm(self.T * z) @ self.exit)

    def tail(self, z: float) -> float:
        """P(Z > z)."""
        if z <= 0.0:
            return 1.0
        return float(self.alpha @ linalg.expm(self.T * z) @ np.ones(self.m))

    def tail_cutoff(self, eps: float) -> float:
        """Smallest grid point z with P(Z > z) < eps (doubling search)."""
        z = 1.0
        while self.tail(z) >= eps:
            z *= 2.0
            if z > 1e6:
                raise NumericError("phase-type tail does not decay; bad sub-generator?")
        return z

    def laplace(self, theta) -> complex:
        """zhat(theta) = E[exp(-theta*Z)]; valid for Re(theta) > max Re eig(T)."""
        ident = np.eye(self.m, dtype=np.result_type(theta, float))
        return (self.alpha @ np.linalg.solve(theta * ident - self.T, self.exit))

    def laplace_deriv(self, theta) -> complex:
        ident = np.eye(self.m, dtype=np.result_type(theta, float))
        res = np.linalg.solve(theta * ident - self.T, self.exit)
        return -(self.alpha @ np.linalg.solve(theta * ident - self.T, res))

    def mean_below(self, z_cut: float) -> float:
        """E[Z; Z < z_cut], used for the compensated-drift form of the generator."""
        val, _ = integrate.quad(lambda z: z * self.density(z), 0.0, z_cut, limit=200)
        return val

    def cache_key(self):
        return (self.alpha.tobytes(), self.T.tobytes())


class LevyModel:
    """Immutable spectrally positive model; validated at construction.

    Parameters
    ----------
    c : drift coefficient in X(t) = -c*t + sigma*B(t) + jumps.
    sigma : Brownian volatility, >= 0.
    kappa : jump arrival rate, >= 0; `jump` must be given iff kappa > 0.
    jump : PhaseTypeJump or None.
    check_drift : require E[X_1] = kappa*E[Z] - c > 0 (the standing assumption).
        May be disabled to evaluate psi on otherwise-invalid parameter sets.
    """

    def __init__(self, c: float, sigma: float, kappa: float,
                 jump: PhaseTypeJump | None = None, *, check_drift: bool = True):
        c = float(c)
        sigma = float(sigma)
        kappa = float(kappa)
        if not np.isfinite(c):
            raise ValueError("drift c must be finite")
        if sigma < 0.0:
            raise ValueError("sigma must be >= 0")
        if kappa < 0.0:
            raise ValueError("kappa must be >= 0")
        if (kappa > 0.0) != (jump is not None):
            raise ValueError("jump distribution must be supplied exactly when kappa > 0")
        if sigma == 0.0 and c <= 0.0:
            raise ValueError("bounded-variation model needs c > 0 (monotone paths are excluded)")

        self.c = c
        self.sigma = sigma
        self.kappa = kappa
        self.jump = jump
        self._drift_checked = bool(check_drift)

        if check_drift and self.psi_prime_at_zero() >= 0.0:
            raise ValueError(
                f"model does not drift to +infinity: psi'(0+) = {self.psi_prime_at_zero():g} >= 0")

    @property
    def unbounded_variation(self) -> bool:
        return self.sigma > 0.0

    @property
    def jump_mean(self) -> float:
        return self.jump.mean if self.jump is not None else 0.0

    def psi(self, theta: float) -> float:
        """Laplace exponent at theta >= 0; psi(0) = 0."""
        if theta < 0.0:
            raise ValueError("theta must be >= 0")
        return self.psi_complex(theta).real

    def psi_complex(self, zeta) -> complex:
        val = self.c * zeta + 0.5 * self.sigma**2 * zeta * zeta
        if self.kappa > 0.0:
            val = val + self.kappa * (self.jump.laplace(zeta) - 1.0)
        return complex(val)

    def psi_prime_complex(self, zeta) -> complex:
        val = self.c + self.sigma**2 * zeta
        if self.kappa > 0.0:
            val = val + self.kappa * self.jump.laplace_deriv(zeta)
        return complex(val)

    def psi_prime_at_zero(self) -> float:
        """psi'(0+) = c - kappa*E[Z]; negative iff X drifts to +infinity."""
        return self.c - self.kappa * self.jump_mean

    def phi(self, q: float) -> float:
        """Unique positive root of psi(lambda) = q, q > 0.

        Bracket by doubling from theta = 1, then Brent plus a Newton polish;
        the residual |psi(phi) - q| must come out below 1e-12*max(1, q).
        """
        if q <= 0.0:
            raise ValueError("q must be > 0")
        hi = 1.0
        n = 0
        while self.psi(hi) <= q:
            hi *= 2.0
            n += 1
            if n > 200:
                raise NumericError(f"bracket expansion for phi({q}) failed at theta={hi:g}")
        from scipy.optimize import brentq
        root = brentq(lambda t: self.psi(t) - q, 0.0, hi, xtol=1e-15, rtol=8.9e-16)
        for _ in range(3):
            f = self.psi(root) - q
            fp = self.psi_prime_complex(root).real
            if fp != 0.0:
                root -= f / fp
        resid = abs(self.psi(root) - q)
        if resid > 1e-12 * max(1.0, q):
            raise NumericError(f"phi({q}) residual {resid:g} above tolerance")
        return root

    def jump_density(self, z: float) -> float:
        if self.kappa <= 0.0:
            raise ValueError("model has no jump component")
        if z <= 0.0:
            raise ValueError("z must be > 0")
        return self.jump.density(z)

    def cache_key(self):
        jk = self.jump.cache_key() if self.jump is not None else None
        return (self.c, self.sigma, self.kappa, jk)
