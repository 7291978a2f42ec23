import math

import mpmath
import numpy as np
import pytest
from scipy import integrate

from dualdiv.levy import LevyModel, PhaseTypeJump
from dualdiv.scale import COMPOSITE_KINDS, ScaleEngine, build_engine

Q, R = 0.05, 0.05


@pytest.fixture(scope="module")
def brownian_engine():
    return build_engine(LevyModel(-1.0, 0.2, 0.0), Q, R)


@pytest.fixture(scope="module")
def bv_engine():
    # bounded variation: no Brownian part, exponential(1) jumps, drift up
    jump = PhaseTypeJump([1.0], [[-1.0]])
    return build_engine(LevyModel(0.5, 0.0, 0.8, jump), Q, R)


class TestRootsAndW:
    def test_brownian_two_root_closed_form(self, brownian_engine):
        eng = brownian_engine
        c, sig2 = -1.0, 0.04
        disc = math.sqrt(c * c + 2 * sig2 * Q)
        z1 = (-c + disc) / sig2
        z2 = (-c - disc) / sig2
        for x in np.linspace(0.05, 4.0, 10):
            expected = (2.0 / sig2) * (math.exp(z1 * x) - math.exp(z2 * x)) / (z1 - z2)
            assert eng.W(x) == pytest.approx(expected, rel=1e-12)

    def test_gaver_stehfest_inversion_oracle(self, bv_engine):
        model = bv_engine.model
        mpmath.mp.dps = 30

        def transform(theta):
            psi = model.c * theta + model.kappa * (1.0 / (theta + 1.0) - 1.0)
            return 1.0 / (psi - Q)

        for x in (0.5, 1.0, 2.0):
            inv = float(mpmath.invertlaplace(transform, x, method="talbot"))
            assert bv_engine.W(x) == pytest.approx(inv, rel=1e-7)

    def test_zero_on_negative_half_line(self, engine1):
        for x in (-0.01, -1.0, -7.3):
            assert engine1.W(x) == 0.0
            assert engine1.Wbar(x) == 0.0
            assert engine1.Z(x) == 1.0
            assert engine1.Zbar(x) == x

    def test_boundary_behavior_unbounded_variation(self, engine1):
        assert abs(engine1.W(0.0)) < 1e-12
        assert engine1.W(0.0, 1) == pytest.approx(2.0 / 0.04, rel=1e-10)

    def test_boundary_behavior_bounded_variation(self, bv_engine):
        model = bv_engine.model
        assert bv_engine.W(0.0) == pytest.approx(1.0 / model.c, rel=1e-10)
        # W'(0+) = (q + total jump mass) / c^2 for finite activity
        expected = (Q + model.kappa) / model.c**2
        assert bv_engine.W(0.0, 1) == pytest.approx(expected, rel=1e-10)

    def test_laplace_identity(self, engine1, case1_model):
        rng = np.random.default_rng(7)
        for theta in engine1.phi_q + 5.0 * rng.random(20):
            lhs = complex(engine1.fam_q.W.laplace(theta)).real
            rhs = 1.0 / (case1_model.psi(theta) - Q)
            assert abs(lhs - rhs) / abs(rhs) < 1e-9

    def test_exp_scaled_W_increases_to_limit(self, engine1, case1_model):
        phi = engine1.phi_q
        vals = [math.exp(-phi * x) * engine1.W(x) for x in np.linspace(0.1, 40.0, 60)]
        assert all(b >= a - 1e-12 for a, b in zip(vals, vals[1:]))
        limit = 1.0 / case1_model.psi_prime_complex(phi).real
        assert vals[-1] == pytest.approx(limit, rel=1e-6)

    def test_W_strictly_increasing(self, engine1, solved1):
        xs = np.linspace(1e-3, 5.0 * solved1.b_star, 80)
        assert all(engine1.W(x, 1) > 0.0 for x in xs)

    def test_derivatives_match_finite_differences(self, engine1):
        h = 1e-5
        for x in (0.4, 1.7, 3.2):
            fd = (engine1.W(x + h) - engine1.W(x - h)) / (2 * h)
            assert engine1.W(x, 1) == pytest.approx(fd, rel=1e-6)
            fd2 = (engine1.W(x + h) - 2 * engine1.W(x) + engine1.W(x - h)) / h**2
            assert engine1.W(x, 2) == pytest.approx(fd2, rel=1e-5)

    def test_order_cap(self, engine1):
        with pytest.raises(ValueError):
            engine1.W(1.0, 3)

    def test_imag_residue_small(self, engine1):
        for x in (0.3, 1.0, 4.0):
            assert engine1.fam_q.W.imag_residue(x) < 1e-10


class TestZFamilies:
    def test_Z_and_Zbar_at_zero(self, engine1):
        assert engine1.Z(0.0) == pytest.approx(1.0, abs=1e-12)
        assert engine1.Zbar(0.0) == pytest.approx(0.0, abs=1e-12)

    def test_Z_theta_at_zero_theta_is_Z(self, engine1):
        for x in (0.3, 1.7):
            assert engine1.Z_theta(x, 0.0) == pytest.approx(engine1.Z(x), rel=1e-12)

    def test_Z_theta_negative_argument(self, engine1):
        assert engine1.Z_theta(-0.4, 1.3) == pytest.approx(math.exp(-0.4 * 1.3), rel=1e-12)

    def test_Z_theta_defining_integral(self, engine1, case1_model):
        theta, x = 0.9, 1.4
        integral, _ = integrate.quad(lambda z: math.exp(-theta * z) * engine1.W(z),
                                     0.0, x, epsabs=1e-12, limit=200)
        expected = math.exp(theta * x) * (1.0 + (Q - case1_model.psi(theta)) * integral)
        assert engine1.Z_theta(x, theta) == pytest.approx(expected, rel=1e-9)


class TestComposites:
    def test_collapse_for_x_at_or_above_a(self, engine1):
        a, b = 1.0, 2.0
        assert engine1.composite("W", a, b, a) == pytest.approx(
            engine1.fam_qr.W_at(b - a), rel=1e-12)
        for x in (1.5, 2.0, 3.1):
            assert engine1.composite("W", a, b, x) == pytest.approx(
                engine1.fam_qr.W_at(b - x), rel=1e-12, abs=1e-12)

    def test_domain_error(self, engine1):
        with pytest.raises(ValueError):
            engine1.composite("W", 2.0, 1.0, 0.5)
        with pytest.raises(ValueError):
            engine1.composite("V", 1.0, 2.0, 0.5)

    @pytest.mark.parametrize("kind", COMPOSITE_KINDS)
    def test_defining_vs_alternative_form(self, engine1, kind):
        """Defining convolution form against the shifted-family identity, with
        the alternative side evaluated by adaptive quadrature."""
        rng = np.random.default_rng(42)
        theta = 0.7
        fam_q, fam_qr = engine1.fam_q, engine1.fam_qr
        for _ in range(10):
            a = rng.uniform(0.2, 2.0)
            b = a + rng.uniform(0.3, 2.0)
            x = rng.uniform(0.0, a)

            def base(kind, y, theta=theta):
                if kind == "W":
                    return fam_q.W_at(y)
                if kind == "Zbar":
                    return fam_q.Zbar_at(y)
                return fam_q.Z_theta_at(y, theta)

            if kind == "Wbar":
                # alternative form via the identity
                # Zqr_comp = (q+r)*Wbar_comp + 1 - r*Wbar_q(a-x)
                z_comp = engine1.composite("Z_theta", a, b, x, 0.0)
                alt = (z_comp - 1.0 + engine1.r * fam_q.Wbar_at(a - x)) / (Q + R)
            else:
                integrand = lambda u: fam_q.W_at(b - u - x) * (
                    fam_qr.W_at(u) if kind == "W"
                    else fam_qr.Z_theta_at(u, theta if kind == "Z_theta" else 0.0)
                    if kind == "Z_theta"
                    else fam_qr.Zbar_at(u))
                integral, _ = integrate.quad(integrand, 0.0, b - a,
                                             epsabs=1e-12, limit=300)
                alt = base(kind, b - x) + engine1.r * integral
            got = engine1.composite(kind, a, b, x, theta)
            assert got == pytest.approx(alt, rel=1e-9, abs=1e-9)

    def test_convolution_matches_adaptive_quadrature(self, engine1):
        rng = np.random.default_rng(3)
        fam_q, fam_qr = engine1.fam_q, engine1.fam_qr
        for _ in range(10):
            a = rng.uniform(0.3, 2.5)
            b = a + rng.uniform(0.2, 2.0)
            x = rng.uniform(0.0, a)
            s = a - x
            for kind in COMPOSITE_KINDS:
                fn = {"W": fam_qr.W_at, "Wbar": fam_qr.Wbar_at,
                      "Zbar": fam_qr.Zbar_at,
                      "Z_theta": lambda y: fam_qr.Z_theta_at(y, 0.4)}[kind]
                integral, _ = integrate.quad(
                    lambda y: fam_q.W_at(s - y) * fn(y + b - a), 0.0, s,
                    epsabs=1e-12, limit=300)
                expected = fn(s + b - a) - engine1.r * integral
                got = engine1.composite(kind, a, b, x, 0.4)
                assert got == pytest.approx(expected, rel=1e-8, abs=1e-10)


class TestKernels:
    def test_values_at_x_equals_a(self, engine1):
        a, b = 1.0, 2.0
        assert engine1.kernel_K(a, b, a) == pytest.approx(1.0, abs=1e-12)
        assert engine1.kernel_H(a, b, a) == pytest.approx(1.0, abs=1e-12)
        for theta in (0.0, 0.7, 2.0):
            assert abs(engine1.kernel_I(a, b, a, theta)) < 1e-12

    def test_H_I_K_relation(self, engine1):
        a, b, x = 1.0, 2.0, 0.4
        lhs = ((engine1.r + engine1.q / engine1.fam_qr.Z_at(b - a))
               * engine1.kernel_I(a, b, x) / (engine1.r + engine1.q))
        rhs = engine1.kernel_K(a, b, x) - engine1.kernel_H(a, b, x)
        assert lhs == pytest.approx(rhs, abs=1e-10)

    def test_J_is_theta_derivative_of_I(self, engine1):
        h = 1e-5
        for a, b, x in ((1.0, 2.0, 1.0), (1.0, 2.0, 0.4), (0.5, 2.5, 0.1)):
            fd = (engine1.kernel_I(a, b, x, h) - engine1.kernel_I(a, b, x, 0.0)) / h
            assert engine1.kernel_J(a, b, x) == pytest.approx(fd, abs=1e-5)

    def test_J_at_a_is_zero(self, engine1):
        assert abs(engine1.kernel_J(1.0, 2.0, 1.0)) < 1e-12


class TestEngineConstruction:
    def test_engine_cache_returns_same_object(self, case1_model, engine1):
        assert build_engine(case1_model, Q, R) is engine1

    def test_rejects_nonpositive_rates(self, case1_model):
        with pytest.raises(ValueError):
            ScaleEngine(case1_model, 0.0, R)
        with pytest.raises(ValueError):
            ScaleEngine(case1_model, Q, -0.1)

    def test_root_residuals(self, engine1, case1_model):
        for fam in (engine1.fam_q, engine1.fam_qr):
            for z in fam.roots:
                assert abs(case1_model.psi_complex(z) - fam.q) < 1e-10
