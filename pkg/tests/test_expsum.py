import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from dualdiv.expsum import ExpSum


def simple_sum():
    # 2 e^{-x} + 0.5 x e^{0.3x} - 1.2 + 0.7x plus a conjugate pair
    return ExpSum(
        [2.0, 0.5, -1.2, 0.7, 0.3 + 0.4j, 0.3 - 0.4j],
        [-1.0, 0.3, 0.0, 0.0, -0.5 + 2.0j, -0.5 - 2.0j],
        [0, 1, 0, 1, 0, 0],
    )


rate_st = st.floats(min_value=-3.0, max_value=1.0).map(lambda r: round(r, 3))
coeff_st = st.floats(min_value=-5.0, max_value=5.0, allow_nan=False).map(lambda c: round(c, 3))


@st.composite
def expsums(draw, max_terms=4, max_power=2):
    n = draw(st.integers(min_value=1, max_value=max_terms))
    coeffs, rates, powers = [], [], []
    for _ in range(n):
        c = draw(coeff_st)
        rho = draw(rate_st)
        k = draw(st.integers(min_value=0, max_value=max_power))
        coeffs.append(c)
        rates.append(rho)
        powers.append(k)
        # optionally make it a conjugate pair
        if draw(st.booleans()):
            im = draw(st.floats(min_value=0.1, max_value=2.0).map(lambda v: round(v, 3)))
            cim = draw(st.floats(min_value=-2.0, max_value=2.0).map(lambda v: round(v, 3)))
            coeffs[-1] = complex(c, cim)
            rates[-1] = complex(rho, im)
            coeffs.append(complex(c, -cim))
            rates.append(complex(rho, -im))
            powers.append(k)
    return ExpSum(coeffs, rates, powers)


class TestBasics:
    def test_zero_and_constant(self):
        assert ExpSum.zero()(1.7) == 0.0
        assert ExpSum.constant(3.5)(0.2) == 3.5

    def test_merge_of_identical_terms(self):
        f = ExpSum([1.0, 2.0], [-1.0, -1.0], [0, 0])
        assert f.n_terms == 1
        assert f(0.0) == pytest.approx(3.0)

    def test_real_output_for_conjugate_pairs(self):
        f = simple_sum()
        for x in (0.0, 0.7, 2.5):
            assert f.imag_residue(x) < 1e-12

    def test_vector_evaluation(self):
        f = simple_sum()
        xs = np.array([0.0, 0.5, 1.0])
        vec = f(xs)
        assert vec == pytest.approx([f(float(x)) for x in xs])


class TestCalculus:
    @given(expsums())
    @settings(max_examples=60, deadline=None)
    def test_derivative_matches_finite_difference(self, f):
        h = 1e-5
        for x in (0.3, 1.1):
            fd = (f(x + h) - f(x - h)) / (2 * h)
            scale = max(1.0, abs(fd))
            assert abs(f(x, 1) - fd) / scale < 1e-6

    @given(expsums())
    @settings(max_examples=60, deadline=None)
    def test_antiderivative(self, f):
        F = f.antideriv()
        assert abs(F(0.0)) < 1e-12
        for x in (0.4, 1.3):
            val, _ = integrate.quad(f, 0.0, x, limit=200, epsabs=1e-11, epsrel=1e-11)
            assert F(x) == pytest.approx(val, abs=1e-8, rel=1e-8)

    @given(expsums(max_terms=3, max_power=1))
    @settings(max_examples=40, deadline=None)
    def test_convolution_matches_quadrature(self, g):
        f = ExpSum([1.0, 0.5], [-0.8, 0.2], [0, 0])
        h = f.convolve(g)
        for s in (0.5, 1.5):
            val, _ = integrate.quad(lambda y: f(s - y) * g(y), 0.0, s, limit=200, epsabs=1e-11, epsrel=1e-11)
            assert h(s) == pytest.approx(val, abs=1e-8, rel=1e-8)

    def test_convolution_with_coincident_rates(self):
        f = ExpSum([1.0], [-1.0], [0])
        g = ExpSum([1.0], [-1.0], [0])
        h = f.convolve(g)
        # exact: s * e^{-s}
        for s in (0.3, 2.0):
            assert h(s) == pytest.approx(s * math.exp(-s), rel=1e-12)

    @given(expsums())
    @settings(max_examples=40, deadline=None)
    def test_compose_affine(self, f):
        g = f.compose_affine(0.7, -1.0)
        for x in (0.0, 0.45, 1.2):
            assert g(x) == pytest.approx(f(0.7 - x), abs=1e-9, rel=1e-9)

    def test_shift(self):
        f = simple_sum()
        g = f.shift(0.9)
        assert g(0.4) == pytest.approx(f(1.3), rel=1e-12)


class TestLaplace:
    @given(expsums(max_power=1))
    @settings(max_examples=40, deadline=None)
    def test_laplace_matches_quadrature(self, f):
        theta = 2.5  # above every generated rate
        val, _ = integrate.quad(lambda x: math.exp(-theta * x) * f(x), 0.0, 80.0,
                                limit=300, epsabs=1e-10, epsrel=1e-10)
        assert complex(f.laplace(theta)).real == pytest.approx(val, abs=1e-7, rel=1e-7)
