import math

import numpy as np
import pytest

from dualdiv.errors import RegimeError
from dualdiv.optimizer import HybridSolution, a_of_b, epsilon_root, solve, sweep
from dualdiv.scale import build_engine
from dualdiv.valuation import (Gamma, ProblemParams, Regime, continuous_value,
                               kappa_fn, periodic_value, v_hybrid)

Q, R, BETA = 0.05, 0.05, 0.6


class TestEpsilon:
    def test_residual(self, params, engine1):
        eps = epsilon_root(params, engine1)
        assert abs(kappa_fn(params, engine1, eps)) < 1e-12

    def test_bracket_left_end_positive(self, params, engine1):
        assert kappa_fn(params, engine1, 0.0) == pytest.approx(
            (Q + R) * (1.0 - BETA) / Q)
        assert kappa_fn(params, engine1, 0.0) > 0.0

    def test_shrinks_as_beta_grows(self, engine1):
        eps_09 = epsilon_root(ProblemParams(Q, R, 0.9), engine1)
        eps_0999 = epsilon_root(ProblemParams(Q, R, 0.999), engine1)
        assert eps_0999 < eps_09

    def test_regime_guard(self, engine1):
        with pytest.raises(RegimeError):
            epsilon_root(ProblemParams(Q, R, 0.4), engine1)
        with pytest.raises(RegimeError):
            epsilon_root(ProblemParams(Q, R, 1.2), engine1)


class TestAOfB:
    def test_clipped_at_zero(self, params, engine1):
        eps = epsilon_root(params, engine1)
        assert a_of_b(params, engine1, eps * 0.5) == 0.0
        assert a_of_b(params, engine1, eps) == 0.0

    def test_linear_beyond_eps(self, params, engine1):
        eps = epsilon_root(params, engine1)
        assert a_of_b(params, engine1, eps + 1.0) == pytest.approx(1.0, abs=1e-12)

    def test_is_argmin(self, params, engine1):
        eps = epsilon_root(params, engine1)
        b = 2.0 * eps
        a_min = a_of_b(params, engine1, b)
        g_min = Gamma(params, engine1, a_min, b)
        assert Gamma(params, engine1, a_min - 0.05, b) >= g_min
        assert Gamma(params, engine1, a_min + 0.05, b) >= g_min


class TestSolve:
    def test_case1_interior(self, solved1):
        assert solved1.regime is Regime.HYBRID
        assert 0.0 < solved1.a_star < solved1.b_star < math.inf
        assert abs(solved1.diagnostics["residual_Gamma"]) < 1e-8
        assert abs(solved1.diagnostics["residual_gamma_small"]) < 1e-8

    def test_case1_gap_equals_epsilon(self, solved1):
        assert solved1.b_star - solved1.a_star == pytest.approx(
            solved1.epsilon, abs=1e-8)

    def test_case2_boundary(self, solved2, params, engine2):
        assert solved2.regime is Regime.HYBRID
        assert solved2.a_star == 0.0
        assert abs(Gamma(params, engine2, 0.0, solved2.b_star)) < 1e-8
        bound = Q / (BETA * (Q + R) - R)
        assert engine2.fam_qr.Z_at(solved2.b_star) <= bound + 1e-8

    def test_pure_periodic_dispatch(self, case1_model, engine1):
        sol = solve(ProblemParams(Q, R, 0.4), case1_model)
        assert sol.regime is Regime.PURE_PERIODIC
        assert math.isinf(sol.b_star)
        a_p, _ = periodic_value(ProblemParams(Q, R, 0.4), engine1)
        assert sol.a_star == pytest.approx(a_p)

    def test_pure_continuous_dispatch(self, case1_model, engine1):
        sol = solve(ProblemParams(Q, R, 1.2), case1_model)
        assert sol.regime is Regime.PURE_CONTINUOUS
        b_c, _ = continuous_value(ProblemParams(Q, R, 1.2), engine1)
        assert sol.a_star == sol.b_star == pytest.approx(b_c)

    def test_regime_boundaries_go_pure(self, case1_model):
        assert solve(ProblemParams(Q, R, R / (Q + R)), case1_model).regime \
            is Regime.PURE_PERIODIC
        assert solve(ProblemParams(Q, R, 1.0), case1_model).regime \
            is Regime.PURE_CONTINUOUS


class TestGammaMin:
    def test_strictly_increasing(self, params, engine1, solved1):
        eps = solved1.epsilon
        bs = np.linspace(0.05, 3.0 * solved1.b_star, 50)
        vals = [Gamma(params, engine1, max(b - eps, 0.0), b) for b in bs]
        assert all(y > x for x, y in zip(vals, vals[1:]))

    def test_b0_below_b_star(self, params, engine1, solved1):
        # root of Gamma(0, b) = 0 never exceeds b*
        lo, hi = 1e-9, solved1.b_star * 4.0
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if Gamma(params, engine1, 0.0, mid) < 0.0:
                lo = mid
            else:
                hi = mid
        b0 = 0.5 * (lo + hi)
        assert b0 <= solved1.b_star + 1e-8


class TestDominance:
    @pytest.mark.parametrize("case", ["case1", "case2"])
    def test_figure2_pairs(self, case, request, params):
        solved = request.getfixturevalue("solved1" if case == "case1" else "solved2")
        engine = request.getfixturevalue("engine1" if case == "case1" else "engine2")
        a_s, b_s = solved.a_star, solved.b_star
        pairs = {(a, b)
                 for a in (0.0, a_s / 2.0, (a_s + b_s) / 2.0)
                 for b in ((a_s + b_s) / 2.0, b_s + 0.5)
                 if a < b and (a, b) != (a_s, b_s)}
        rng = np.random.default_rng(17)
        while len(pairs) < 12:
            a = rng.uniform(0.0, b_s)
            b = a + rng.uniform(0.1, 2.0)
            if (a, b) != (a_s, b_s):
                pairs.add((a, b))
        xs = np.linspace(0.0, 2.0 * b_s, 50)
        for a, b in pairs:
            for x in xs:
                assert solved.value(float(x)) >= v_hybrid(
                    params, engine, a, b, float(x)) - 1e-9


class TestSweep:
    def test_beta_sweep_monotonics(self, case1_model, params, engine1):
        betas = [0.51, 0.6, 0.995]
        sols = sweep(params, case1_model, "beta", betas)
        assert sols[0].b_star > sols[1].b_star
        for beta, sol in zip(betas, sols):
            eps = epsilon_root(ProblemParams(Q, R, beta), engine1)
            assert sol.b_star - sol.a_star <= eps + 1e-8
        eps_06 = epsilon_root(ProblemParams(Q, R, 0.6), engine1)
        eps_0995 = epsilon_root(ProblemParams(Q, R, 0.995), engine1)
        assert eps_0995 < 0.05 * eps_06

    def test_beta_endpoints_dispatch_pure(self, case1_model, params):
        sols = sweep(params, case1_model, "beta", [0.4, 1.0])
        assert sols[0].regime is Regime.PURE_PERIODIC
        assert sols[1].regime is Regime.PURE_CONTINUOUS

    def test_r_sweep_value_increases(self, case1_model, params):
        rs = [0.001, 0.02, 0.05, 0.074]
        sols = sweep(params, case1_model, "r", rs)
        vals = [sol.value(2.0) for sol in sols]
        assert all(y >= x - 1e-9 for x, y in zip(vals, vals[1:]))

    def test_r_endpoints(self, case1_model, params):
        # r = q*beta/(1-beta) = 0.075 makes beta = r/(q+r): pure periodic
        sols = sweep(params, case1_model, "r", [0.0, 0.075])
        assert sols[0].regime is Regime.PURE_CONTINUOUS
        assert sols[1].regime is Regime.PURE_PERIODIC

    def test_bad_variable(self, case1_model, params):
        with pytest.raises(ValueError):
            sweep(params, case1_model, "q", [0.1])
