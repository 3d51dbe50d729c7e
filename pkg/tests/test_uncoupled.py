import math

import numpy as np
import pytest

from counterbraids.degree_model import EnsembleParams, counter_map, flow_map, potential
from counterbraids.exceptions import BracketError, DomainError
from counterbraids.uncoupled import (PotentialLandscape, area_threshold, bp_threshold_beta, bp_threshold_eps,
                                     cosine_grid, de_fixed_point, de_two_step, ebp_eps_at_zero, ebp_exit_curve,
                                     potential_threshold, residual_exit_curve, residual_rho)


def long_run(params, n=100_000):
    # plain loop with no early exit
    x = 1.0
    for _ in range(n):
        x = params.eps * counter_map(x, params) ** (params.k - 1)
    return x


def grid_scan_threshold(k, gamma, n_eps=10_000, n_iter=3000):
    # run DE for every eps on a uniform grid at once; the threshold is the last success
    eps = np.linspace(0.0, 1.0, n_eps + 1)
    x = np.ones_like(eps)
    for _ in range(n_iter):
        x = eps * (-np.expm1(-gamma * (-np.expm1(-gamma * x)) ** (k - 1))) ** (k - 1)
    ok = x < 1e-10
    return eps[np.nonzero(ok)[0].max()]


class TestFixedPoint:
    def test_zero_eps(self):
        r = de_fixed_point(EnsembleParams(3, 4.0, 0.0))
        assert r.x_inf == 0.0 and r.iterations == 1 and r.success

    def test_overloaded(self):
        assert de_fixed_point(EnsembleParams(3, 200.0, 1.0)).x_inf > 0.9

    def test_long_run_oracle(self):
        p = EnsembleParams(3, 4.0, 0.3)
        r = de_fixed_point(p, tol=1e-12)
        assert abs(r.x_inf - long_run(p)) <= 1e-10

    def test_monotone_from_one(self):
        r = de_fixed_point(EnsembleParams(4, 7.0, 0.5), record=True)
        assert np.all(np.diff(r.trajectory) <= 0)

    def test_zero_start_stays_zero(self):
        r = de_fixed_point(EnsembleParams(3, 4.0, 0.9), x0=0.0, record=True)
        assert np.all(r.trajectory == 0.0)

    def test_two_step_matches_combined(self):
        p = EnsembleParams(3, 5.0, 0.45)
        xs, _ = de_two_step(p, 1.0, 60)
        r = de_fixed_point(p, max_iter=30, tol=0.0, record=True)
        assert np.max(np.abs(xs[0::2] - r.trajectory)) <= 1e-15

    def test_two_step_bounds_alternate(self):
        # odd half-iterations hold eps-free values that dominate the even ones
        xs, _ = de_two_step(EnsembleParams(3, 5.0, 0.6), 1.0, 20)
        assert np.all(xs[1::2] >= xs[2::2])

    def test_bad_start(self):
        with pytest.raises(DomainError):
            de_fixed_point(EnsembleParams(3, 4.0, 0.3), x0=1.5)


class TestBPThreshold:
    def test_light_load(self):
        assert bp_threshold_eps(3, 0.1) >= 0.99

    @pytest.mark.parametrize("k,gamma", [(3, 4.0), (3, 6.0), (4, 8.0)])
    def test_in_unit_interval(self, k, gamma):
        assert 0.0 <= bp_threshold_eps(k, gamma) <= 1.0

    def test_grid_scan_oracle(self):
        assert abs(bp_threshold_eps(3, 4.0, 1e-6) - grid_scan_threshold(3, 4.0)) <= 2e-4

    def test_beta_round_trip(self):
        beta = bp_threshold_beta(3, 0.5)
        assert beta > 0
        assert abs(bp_threshold_eps(3, 3 / beta) - 0.5) <= 1e-4

    def test_beta_monotone_in_eps(self):
        b = [bp_threshold_beta(3, e) for e in (0.3, 0.6, 0.9)]
        assert b[0] <= b[1] <= b[2]

    def test_beta_bracket_failure(self):
        with pytest.raises(BracketError):
            bp_threshold_beta(3, 1.0, beta_max=0.1)


class TestEBP:
    def test_plug_back(self):
        k, gamma = 3, 4.0
        c = ebp_exit_curve(k, gamma)
        inside = c.eps <= 1.0
        x, e = c.param[inside], c.eps[inside]
        g = counter_map(x, EnsembleParams(k, gamma))
        assert np.max(np.abs(x - e * g ** (k - 1))) <= 1e-12

    def test_plug_back_through_flow_map(self):
        k, gamma = 4, 9.0
        c = ebp_exit_curve(k, gamma, cosine_grid(200))
        for x, e in zip(c.param, c.eps):
            if e <= 1:
                p = EnsembleParams(k, gamma, e)
                assert abs(flow_map(counter_map(x, p), p) - x) <= 1e-12

    def test_h_identity(self):
        k = 3
        c = ebp_exit_curve(k, 4.0)
        assert np.allclose(c.h, (c.param / c.eps) ** (k / (k - 1)), rtol=1e-12, atol=0)

    def test_endpoint(self):
        k, gamma = 3, 4.0
        rho = lambda z: math.exp(-gamma * (1 - z))
        base = 1 - rho(1 - (1 - rho(0.0)) ** (k - 1))
        c = ebp_exit_curve(k, gamma, np.array([0.5, 1.0]))
        assert c.eps[-1] == pytest.approx(1 / base ** (k - 1), rel=1e-14)

    def test_eps_at_zero(self):
        assert ebp_eps_at_zero(3, 4.0) == math.inf
        assert ebp_eps_at_zero(2, 4.0) == pytest.approx(1 / 16)

    def test_minimum_marker_is_bp_threshold(self):
        c = ebp_exit_curve(3, 6.0, cosine_grid(20_000))
        assert abs(c.markers["eps_min"] - bp_threshold_eps(3, 6.0)) <= 1e-5


class TestAreaPotential:
    def test_ordering(self):
        assert bp_threshold_eps(3, 4.0) <= area_threshold(3, 4.0) <= 1.0

    def test_area_equals_potential(self):
        assert abs(area_threshold(3, 4.0, 1e-6) - potential_threshold(3, 4.0)) <= 1e-4

    def test_area_info(self):
        e, info = area_threshold(3, 6.0, full_output=True)
        assert 0 < info["x_star"] < 1 and not info["monotone"] and not info["clipped"]
        # at the threshold, the EBP point sits on the curve
        c = ebp_exit_curve(3, 6.0, np.array([info["x_star"]]))
        assert c.eps[0] == pytest.approx(e, abs=1e-9)

    def test_clipped_when_curve_stays_negative(self):
        e, info = area_threshold(3, 0.5, full_output=True)
        assert e == 1.0

    def test_potential_zero_eps(self):
        land = PotentialLandscape(3, 4.0)
        assert land.largest_minimizer(0.0) == 0.0
        assert np.all(land.values(0.0)[1:] > 0)

    def test_potential_interior_minimum_at_full_load(self):
        land = PotentialLandscape(3, 30.0)
        assert land.largest_minimizer(1.0) > 0.0

    def test_landscape_matches_direct_potential(self):
        land = PotentialLandscape(4, 7.0)
        for x in (0.1, 0.37, 0.8):
            assert land(x, 0.4) == pytest.approx(potential(x, EnsembleParams(4, 7.0, 0.4), 1e-12), abs=1e-11)


class TestResidual:
    def test_empty_below_threshold(self):
        c = residual_exit_curve(3, 6.0, 0.1)
        assert c.is_empty and c.area == 0.0

    def test_unit_endpoint_identities(self):
        k, gamma, eps = 3, 6.0, 0.3
        c = residual_exit_curve(k, gamma, eps)
        x = c.markers["x_fixed"]
        p = EnsembleParams(k, gamma, eps)
        assert residual_rho(1.0, x, p) == pytest.approx(1.0, abs=1e-15)
        # at z = 1: eps_tilde * (1 - rho_tilde(0))^(k-1) = 1
        one_minus = 1 - residual_rho(0.0, x, p)
        assert c.eps[-1] * one_minus ** (k - 1) == pytest.approx(1.0, abs=1e-12)

    def test_zero_area_at_area_threshold(self):
        k, gamma = 3, 6.0
        eb = area_threshold(k, gamma)
        assert abs(residual_exit_curve(k, gamma, eb).area) <= 1e-3
        assert residual_exit_curve(k, gamma, eb + 0.05).area > 1e-3

    def test_residual_fixed_point_continuous_from_above(self):
        bp = bp_threshold_eps(3, 6.0)
        xs = [residual_exit_curve(3, 6.0, bp + d, cosine_grid(50)).markers["x_fixed"] for d in (0.04, 0.02, 0.01, 0.005)]
        assert all(a >= b for a, b in zip(xs, xs[1:]))

    def test_bad_grid(self):
        with pytest.raises(DomainError):
            residual_exit_curve(3, 6.0, 0.3, grid=[0.0, 0.5, 1.0])


@pytest.mark.parametrize("k", [3, 4, 5])
def test_threshold_ordering_over_gamma(k):
    for gamma in np.linspace(k / 0.9, k / 0.1, 10):
        assert bp_threshold_eps(k, gamma, 1e-6) <= area_threshold(k, gamma) + 1e-9
