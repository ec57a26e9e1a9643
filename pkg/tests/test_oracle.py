import math

import numpy as np
import pytest

from hdwilks.errors import ConvergenceError
from hdwilks.oracle import (
    GRIDS,
    ContourSpec,
    contour_mean,
    contour_mean_at,
    contour_variance,
    contour_variance_at,
    mc_clt_check,
    quad_lsd_integral,
    richardson,
    sample_g_statistics,
    verify_point,
)
from hdwilks.rmt import AspectRatios, lsd_log_moment, mean_correction, variance_correction

# closed-form m and v frozen for regression; both independently reproduced below
FROZEN_MV = {
    (0.5, 0.25): (0.05268025782891309, 0.21072103131565267),
    (0.1, 0.9): (1.1041372067614026, 4.416548827045614),
    (0.9, 0.1): (0.005524918093292586, 0.022099672373169944),
}


class TestQuadrature:
    @pytest.mark.parametrize("y", [(0.5, 0.25), (0.05, 0.95), (0.95, 0.05), (0.9, 0.9)])
    def test_log_moment(self, y):
        assert quad_lsd_integral(AspectRatios(*y)) == pytest.approx(lsd_log_moment(y), abs=1e-10)

    def test_custom_function_total_mass(self):
        assert quad_lsd_integral(AspectRatios(0.3, 0.6), f=lambda x: np.ones_like(x)) == pytest.approx(1.0, abs=1e-10)

    def test_first_moment(self):
        # mean of the Fisher LSD is 1 / (1 - y2)
        y = AspectRatios(0.3, 0.6)
        assert quad_lsd_integral(y, f=lambda x: x) == pytest.approx(1 / 0.4, rel=1e-10)

    def test_error_budget_enforced(self):
        with pytest.raises(ConvergenceError):
            quad_lsd_integral(AspectRatios(0.5, 0.5), f=lambda x: np.sin(1e4 * x), max_error=1e-16)


class TestContour:
    @pytest.mark.parametrize("y", list(FROZEN_MV))
    def test_mean_and_variance(self, y):
        m, v = FROZEN_MV[y]
        assert contour_mean(y) == pytest.approx(m, abs=1e-6)
        assert contour_variance(y) == pytest.approx(v, abs=1e-5)

    def test_values_at_fixed_radius_converge_linearly(self):
        y = AspectRatios(0.5, 0.5)
        errs = [abs(contour_mean_at(y, r, 1 << 14).real - mean_correction(y)) for r in (1.01, 1.001)]
        assert errs[1] < errs[0] / 5

    def test_imaginary_part_negligible(self):
        y = AspectRatios(0.4, 0.3)
        assert abs(contour_mean_at(y, 1.001, 1 << 14).imag) < 1e-10
        assert abs(contour_variance_at(y, 1.001, 1 << 14).imag) < 1e-8

    @pytest.mark.parametrize("inner", ["zeta1", "zeta2"])
    def test_nested_orders_agree(self, inner):
        y = AspectRatios(0.4, 0.3)
        ref = contour_variance_at(y, 1.01, 4096)
        assert contour_variance_at(y, 1.01, 4096, inner=inner) == pytest.approx(ref, abs=1e-10)

    def test_richardson_exact_on_polynomials(self):
        hs = np.array([1e-2, 1e-3, 1e-4])
        vals = 2.5 + 3 * hs - 7 * hs**2
        best, err = richardson(hs, vals)
        assert best == pytest.approx(2.5, abs=1e-12)

    def test_spec_validation(self):
        with pytest.raises(ValueError):
            ContourSpec(r_values=(1.0,))
        with pytest.raises(ValueError):
            ContourSpec(n_nodes=16)

    def test_tight_extrapolation_budget_raises(self):
        spec = ContourSpec(r_values=(1.01, 1.001), extrapolation_tol=1e-14)
        with pytest.raises(ConvergenceError):
            contour_variance((0.9, 0.9), spec)


class TestVerify:
    def test_grids(self):
        assert GRIDS["coarse"] == tuple(round(0.1 * i, 10) for i in range(1, 10))
        assert len(GRIDS["fine"]) == 19 and GRIDS["fine"][0] == 0.05 and GRIDS["fine"][-1] == 0.95

    @pytest.mark.parametrize("y", [(0.05, 0.95), (0.95, 0.95), (0.05, 0.05)])
    def test_fine_grid_corners(self, y):
        c = verify_point(*y)
        assert c.passed, c

    def test_failure_reported(self):
        c = verify_point(0.5, 0.5, contour_tol=1e-16)
        assert not c.passed


class TestMonteCarlo:
    def test_deterministic(self):
        a = sample_g_statistics(5, 20, 40, 7, seed=3)
        b = sample_g_statistics(5, 20, 40, 7, seed=3, threads=3)
        np.testing.assert_array_equal(a, b)

    def test_single_replication_flags(self):
        s = mc_clt_check(5, 20, 40, 1)
        assert s.insufficient_reps and math.isnan(s.var_ratio)

    def test_small_clt(self):
        s = mc_clt_check(20, 40, 80, 400, seed=11)
        assert s.mean_err_in_se < 4
        assert 0.7 < s.var_ratio < 1.3

    def test_ratio_errors(self):
        with pytest.raises(ValueError):
            mc_clt_check(50, 40, 80, 10)
