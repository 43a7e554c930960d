import numpy as np
import pytest

from basinlab import (
    Bounds,
    NormalCrossingSpec,
    VolumeCurve,
    default_ladder,
    fit_scaling,
    make_normal_crossing,
    make_quadratic,
    mc_sublevel_volume,
    volume_curve,
)
from basinlab.errors import FitWindowError, InvalidInputError


class TestMcVolume:
    def test_disk_area(self):
        L = make_quadratic(2)
        vol, se = mc_sublevel_volume(L, 0.25, 100_000, seed=1)
        assert abs(vol - np.pi * 0.25) <= 3 * se

    def test_slab_volume(self):
        L = make_normal_crossing(NormalCrossingSpec(dim=2, exponents=(1,), active_dims=(0,)))
        vol, se = mc_sublevel_volume(L, 0.01, 200_000, seed=2)
        assert abs(vol - 0.4) <= 3 * se

    def test_full_cover(self):
        L = make_quadratic(2)  # max K on [-1,1]^2 is 2
        vol, se = mc_sublevel_volume(L, 2.5, 10_000, seed=3)
        assert vol == pytest.approx(4.0)
        assert se == 0.0

    def test_invalid_epsilon(self):
        with pytest.raises(InvalidInputError):
            mc_sublevel_volume(make_quadratic(2), -1.0, 100, seed=0)

    def test_unbiasedness_against_reference(self):
        L = make_quadratic(2)
        ref, ref_se = mc_sublevel_volume(L, 0.125, 10_000_000, seed=100)
        estimates = np.array(
            [mc_sublevel_volume(L, 0.125, 20_000, seed=101, stream_id=k)[0] for k in range(50)]
        )
        mean_se = np.sqrt(ref_se**2 + (estimates.std(ddof=1) / np.sqrt(50)) ** 2)
        assert abs(estimates.mean() - ref) <= 2 * mean_se


class TestVolumeCurve:
    def test_monotone_under_common_random_numbers(self):
        L = make_quadratic(2)
        curve = volume_curve(L, default_ladder(), 50_000, seed=4)
        assert np.all(np.diff(curve.volumes) <= 0)  # epsilons descending

    def test_matches_single_estimates_in_distribution(self):
        L = make_quadratic(2)
        curve = volume_curve(L, np.array([0.25]), 200_000, seed=5)
        assert abs(curve.volumes[0] - np.pi * 0.25) <= 3 * curve.standard_errors[0]


class TestFitScaling:
    def test_exact_synthetic_curve(self):
        # noiseless inverse problem: c=1, lambda=0.5, m=2
        eps = default_ladder()
        vols = eps**0.5 * (-np.log(eps)) ** 1
        curve = VolumeCurve(
            epsilons=eps, volumes=vols,
            standard_errors=1e-9 * vols, mc_samples=1, total_volume=4.0,
        )
        fit = fit_scaling(curve, multiplicity_mode="select_by_fit")
        assert fit.lam == pytest.approx(0.5, abs=1e-6)
        assert fit.multiplicity == 2
        assert fit.r_squared > 0.9999
        assert fit.log_c == pytest.approx(0.0, abs=1e-6)

    def test_quadratic_recovery(self):
        L = make_quadratic(2)
        curve = volume_curve(L, default_ladder(), 1_000_000, seed=6)
        fit = fit_scaling(curve)
        assert abs(fit.lam - 1.0) <= 0.05
        assert fit.multiplicity == 1

    def test_quartic_slab_recovery(self):
        L = make_normal_crossing(NormalCrossingSpec(dim=2, exponents=(2,), active_dims=(0,)))
        curve = volume_curve(L, default_ladder(), 1_000_000, seed=7)
        fit = fit_scaling(curve)
        assert abs(fit.lam - 0.25) <= 0.05
        assert fit.multiplicity == 1

    def test_mixed_exponent_recovery_on_engaged_window(self):
        # V(eps) = 4 eps^(1/4) - 2 sqrt(eps): the subleading term is still
        # ~25% of V at eps = 2^-4, so the fit window starts at 2^-6 and the
        # ladder is extended to keep two decades of usable points.
        L = make_normal_crossing(NormalCrossingSpec(dim=2, exponents=(1, 2)))
        curve = volume_curve(L, default_ladder(4, 14), 1_000_000, seed=8)
        fit = fit_scaling(curve, multiplicity_mode=1, max_epsilon=2.0**-6)
        assert abs(fit.lam - 0.25) <= 0.05

    def test_double_zero_recovery_with_log_factor(self):
        # half-width box keeps the subleading constant small over the window
        spec = NormalCrossingSpec(dim=2, exponents=(1, 1))
        L = make_normal_crossing(spec, Bounds.symmetric(2, 0.5))
        curve = volume_curve(L, default_ladder(4, 14), 1_000_000, seed=9)
        fit = fit_scaling(curve)
        assert fit.multiplicity == 2
        assert abs(fit.lam - 0.5) <= 0.05

    def test_window_error_when_too_few_points(self):
        L = make_quadratic(2)
        curve = volume_curve(L, np.array([0.2, 0.1, 0.05]), 1000, seed=10)
        with pytest.raises(FitWindowError):
            fit_scaling(curve)

    def test_saturated_points_excluded(self):
        L = make_quadratic(2)
        eps = np.array([4.0, 2.0, 0.25, 0.1, 0.05, 0.02, 0.01, 0.004, 0.002, 0.001])
        curve = volume_curve(L, eps, 400_000, seed=11)
        fit = fit_scaling(curve)
        assert fit.epsilon_window[1] <= 0.25
        assert abs(fit.lam - 1.0) <= 0.05
