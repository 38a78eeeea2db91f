import math

import numpy as np
import pytest

from pickands import gaussian as gs
from pickands import oracle
from pickands.errors import ConfigError, SpawnCapExceeded
from pickands.grid import GridSpec
from pickands.kernels import GaussianDensity, IndicatorUnit
from pickands.maxstable import (cdf_estimate, extremal_index, fidi_cdf, frechet_ks, max_stability_check,
                                resolve_stopping, simulate_Y, tilt_identity_check, trace_Y)
from pickands.spectral import KernelField, LogGaussian

KS_1PCT = 1.63  # asymptotic 1% critical value of sqrt(n) * KS


def near(value, ref, se, k=3.0):
    return abs(value - ref) <= k * se


class TestMargins:
    def test_kernel_single_point_frechet(self):
        ys = simulate_Y(KernelField(GaussianDensity()), np.array([0.0]), 20000, 1)
        assert ys.stopping == "exact_kernel"
        assert frechet_ks(ys) < KS_1PCT / math.sqrt(20000)
        p, se = cdf_estimate(ys, 1.0)
        assert near(p, math.exp(-1), se)

    def test_log_gaussian_box_margins(self):
        g = GridSpec.box(2.0, 0.5)
        ys = simulate_Y(LogGaussian(gs.FBM(0.5, 2.0)), g, 10000, 2)
        assert ys.stopping == "exact_normalized"
        assert ys.residual_bias_bound == 0.0
        for col in range(g.size):
            p, se = cdf_estimate(ys, 2.0, [col])
            assert near(p, math.exp(-0.5), se, k=3.5)

    def test_threshold_mode(self):
        pts = np.array([0.0, 0.7, 1.3])
        ys = simulate_Y(LogGaussian(gs.FBM(0.5, 2.0)), pts, 5000, 3, stopping="threshold")
        assert ys.stopping == "threshold"
        assert ys.residual_bias_bound < 0.01
        assert frechet_ks(ys, 1) < KS_1PCT / math.sqrt(5000) + ys.residual_bias_bound

    def test_indicator_grid_frechet(self):
        g = GridSpec.box(3.0, 1.0)
        ys = simulate_Y(KernelField(IndicatorUnit()), g, 10000, 4)
        assert ys.residual_bias_bound == 0.0
        assert frechet_ks(ys, 2) < KS_1PCT / math.sqrt(10000)


class TestRepresentation:
    def test_arrivals_and_running_max(self):
        gam, Y = trace_Y(LogGaussian(gs.FBM(0.5)), np.array([0.0, 1.0]), 10_000, 5)
        assert np.all(np.diff(gam) > 0)
        assert np.all(np.diff(Y, axis=0) >= 0)
        # the n-th arrival of a unit-rate process is about n
        assert abs(gam[-1] / 10_000 - 1) < 4 / math.sqrt(10_000)

    def test_max_stability(self):
        ys = simulate_Y(KernelField(GaussianDensity()), np.array([0.0]), 20000, 6)
        for m in (2.0, 3.0):
            out = max_stability_check(ys, m, 1.5)
            assert abs(out["z"]) < 3
        assert abs(max_stability_check(ys, 3.0, 2.0)["z"]) < 3

    def test_frechet_ks_large_sample(self):
        ys = simulate_Y(KernelField(GaussianDensity()), np.array([0.0]), 100_000, 11)
        assert ys.residual_bias_bound < 1e-6
        assert frechet_ks(ys) <= 0.01

    def test_fidi_threshold_removal(self):
        spec = LogGaussian(gs.Linear(1.0))
        p2, se2 = fidi_cdf(spec, np.array([0.0, 1.0]), [1e6, 1.0], 20000, 12)
        assert near(p2, math.exp(-1), se2)

    def test_fidi_two_point_closed_form(self):
        p, se = fidi_cdf(LogGaussian(gs.Linear(1.0)), np.array([0.0, 1.0]), 1.0, 200000, 7)
        assert near(p, oracle.lognormal_two_point_cdf(1.0, 1.0), se)

    def test_simulation_matches_fidi(self):
        spec = KernelField(IndicatorUnit())
        pts = np.array([0.0, 0.5])
        ys = simulate_Y(spec, pts, 20000, 8)
        p_sim, se_sim = cdf_estimate(ys, 1.0)
        p_fidi, se_fidi = fidi_cdf(spec, pts, 1.0, 20000, 9)
        # Y(0) <= 1 and Y(1/2) <= 1 has probability exp(-3/2) for the unit indicator
        assert near(p_fidi, math.exp(-1.5), se_fidi)
        assert near(p_sim, p_fidi, math.hypot(se_sim, se_fidi))

    def test_deterministic_across_workers(self):
        spec = LogGaussian(gs.FBM(0.5))
        g = GridSpec.box(1.0, 0.5)
        a = simulate_Y(spec, g, 600, 3, block=100, workers=1)
        b = simulate_Y(spec, g, 600, 3, block=100, workers=3)
        assert np.array_equal(a.Y, b.Y)
        assert np.array_equal(a.spawn_count, b.spawn_count)


class TestStoppingRules:
    def test_auto_resolution(self):
        assert resolve_stopping(KernelField(), GridSpec.box(1, 1), "auto") == "exact_kernel"
        assert resolve_stopping(LogGaussian(gs.FBM(0.5)), GridSpec.box(1, 1), "auto") == "exact_normalized"
        assert resolve_stopping(LogGaussian(gs.FBM(0.5)), np.array([0.0]), "auto") == "threshold"

    def test_spawn_cap(self):
        with pytest.raises(SpawnCapExceeded) as err:
            simulate_Y(LogGaussian(gs.FBM(0.5)), GridSpec.box(4.0, 0.5), 50, 1, max_spawn=2)
        sample = err.value.sample
        assert sample.meta["capped"] > 0
        flagged = simulate_Y(LogGaussian(gs.FBM(0.5)), GridSpec.box(4.0, 0.5), 50, 1, max_spawn=2,
                             on_cap="flag")
        assert flagged.residual_bias_bound > 0

    def test_bad_modes(self):
        with pytest.raises(ConfigError):
            simulate_Y(LogGaussian(gs.FBM(0.5)), GridSpec.box(1, 1), 10, stopping="exact_kernel")
        with pytest.raises(ConfigError):
            simulate_Y(KernelField(), GridSpec.box(1, 1), 10, stopping="exact_normalized")
        with pytest.raises(ConfigError):
            fidi_cdf(KernelField(), np.array([0.0]), 1.0, 999)


class TestExtremalIndex:
    def test_indicator_unit_lattice(self):
        out = extremal_index(KernelField(IndicatorUnit()), 1.0, 10.0, 20000, 1, estimator="direct")
        # on the unit lattice the indicator constant equals coverage / T
        assert near(out["theta"], 1.1, out["theta_stderr"])
        assert out["identity_gap"] <= 3 * out["gap_stderr"]

    def test_hurst1_identity(self):
        out = extremal_index(LogGaussian(gs.Linear(math.sqrt(2))), 0.5, 5.0, 20000, 2)
        assert out["identity_gap"] <= 3 * out["gap_stderr"]
        assert near(out["H"], oracle.hurst1_discrete(math.sqrt(2), 0.5), out["H_stderr"], k=4)
        assert 0 < out["theta"] <= 1

    def test_needs_lattice(self):
        with pytest.raises(ConfigError):
            extremal_index(KernelField(), 0.0, 1.0, 100)


class TestTilt:
    def test_point_ratio_closed_form(self):
        out = tilt_identity_check(LogGaussian(gs.Linear(0.5)), 1.0, reps=200000, seed=1)
        assert abs(out["z"]) < 3
        assert near(out["rhs"], oracle.tilt_point_ratio(0.5, 1.0, 1.0), out["rhs_stderr"])

    def test_sup_sum_fbm(self):
        out = tilt_identity_check(LogGaussian(gs.FBM(0.5, 2.0)), 0.5, "sup_sum", reps=20000, seed=2, R=3,
                                  mesh=0.1)
        assert abs(out["z"]) < 3

    def test_sup_sum_gaussian_kernel(self):
        out = tilt_identity_check(KernelField(GaussianDensity()), 0.5, "sup_sum", reps=20000, seed=4, R=5, mesh=0.05)
        assert abs(out["z"]) <= 4

    def test_zero_shift_is_exact(self):
        out = tilt_identity_check(LogGaussian(gs.FBM(0.5)), 0.0, "sup_sum", reps=500, seed=3, R=2, mesh=0.1)
        assert out["lhs"] == out["rhs"] and out["z"] == 0.0

    def test_mesh_mismatch(self):
        with pytest.raises(ConfigError):
            tilt_identity_check(LogGaussian(gs.FBM(0.5)), 0.33, "sup_sum", reps=100, mesh=0.1)
