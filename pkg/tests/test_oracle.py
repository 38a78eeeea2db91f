import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pickands import oracle
from pickands.errors import ConfigError
from pickands.kernel_quad import indicator_coverage
from pickands.kernels import IndicatorUnit


class TestClosedForms:
    def test_hurst1(self):
        assert oracle.hurst1_closed_form(math.sqrt(2)) == pytest.approx(1 / math.sqrt(math.pi), rel=1e-15)
        with pytest.raises(ConfigError):
            oracle.hurst1_closed_form(0.0)

    @pytest.mark.parametrize("delta, ref", [(0.5, 0.39483), (0.125, 0.39868), (0.01, 0.3989406)])
    def test_hurst1_lattice_values(self, delta, ref):
        assert oracle.hurst1_discrete(1.0, delta) == pytest.approx(ref, abs=1e-5)

    def test_hurst1_lattice_monotone_in_mesh(self):
        vals = [oracle.hurst1_discrete(1.0, d) for d in (2.0, 1.0, 0.5, 0.25, 0.1)]
        assert np.all(np.diff(vals) > 0)
        assert vals[-1] < oracle.hurst1_closed_form(1.0)

    def test_hurst1_lattice_scaling(self):
        # only c * delta enters, up to the 1/delta prefactor
        assert oracle.hurst1_discrete(2.0, 0.25) == pytest.approx(2 * oracle.hurst1_discrete(1.0, 0.5), rel=1e-10)

    @pytest.mark.parametrize("delta, ref", [(1.0, 0.4430), (0.5, 0.5604), (0.25, 0.6632), (0.125, 0.7476),
                                            (0.0625, 0.8140), (0.01, 0.9209)])
    def test_brownian_lattice_values(self, delta, ref):
        assert oracle.brownian_discrete(delta) == pytest.approx(ref, abs=1e-4)

    def test_family_and_tilt(self):
        phi0 = 1 / math.sqrt(2 * math.pi)
        assert oracle.family_linear([1, 1]) == pytest.approx(1.5 * phi0)
        assert oracle.family_linear([0, 1], 2.0) == pytest.approx(phi0)
        assert oracle.tilt_point_ratio(1, 1, 1) == pytest.approx(math.e)
        assert oracle.lognormal_two_point_cdf(1, 1) == pytest.approx(0.2508438, abs=1e-7)
        assert oracle.gaussian_kernel_constant(40) == pytest.approx(phi0 + 0.025)


class TestCoverage:
    @pytest.mark.parametrize("delta, T, ref", [(0.5, 10, 11), (2, 10, 6), (1, 0, 1), (0, 7, 8), (3, 10, 4)])
    def test_values(self, delta, T, ref):
        assert oracle.kernel_coverage_measure(delta, T) == pytest.approx(ref)

    @settings(max_examples=200, deadline=None)
    @given(delta=st.floats(0.05, 4.0), T=st.floats(0.0, 30.0))
    def test_union_matches_formula(self, delta, T):
        assert oracle.kernel_coverage_measure(delta, T) == pytest.approx(indicator_coverage(delta, T), abs=1e-9)


class TestDense:
    def test_dense_linear_matches_lattice_quadrature(self):
        c = math.sqrt(2)
        ref = oracle.dense_mc_reference("linear", 20000, seed=1, c=c, R=6.0, h=0.25, delta=0.25, eta=0.25)
        assert ref.method == "dense_cholesky_mc"
        assert abs(ref.reference_value - oracle.hurst1_discrete(c, 0.25)) <= 4 * ref.stderr

    def test_dense_brownian_matches_lattice_formula(self):
        ref = oracle.dense_mc_reference("fbm", 20000, seed=2, alpha=0.5, scale=2.0, R=12.0, h=0.5,
                                        delta=0.5, eta=0.5)
        assert abs(ref.reference_value - oracle.brownian_discrete(0.5)) <= 4 * ref.stderr

    def test_dense_kernel_direct(self):
        ref = oracle.dense_mc_reference("kernel", 20000, seed=3, kernel=IndicatorUnit(), T=10.0, delta=0.5)
        assert abs(ref.reference_value - 1.1) <= 4 * ref.stderr

    def test_limits(self):
        with pytest.raises(ConfigError):
            oracle.dense_mc_reference("fbm", 10, R=3000.0, h=0.5)
        with pytest.raises(ConfigError):
            oracle.dense_mc_reference("nope", 10)


class TestReport:
    def test_agrees(self):
        r = oracle.OracleReport("x", 1.0, "closed_form", 0.01, 0.1)
        assert r.agrees(1.2, 0.0)
        assert not r.agrees(1.4, 0.0)
        assert oracle.OracleReport("y", 1.0, "closed_form", 0.01).agrees(1.005)

    def test_derived_table(self):
        table = {r.name: r for r in oracle.derived_references()}
        for name, r in table.items():
            if name.startswith("fubini"):
                assert r.agrees(1.0), name
        assert table["indicator_dy_eta1"].agrees(1.0)
        assert table["coverage_d2_T10"].reference_value == 6.0
