import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pickands import gaussian as gs
from pickands.errors import ConfigError, EmbeddingNotPSD, NotPSD
from pickands.grid import GridSpec
from pickands.streams import derive


def _z(a, b):
    """Two-sample z-scores per column for means."""
    n = len(a)
    return (a.mean(0) - b.mean(0)) / np.sqrt((a.var(0, ddof=1) + b.var(0, ddof=1)) / n)


class TestVariance:
    def test_fbm_values(self):
        vf = gs.FBM(0.5, 2.0)
        assert np.allclose(vf(np.array([[0.0], [1.0], [-3.0]])), [0, 2, 6])
        assert gs.variance_at(vf, 4.0) == pytest.approx(8.0)

    def test_linear_covariance_is_rank_one(self):
        pts = np.linspace(-2, 2, 9)[:, None]
        C = gs.covariance_matrix(gs.Linear(1.5), pts)
        assert np.allclose(C, 2.25 * pts @ pts.T)

    def test_brownian_covariance(self):
        assert gs.covariance(gs.FBM(0.5), 1.0, 3.0) == pytest.approx(1.0)
        assert gs.covariance(gs.FBM(0.5), -1.0, 3.0) == pytest.approx(0.0)

    @pytest.mark.parametrize("alpha", [0.0, 1.2])
    def test_bad_hurst(self, alpha):
        with pytest.raises(ConfigError):
            gs.FBM(alpha)

    def test_sum_growth(self):
        g = gs.Sum(gs.FBM(0.25), gs.Linear(1.0)).growth()
        assert (g.nu0, g.nuinf) == (0.5, 2.0)

    def test_scaled(self):
        vf = gs.Scaled(gs.Linear(1.0), 3.0)
        assert vf(np.array([[2.0]]))[0] == pytest.approx(36.0)
        assert gs.Scaled(gs.Linear(1.0), 0.0).is_zero

    def test_norm_sphere_needs_symmetry_in_1d(self):
        gs.NormSphere(1.0, lambda u: np.ones(len(u)))
        with pytest.raises(ConfigError):
            gs.NormSphere(1.0, lambda u: 1.0 + u[:, 0])

    def test_positivity_hint(self):
        assert gs.log_growth_rate(gs.FBM(0.5)) > 8
        assert gs.log_growth_rate(gs.FBM(0.05)) < 8


class TestCirculant:
    @pytest.mark.parametrize("alpha", [0.25, 0.5, 0.75, 1.0])
    def test_embedding_is_psd(self, alpha):
        gs._embedding_sqrt(gs.FBM(alpha), 0.1, 256)

    def test_embedding_failure_is_reported(self):
        class Bad(gs.FBM):
            def __call__(self, t):
                r = np.linalg.norm(gs._as_points(t), axis=-1)
                return np.where(r > 0, 1.0 + 0 * r, 0.0) * (1 + np.cos(50 * r))

        with pytest.raises(EmbeddingNotPSD):
            gs._embedding_sqrt(Bad(0.5), 0.1, 64)

    def test_paths_start_at_zero(self):
        x = gs.sample_paths(gs.FBM(0.7), GridSpec.box(5.0, 0.05), derive(0, 0), 50, method="circulant")
        assert np.all(x[:, 0] == 0)

    def test_window_contains_exact_zero(self):
        g = GridSpec.window(2.0, 0.1)
        x = gs.sample_paths(gs.FBM(0.5), g, derive(0, 0), 20)
        assert np.all(x[:, g.origin_index()] == 0)

    @pytest.mark.parametrize("alpha", [0.3, 0.5, 0.75])
    def test_increment_variance(self, alpha):
        g = GridSpec.box(12.7, 0.1)
        x = gs.sample_paths(gs.FBM(alpha), g, derive(1, 0), 20000, method="circulant")
        inc = np.diff(x, axis=1)
        v = inc.var(axis=0).mean()
        assert v == pytest.approx(0.1 ** (2 * alpha), rel=0.02)


class TestDense:
    def test_zero_variance_points_are_exactly_zero(self):
        pts = np.array([[0.0], [0.5], [1.0]])
        x = gs.dense_paths(gs.FBM(0.5), pts, derive(0, 0), 10)
        assert np.all(x[:, 0] == 0)

    def test_not_psd(self):
        class Bad(gs.FBM):
            def __call__(self, t):
                r = np.linalg.norm(gs._as_points(t), axis=-1)
                return r**4

        pts = np.linspace(0.1, 3, 12)[:, None]
        with pytest.raises(NotPSD):
            gs.dense_paths(Bad(0.5), pts, derive(0, 0), 2)

    def test_two_dimensional_variance(self):
        g = GridSpec.box(1.0, 0.25, d=2)
        x = gs.sample_paths(gs.FBM(0.5), g, derive(2, 0), 20000)
        target = g.points()
        assert np.allclose(x.var(axis=0), np.linalg.norm(target, axis=1), atol=0.05)

    def test_cholesky_and_circulant_agree(self):
        g = GridSpec.box(255 / 32, 1 / 32)
        a = gs.sample_paths(gs.FBM(0.6), g, derive(3, 0), 10000, method="circulant")
        b = gs.sample_paths(gs.FBM(0.6), g, derive(3, 1), 10000, method="cholesky")
        assert np.max(np.abs(_z(a[:, 1:], b[:, 1:]))) < 4.5


class TestStationary:
    def test_cosine_is_periodic(self):
        cov = gs.CosineCovariance(1.0, 5.0)
        pts = np.array([[0.3], [5.3], [10.3]])
        x = cov.sample(pts, derive(0, 0), 5)
        assert np.allclose(x[:, 0], x[:, 1]) and np.allclose(x[:, 0], x[:, 2])

    def test_exponential_variance(self):
        cov = gs.ExponentialCovariance(2.0, 1.0)
        x = cov.sample(np.linspace(0, 3, 7)[:, None], derive(0, 0), 20000)
        assert np.allclose(x.var(axis=0), 4.0, rtol=0.05)


@settings(max_examples=25, deadline=None)
@given(alpha=st.floats(0.05, 1.0), scale=st.floats(0.1, 5.0))
def test_fbm_growth_is_valid(alpha, scale):
    vf = gs.FBM(alpha, scale)
    assert gs.check_growth(vf).valid()
    pts = np.linspace(-3, 3, 13)[:, None]
    C = gs.covariance_matrix(vf, pts)
    assert np.linalg.eigvalsh(C).min() > -1e-8 * np.trace(C)
