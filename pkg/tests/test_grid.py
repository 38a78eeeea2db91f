import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pickands.errors import ConfigError, GridOverflow
from pickands.grid import GridSpec, enumerate_points, subgrid_mask, window_points


class TestEnumerate:
    def test_three_point_line(self):
        pts = enumerate_points(GridSpec.box(1.0, 0.5))
        assert np.allclose(pts[:, 0], [0, 0.5, 1.0])

    def test_unit_square_corners(self):
        pts = enumerate_points(GridSpec.box(1.0, 1.0, d=2))
        assert pts.tolist() == [[0, 0], [0, 1], [1, 0], [1, 1]]

    def test_floor_rule(self):
        pts = enumerate_points(GridSpec.box(1.0, 0.3))
        assert np.allclose(pts[:, 0], [0, 0.3, 0.6, 0.9])

    def test_long_horizon_has_no_drift(self):
        g = GridSpec.box(1000.0, 0.1)
        pts = g.points()[:, 0]
        assert len(pts) == 10001
        assert pts[-1] == pytest.approx(1000.0, abs=1e-12)
        assert np.all(np.diff(pts) > 0)

    def test_cap(self):
        with pytest.raises(GridOverflow):
            GridSpec.box(10.0, 0.01, d=2, cap=1000).indices()

    @pytest.mark.parametrize("kw", [dict(delta=0.0, horizon=1.0), dict(delta=1.0), dict(delta=1.0, horizon=-1.0),
                                    dict(delta=1.0, horizon=1.0, radius=1.0)])
    def test_invalid(self, kw):
        with pytest.raises(ConfigError):
            GridSpec(d=1, **kw)

    def test_bad_dimension(self):
        with pytest.raises(ConfigError):
            GridSpec.box(1.0, 1.0, d=3)


class TestWindow:
    def test_examples(self):
        assert window_points(1, 1)[:, 0].tolist() == [-1, 0, 1]
        assert np.allclose(window_points(1, 0.5)[:, 0], [-1, -0.5, 0, 0.5, 1])
        assert len(window_points(1, 1, d=2)) == 9

    def test_rounds_down(self):
        assert window_points(1.05, 0.5)[:, 0].tolist() == [-1, -0.5, 0, 0.5, 1]

    def test_origin_index(self):
        g = GridSpec.window(3.0, 0.5, d=2)
        assert np.all(g.points()[g.origin_index()] == 0)
        assert GridSpec.box(1.0, 0.5, anchor=(0.25,)).origin_index() is None


class TestSubgrid:
    def test_nested_masks(self):
        g = GridSpec.window(4.0, 0.25)
        m2, m4 = subgrid_mask(g, 2), subgrid_mask(g, 4)
        assert np.all(m2[m4])
        assert np.allclose(g.points()[m4, 0], np.arange(-4, 5))

    def test_anchor_respected(self):
        g = GridSpec.box(2.0, 0.5, anchor=(-1.0,))
        assert np.allclose(g.points()[subgrid_mask(g, 2), 0], [-1, 0, 1])


@settings(max_examples=60, deadline=None)
@given(T=st.floats(0.1, 50), delta=st.floats(0.05, 5), d=st.sampled_from([1, 2]))
def test_count_formula(T, delta, d):
    g = GridSpec.box(T, delta, d=d)
    n = int(np.floor(T / delta + 1e-9)) + 1
    pts = g.points()
    assert len(pts) == n**d
    assert np.all(pts >= 0) and np.all(pts <= T + 1e-9 * max(1, T))
    assert len(np.unique(pts, axis=0)) == len(pts)
    assert np.all(np.lexsort(pts.T[::-1]) == np.arange(len(pts)))


@settings(max_examples=40, deadline=None)
@given(T=st.floats(0.5, 20), delta=st.floats(0.1, 2), c=st.floats(-10, 10))
def test_shift_matches_anchor(T, delta, c):
    g = GridSpec.box(T, delta)
    assert np.array_equal(g.points() + c, GridSpec.box(T, delta, anchor=(c,)).points())
    assert np.array_equal(g.shifted(c).points(), g.points() + c)
