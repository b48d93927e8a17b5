import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from siginvert.curves import closed_loop, holder_path, quarter_arc, smoothed_corner, wavy_monotone
from siginvert.errors import DegeneratePathError
from siginvert.path_model import (
    AnalyticPath,
    PiecewiseLinearPath,
    append_segment,
    epsilon_k,
    eta_k,
    increments,
    load_sampled_csv,
    modulus_of_continuity,
    uniformize_pl,
)

SMOOTH = {
    "arc": quarter_arc,
    "wavy": wavy_monotone,
    "corner": smoothed_corner,
    "loop": closed_loop,
    "holder": lambda: holder_path(0.7),
}

points = st.tuples(st.floats(-2, 2), st.floats(-2, 2))
polylines = st.lists(points, min_size=2, max_size=6).filter(
    lambda ps: sum(abs(a[0] - b[0]) + abs(a[1] - b[1]) for a, b in zip(ps, ps[1:])) > 1e-3
)


class TestUniformize:
    def test_segment(self, line34):
        assert line34.length == 7.0
        np.testing.assert_allclose(line34.position(0.5), [1.5, 2.0])

    def test_corner_at_half(self, l_path):
        assert l_path.length == 2.0
        np.testing.assert_allclose(l_path.position(0.5), [1.0, 0.0])

    def test_back_and_forth(self):
        p = uniformize_pl([[0, 0], [1, 0], [0, 0]])
        assert p.length == 2.0
        np.testing.assert_allclose(p.increment(), [0.0, 0.0])

    def test_degenerate(self):
        with pytest.raises(DegeneratePathError):
            uniformize_pl([[1, 1], [1, 1]])

    @settings(max_examples=50, deadline=None)
    @given(polylines)
    def test_constant_speed_and_vertex_times(self, pts):
        p = PiecewiseLinearPath(pts)
        t = np.linspace(0, 1, 257)
        speed = np.abs(p.derivative(t)).sum(axis=1)
        np.testing.assert_allclose(speed, p.length, rtol=1e-9)
        np.testing.assert_allclose(p.position(p.times), p.vertices, atol=1e-12)

    def test_aligned_increments_are_segments(self):
        p = PiecewiseLinearPath([[0, 0], [1, 0.5], [1.5, 1.5], [0.5, 2.0]])
        # equal l1 segment lengths put the vertices on the k-grid
        np.testing.assert_allclose(increments(p, 3).deltas, np.diff(p.vertices, axis=0), atol=1e-12)


class TestIncrements:
    def test_segment_halves(self, line34):
        inc = increments(line34, 2)
        np.testing.assert_allclose(inc.deltas[0], [1.5, 2.0])
        assert inc.r[0] == pytest.approx(3 / 7)

    def test_l_path(self, l_path):
        np.testing.assert_allclose(increments(l_path, 2).r, [1.0, 0.0])

    def test_zero_piece_gets_half(self):
        p = uniformize_pl([[0, 0], [1, 0], [0, 0]])
        assert increments(p, 1).r[0] == 0.5

    @pytest.mark.parametrize("name", sorted(SMOOTH))
    def test_table_invariants(self, name):
        p = SMOOTH[name]()
        for k in (1, 4, 7):
            inc = increments(p, k)
            assert np.all(inc.norms <= p.length / k * (1 + 1e-9))
            np.testing.assert_allclose(inc.r * inc.norms, np.abs(inc.dx), atol=1e-9)
            assert inc.norms.sum() <= p.length * (1 + 1e-9)

    @given(st.floats(0.05, 20))
    def test_r_scale_invariant(self, lam):
        p = wavy_monotone()
        np.testing.assert_allclose(increments(p.scaled(lam), 5).r, increments(p, 5).r, atol=1e-12)


class TestModulus:
    def test_line_is_zero(self, line34):
        assert all(modulus_of_continuity(line34, k).value == 0.0 for k in (1, 5, 50))

    def test_l_path_jump(self, l_path):
        for k in (2, 3, 10):
            m = modulus_of_continuity(l_path, k)
            assert m.exact and m.value == pytest.approx(2 * l_path.length)

    def test_lipschitz_bound(self):
        # the arc's velocity angle moves at most pi/sqrt(2) per unit time,
        # and the l1 velocity map is 2L-Lipschitz in the angle
        p = quarter_arc()
        lip = 2 * p.length * math.pi / math.sqrt(2) * 2
        for k in (4, 16, 64):
            m = modulus_of_continuity(p, k)
            assert m.value <= lip / k + 4 * lip * m.resolution

    @pytest.mark.parametrize("name", sorted(SMOOTH))
    def test_monotone_in_scale(self, name):
        p = SMOOTH[name]()
        vals = [modulus_of_continuity(p, k).value for k in (2, 4, 8, 16, 32)]
        assert all(b <= a + 1e-12 for a, b in zip(vals, vals[1:]))


class TestEpsilonEta:
    def test_epsilon_formula(self):
        assert epsilon_k(0.0, 1.0, 16) == pytest.approx(0.25)
        assert epsilon_k(1 / 9, 1.0, 9) == pytest.approx(2 / 3)

    def test_eta_floor(self, line34):
        assert eta_k(line34, 16) == pytest.approx(0.25)
        assert eta_k(line34, 16, floor=False) == 0.0

    def test_eta_is_dimensionless(self):
        p = wavy_monotone()
        assert eta_k(p.scaled(7.0), 8) == pytest.approx(eta_k(p, 8), rel=1e-9)

    @pytest.mark.parametrize("alpha", [0.5, 0.7, 1.0])
    def test_holder_trend(self, alpha):
        p = holder_path(alpha)
        ks = np.array([4, 8, 16, 32, 64])
        etas = [eta_k(p, int(k), floor=False) for k in ks]
        slope = np.polyfit(np.log(ks), np.log(etas), 1)[0]
        assert abs(slope + alpha**2 / 2) <= 0.2


class TestStandardLocationHalf:
    @pytest.mark.parametrize("name", sorted(SMOOTH))
    def test_both_halves(self, name):
        p = SMOOTH[name]()
        for k in (8, 16, 32):
            delta = modulus_of_continuity(p, k).value
            norms = increments(p, k).norms
            assert np.all(norms <= p.length / k * (1 + 1e-9))
            assert np.all(norms >= (p.length - delta) / k - 1e-12)


class TestTransforms:
    def test_reflection(self, l_path):
        r = l_path.reflected(0)
        np.testing.assert_allclose(r.vertices, l_path.vertices * [-1, 1])

    def test_analytic_scaling(self):
        p = quarter_arc()
        q = p.scaled(3.0)
        assert q.length == pytest.approx(6.0)
        np.testing.assert_allclose(q.position(0.3), 3 * p.position(0.3))

    def test_rejects_nonuniform_speed(self):
        with pytest.raises(ValueError):
            AnalyticPath(lambda t: np.stack([t**2, t], -1), lambda t: np.stack([2 * t, np.ones_like(t)], -1))

    def test_append_segment(self):
        p = append_segment(quarter_arc(), [1.0, 0.0])
        assert p.length == pytest.approx(3.0)
        np.testing.assert_allclose(p.position(1.0), [2.0, 1.0], atol=1e-12)
        speed = np.abs(p.derivative(np.linspace(0, 1, 101))).sum(axis=1)
        np.testing.assert_allclose(speed, 3.0, rtol=1e-9)


class TestCsv:
    def test_sampled_arc(self, tmp_path):
        t = np.linspace(0, 1, 401)
        theta = 0.5 * math.pi * t
        xy = np.stack([np.sin(theta), 1 - np.cos(theta)], axis=1)
        f = tmp_path / "arc.csv"
        rows = ["t,x,y"] + [f"{float(a)!r},{float(b)!r},{float(c)!r}" for a, (b, c) in zip(t, xy)]
        f.write_text("\n".join(rows) + "\n")
        p = load_sampled_csv(f)
        assert p.length == pytest.approx(2.0, rel=1e-6)
        np.testing.assert_allclose(p.position(1.0), [1.0, 1.0], atol=1e-9)
        speed = np.abs(p.derivative(np.linspace(0, 1, 97))).sum(axis=1)
        np.testing.assert_allclose(speed, p.length, rtol=1e-9)

    def test_rejects_irregular_grid(self, tmp_path):
        f = tmp_path / "bad.csv"
        f.write_text("t,x,y\n0,0,0\n0.1,1,0\n0.5,2,0\n")
        with pytest.raises(ValueError):
            load_sampled_csv(f)
