import math

import numpy as np
import pytest

from siginvert.chain import BlockChain, common_scale
from siginvert.curves import quarter_arc, wavy_monotone
from siginvert.errors import CapacityError, DepthError
from siginvert.path_model import PiecewiseLinearPath
from siginvert.sources import (
    MAX_ENUMERATED_K,
    PathSource,
    SignatureSource,
    all_words,
    direction_windows,
    windowed_direction_mass,
    word_from_directions,
    words_for,
)
from siginvert.symmetrization import BlockSpec, integral_table
from siginvert.tensor_algebra import Word, signature_of_pl_path


def as_float(arr):
    return arr.values * math.exp(arr.logscale)


def assert_summaries_close(a, b, rtol):
    for name in ("totals", "marginals", "var_x", "var_y"):
        x, y = getattr(a, name), getattr(b, name)
        top = max(x.logscale, y.logscale)
        xv = x.values * math.exp(x.logscale - top)
        yv = y.values * math.exp(y.logscale - top)
        scale = np.max(np.abs(yv))
        np.testing.assert_allclose(xv, yv, rtol=0, atol=rtol * scale, err_msg=name)


class NestedOnly(PathSource):
    def _use_chain(self, k, n):
        return False


class TestHelpers:
    def test_all_words(self):
        assert [str(w) for w in all_words(3)] == ["xx", "xy", "yx", "yy"]
        assert all_words(1) == [Word()]

    def test_word_rule(self):
        assert str(word_from_directions([0.9, 0.1, 0.5])) == "xy"
        assert str(word_from_directions([0.5, 0.5, 0.5])) == "xx"
        assert word_from_directions([0.3]) == Word()

    def test_windows(self):
        m = direction_windows([0.5, 0.0], 0.1, 10)
        assert m[0].tolist() == [abs(l / 10 - 0.5) < 0.2 for l in range(11)]
        assert m[1, :2].all() and not m[1, 2:].any()

    def test_words_for_large_k(self):
        src = PathSource(wavy_monotone())
        k = MAX_ENUMERATED_K + 2
        assert len(words_for(src, 5)) == 16
        (w,) = words_for(src, k)
        assert len(w) == k - 1
        sig_src = SignatureSource(signature_of_pl_path([[0, 0], [1, 1]], 2))
        with pytest.raises(CapacityError):
            words_for(sig_src, k)


class TestChain:
    @pytest.mark.parametrize("k,n", [(2, 4), (3, 4), (4, 3)])
    def test_matches_nested_rule(self, k, n):
        path = quarter_arc()
        words = all_words(k)
        chain = PathSource(path).summary(k, n, words)
        nested = NestedOnly(path).summary(k, n, words)
        assert_summaries_close(chain, nested, 1e-7)

    def test_box_matches_nested_rule(self):
        path = wavy_monotone()
        k, n = 3, 4
        masks = direction_windows([0.6, 0.5, 0.4], 0.1, n)
        a = PathSource(path).box_sums(k, n, all_words(k), masks)
        b = NestedOnly(path).box_sums(k, n, all_words(k), masks)
        np.testing.assert_allclose(as_float(a), as_float(b), rtol=1e-7)

    def test_totals_match_integral_table(self):
        path = quarter_arc()
        k, n = 3, 3
        chain = BlockChain(path, k, n, np.linspace(0, 1, 33)[1:-1], 16)
        (vals, logs), *_ = chain.summary(all_words(k))
        for a, w in enumerate(all_words(k)):
            t = integral_table(path, BlockSpec(k, n, w))
            want = math.fsum(t.values.ravel()) * math.exp(t.logscale - logs[a])
            assert vals[a] == pytest.approx(want, rel=1e-8)

    def test_common_scale(self):
        vals, scale = common_scale(np.array([1.0, -2.0, 0.0]), np.array([0.0, 3.0, -np.inf]))
        np.testing.assert_allclose(vals * math.exp(scale), [1.0, -2.0 * math.exp(3.0), 0.0])
        zero, s = common_scale(np.zeros(2), np.zeros(2))
        assert s == -math.inf and not zero.any()


class TestSignatureVersusPath:
    @pytest.mark.parametrize("k,n", [(1, 3), (2, 2), (3, 1)])
    def test_summaries_agree(self, k, n):
        verts = np.array([[0, 0], [1.0, 0.4], [1.3, 1.5], [2.2, 1.9]])
        sig = signature_of_pl_path(verts, 2 * n * k + k)
        words = all_words(k)
        a = SignatureSource(sig).summary(k, n, words)
        b = PathSource(PiecewiseLinearPath(verts)).summary(k, n, words)
        assert_summaries_close(a, b, 1e-9)

    def test_box_sums_agree(self):
        verts = np.array([[0, 0], [0.7, 0.2], [1.1, 1.4]])
        k, n = 2, 3
        sig = signature_of_pl_path(verts, 2 * n * k + k)
        masks = direction_windows([0.7, 0.3], 0.15, n)
        a = SignatureSource(sig).box_sums(k, n, all_words(k), masks)
        b = PathSource(PiecewiseLinearPath(verts)).box_sums(k, n, all_words(k), masks)
        np.testing.assert_allclose(as_float(a), as_float(b), rtol=1e-9)

    def test_depth_limits(self):
        src = SignatureSource(signature_of_pl_path([[0, 0], [1, 1]], 9))
        assert src.max_n(2) == 1
        with pytest.raises(DepthError):
            src.summary(2, 2, all_words(2))

    def test_scale_proxy(self):
        seg = SignatureSource(signature_of_pl_path([[0, 0], [3, 4]], 2))
        assert seg.scale_proxy() == pytest.approx(7.0)


class TestWindowedMass:
    def test_diagonal_line_concentrates(self):
        src = PathSource(PiecewiseLinearPath([[0, 0], [1, 1]]))
        num, den = windowed_direction_mass(src, 2, 20, [0.5, 0.5], 0.1)
        assert math.exp(num.logmag - den.logmag) >= 0.9

    def test_wrong_centre_loses_mass(self):
        src = PathSource(PiecewiseLinearPath([[0, 0], [1, 1]]))
        num, den = windowed_direction_mass(src, 2, 20, [0.0, 0.0], 0.05)
        assert num.sign == 0 or math.exp(num.logmag - den.logmag) < 0.5

    def test_full_window_is_exact(self):
        src = PathSource(quarter_arc())
        num, den = windowed_direction_mass(src, 2, 6, [0.5, 0.5], 0.6)
        assert num == den

    def test_rejects_bad_rho(self):
        with pytest.raises(ValueError):
            windowed_direction_mass(PathSource(quarter_arc()), 2, 4, [1.2, 0.0], 0.1)
