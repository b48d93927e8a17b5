import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from siginvert.errors import CapacityError, DepthError, ShapeError
from siginvert.tensor_algebra import (
    TruncatedSignature,
    Word,
    chen_concat,
    coefficient,
    signature_of_pl_path,
    signature_of_segment,
)

coords = st.floats(-3, 3, allow_nan=False, allow_infinity=False)
vectors = st.tuples(coords, coords).map(np.array)
polylines = st.lists(vectors, min_size=1, max_size=5)


def close(a, b, rtol=1e-12, atol=1e-14):
    np.testing.assert_allclose(np.asarray(a, float), np.asarray(b, float), rtol=rtol, atol=atol)


class TestWord:
    def test_parse_and_str(self):
        w = Word.parse("xyyx")
        assert w.letters == (0, 1, 1, 0)
        assert str(w) == "xyyx"
        assert len(Word()) == 0

    def test_index_roundtrip(self):
        for length in range(5):
            for idx in range(2**length):
                assert Word.from_index(idx, length, 2).index(2) == idx

    def test_first_letter_is_most_significant(self):
        assert Word.parse("yx").index(2) == 2
        assert Word.parse("xy").index(2) == 1

    def test_counts(self):
        w = Word.parse("xxyxy")
        assert w.count(0) == 3 and w.count(1) == 2

    def test_rejects_unknown_letters(self):
        with pytest.raises(ValueError):
            Word.parse("xq")


class TestSegment:
    def test_single_letter_exponential(self):
        sig = signature_of_segment([2.5, 0.0], 6)
        for n in range(7):
            assert coefficient(sig, Word((0,) * n)) == pytest.approx(2.5**n / math.factorial(n), rel=1e-14)
        assert coefficient(sig, "xyx") == 0.0

    def test_unit_diagonal(self):
        sig = signature_of_segment([1.0, 1.0], 6)
        for n in range(7):
            close(sig.level(n), np.full(2**n, 1.0 / math.factorial(n)))

    def test_two_one(self):
        sig = signature_of_segment([2.0, 1.0], 3)
        assert coefficient(sig, "xy") == pytest.approx(1.0)
        assert coefficient(sig, "yx") == pytest.approx(1.0)

    def test_exact_mode_is_rational(self):
        sig = signature_of_segment([0.5, -0.25], 4, exact=True)
        assert sig.exact
        assert sig.level(3)[Word.parse("xxy").index(2)] == Fraction(1, 2) ** 2 * Fraction(-1, 4) / 6

    def test_capacity(self):
        with pytest.raises(CapacityError):
            signature_of_segment([1.0, 1.0], 12, max_entries=2**10)

    @given(vectors, st.integers(0, 6))
    def test_closed_form(self, v, depth):
        sig = signature_of_segment(v, depth)
        for n in range(depth + 1):
            for idx in range(2**n):
                w = Word.from_index(idx, n, 2)
                want = math.prod(v[a] for a in w.letters) / math.factorial(n)
                assert sig.level(n)[idx] == pytest.approx(want, rel=1e-12, abs=1e-300)


class TestChen:
    def test_exp_x_exp_y(self):
        sig = chen_concat(signature_of_segment([1, 0], 4), signature_of_segment([0, 1], 4))
        assert coefficient(sig, "x") == 1.0 and coefficient(sig, "y") == 1.0
        assert coefficient(sig, "xy") == pytest.approx(1.0)
        assert coefficient(sig, "yx") == 0.0

    def test_identity(self, rng):
        a = signature_of_pl_path(rng.uniform(-1, 1, (4, 2)), 5)
        e = TruncatedSignature.identity(2, 5)
        for lhs, rhs in ((chen_concat(a, e), a), (chen_concat(e, a), a)):
            for n in range(6):
                close(lhs.level(n), rhs.level(n))

    def test_xxxyy(self):
        sig = chen_concat(signature_of_segment([1, 0], 5), signature_of_segment([0, 1], 5))
        assert coefficient(sig, "xxxyy") == pytest.approx(1.0 / 12.0, rel=1e-14)

    def test_shape_mismatch(self):
        with pytest.raises(ShapeError):
            chen_concat(signature_of_segment([1, 0], 3), signature_of_segment([1, 0], 4))

    @settings(max_examples=40, deadline=None)
    @given(vectors, vectors, vectors)
    def test_associative(self, u, v, w):
        a, b, c = (signature_of_segment(x, 6) for x in (u, v, w))
        left = chen_concat(a, chen_concat(b, c))
        right = chen_concat(chen_concat(a, b), c)
        for n in range(7):
            scale = max(1.0, float(np.abs(right.level(n)).max()))
            np.testing.assert_allclose(left.level(n), right.level(n), rtol=1e-12, atol=1e-12 * scale)


class TestPolyline:
    def test_l_path_is_product(self, l_path):
        sig = signature_of_pl_path(l_path.vertices, 5)
        want = chen_concat(signature_of_segment([1, 0], 5), signature_of_segment([0, 1], 5))
        for n in range(6):
            close(sig.level(n), want.level(n))

    def test_collinear_midpoint(self):
        a = signature_of_pl_path([[0, 0], [0.5, 0], [1, 0]], 6)
        b = signature_of_segment([1, 0], 6)
        for n in range(7):
            close(a.level(n), b.level(n))

    def test_signed_area(self, l_path):
        sig = signature_of_pl_path(l_path.vertices, 2)
        assert (coefficient(sig, "xy") - coefficient(sig, "yx")) / 2 == pytest.approx(0.5)

    def test_single_vertex_is_trivial(self):
        sig = signature_of_pl_path([[0.3, 0.4]], 3)
        assert sig.level(0)[0] == 1.0
        assert all(not sig.level(n).any() for n in range(1, 4))

    def test_out_of_depth(self):
        sig = signature_of_segment([1, 1], 3)
        with pytest.raises(DepthError):
            coefficient(sig, "xyxy")

    def test_empty_word(self, l_path):
        assert coefficient(signature_of_pl_path(l_path.vertices, 2), Word()) == 1.0

    @settings(max_examples=40, deadline=None)
    @given(polylines)
    def test_level_one_is_displacement(self, pts):
        sig = signature_of_pl_path(pts, 2)
        close(sig.level(1), pts[-1] - pts[0], rtol=1e-12, atol=1e-12)

    @settings(max_examples=40, deadline=None)
    @given(polylines)
    def test_level_two_shuffle(self, pts):
        sig = signature_of_pl_path(pts, 2)
        x1, t2 = sig.level(1), sig.tensor(2)
        scale = max(1.0, float(np.abs(t2).max()))
        np.testing.assert_allclose(t2 + t2.T, np.outer(x1, x1), rtol=1e-10, atol=1e-12 * scale)

    @settings(max_examples=30, deadline=None)
    @given(polylines, st.floats(0.1, 10))
    def test_scaling(self, pts, lam):
        a = signature_of_pl_path(pts, 5)
        b = signature_of_pl_path([lam * p for p in pts], 5)
        # cancellation noise is relative to the l1 length, not to the result
        length = lam * sum(float(np.abs(q - p).sum()) for p, q in zip(pts, pts[1:]))
        for n in range(6):
            scale = max(1.0, length) ** n
            np.testing.assert_allclose(b.level(n), lam**n * a.level(n), rtol=1e-12, atol=1e-13 * scale)

    def test_exact_matches_float(self, rng):
        pts = rng.uniform(-1, 1, (4, 2))
        exact = signature_of_pl_path(pts, 5, exact=True)
        double = signature_of_pl_path(pts, 5)
        for n in range(6):
            close(np.asarray(exact.level(n), dtype=float), double.level(n), rtol=1e-10, atol=1e-13)


class TestJson:
    def test_roundtrip(self, l_path):
        sig = signature_of_pl_path(l_path.vertices, 4)
        back = TruncatedSignature.from_json_dict(sig.to_json_dict())
        assert back.depth == 4 and back.dim == 2
        for n in range(5):
            close(back.level(n), sig.level(n), rtol=0, atol=0)

    def test_bad_level_size(self):
        with pytest.raises(ShapeError):
            TruncatedSignature(2, 1, (np.ones(1), np.ones(3)))
