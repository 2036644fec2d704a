"""Truncation semantics of the fixed-point layer.

The error-interval checks here are the ground the solver analysis stands on:
truncated products err in (-2**-b, 0], additions are exact or overflow, and a
length-n dot product errs in [-n * 2**-b, 0].
"""

from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fixmpc.errors import DimensionError, RangeError
from fixmpc.fxp import (
    FxFormat,
    FxMatrix,
    FxValue,
    FxVector,
    fx_add,
    fx_dot,
    fx_mul_trunc,
    fx_sub,
    matvec_trunc,
    quantize,
    vec_clip,
    vec_scale_trunc,
    vec_shift_left,
    vec_shift_right_exact,
)

Q2_4 = FxFormat(integer_bits=2, fraction_bits=4)


class TestFormat:
    def test_range(self):
        assert Q2_4.real_min == -2.0
        assert Q2_4.real_max == 2.0 - 2.0**-4
        assert Q2_4.raw_min == -32
        assert Q2_4.raw_max == 31

    def test_width_limit(self):
        with pytest.raises(RangeError):
            FxFormat(integer_bits=40, fraction_bits=40)
        with pytest.raises(RangeError):
            FxFormat(integer_bits=0, fraction_bits=4)


class TestQuantize:
    def test_exact(self):
        assert quantize(0.25, Q2_4, "truncate").raw == 4

    def test_truncate_negative_floors(self):
        assert quantize(-0.3, Q2_4, "truncate").raw == -5  # -0.3125

    def test_truncate_positive_floors(self):
        assert quantize(0.3, Q2_4, "truncate").raw == 4  # 0.25

    def test_nearest_half_away(self):
        b8 = FxFormat(4, 8)
        assert quantize(1.5 * 2**-8, b8, "nearest").raw == 2
        assert quantize(-1.5 * 2**-8, b8, "nearest").raw == -2

    def test_integer_overflow(self):
        with pytest.raises(RangeError):
            quantize(2.5, Q2_4)
        with pytest.raises(RangeError):
            quantize(float("inf"), Q2_4)

    def test_rendering(self):
        v = quantize(-0.3, Q2_4)
        assert str(v) == "-0.3125 (0x3B)"
        assert str(quantize(0.25, Q2_4)) == "0.25 (0x04)"


class TestAdd:
    def test_exact_sum(self):
        s = fx_add(quantize(0.25, Q2_4), quantize(0.5, Q2_4))
        assert s.to_real() == 0.75

    def test_checked_overflow(self):
        with pytest.raises(OverflowError):
            fx_add(quantize(1.5, Q2_4), quantize(1.0, Q2_4), policy="checked")

    def test_saturate(self):
        s = fx_add(quantize(1.5, Q2_4), quantize(1.0, Q2_4), policy="saturate")
        assert s.to_real() == 1.9375

    def test_wrap(self):
        s = fx_add(quantize(1.5, Q2_4), quantize(1.0, Q2_4), policy="wrap")
        # 2.5 wraps modulo 4 into [-2, 2): 2.5 - 4 = -1.5
        assert s.to_real() == -1.5

    def test_format_mismatch(self):
        with pytest.raises(DimensionError):
            fx_add(quantize(0.5, Q2_4), quantize(0.5, FxFormat(2, 5)))


class TestMulTrunc:
    def test_exact_product(self):
        assert fx_mul_trunc(quantize(0.5, Q2_4), quantize(0.5, Q2_4)).to_real() == 0.25

    def test_positive_truncates_to_zero(self):
        v = quantize(0.1875, Q2_4)
        assert fx_mul_trunc(v, v).to_real() == 0.0

    def test_negative_truncates_down(self):
        a = quantize(-0.1875, Q2_4)
        b = quantize(0.1875, Q2_4)
        assert fx_mul_trunc(a, b).to_real() == -0.0625


class TestDot:
    def test_unit_row_passthrough(self):
        fmt = FxFormat(3, 8)
        row = FxVector.from_real([1.0, 0.0], fmt)
        col = FxVector.from_real([0.5, 0.75], fmt)
        assert fx_dot(row, col).to_real() == 0.5

    def test_error_additivity(self):
        # Three products each truncating by a full step lose exactly 3 ulp.
        fmt = FxFormat(3, 4)
        # raw 1 * raw 8 = 8 -> exact product 8/256, truncates 8 >> 4 = 0 (loss 0.5 ulp)
        # pick raws so each product is raw_a*raw_b = 2^4 - 1 = 15 -> truncates to 0
        row = FxVector.from_raw([3, 3, 3], fmt)
        col = FxVector.from_raw([5, 5, 5], fmt)
        exact = Fraction(3 * 5 * 3, fmt.scale**2)
        got = fx_dot(row, col)
        assert got.raw == 0
        assert Fraction(got.raw, fmt.scale) - exact == -Fraction(45, 256)
        assert -3 * 2.0**-4 <= float(Fraction(got.raw, fmt.scale) - exact) <= 0

    def test_random_vector_against_rational_oracle(self):
        fmt = FxFormat(4, 8)
        rng = np.random.default_rng(7)
        for _ in range(50):
            ra = rng.integers(-200, 200, size=8)
            rb = rng.integers(-200, 200, size=8)
            row = FxVector.from_raw(ra, fmt)
            col = FxVector.from_raw(rb, fmt)
            exact = Fraction(int(np.dot(ra, rb)), fmt.scale**2)
            got = Fraction(fx_dot(row, col).raw, fmt.scale)
            err = got - exact
            assert -Fraction(8, fmt.scale) <= err <= 0


@given(
    ra=st.integers(-(2**11), 2**11 - 1),
    rb=st.integers(-(2**11), 2**11 - 1),
)
def test_mul_trunc_error_interval(ra, rb):
    fmt = FxFormat(12, 12)
    a, b = FxValue(ra, fmt), FxValue(rb, fmt)
    got = Fraction(fx_mul_trunc(a, b, policy="wrap").raw, fmt.scale)
    exact = Fraction(ra * rb, fmt.scale**2)
    # wrap never triggers for these operand ranges, so the difference is pure truncation
    err = got - exact
    assert -Fraction(1, fmt.scale) < err <= 0


@given(
    ra=st.integers(-(2**15), 2**15 - 1),
    rb=st.integers(-(2**15), 2**15 - 1),
)
def test_add_checked_exact_or_raises(ra, rb):
    fmt = FxFormat(8, 8)
    a, b = FxValue(ra, fmt), FxValue(rb, fmt)
    try:
        s = fx_add(a, b)
    except OverflowError:
        assert not (fmt.raw_min <= ra + rb <= fmt.raw_max)
    else:
        assert s.to_real() == (ra + rb) / fmt.scale


@settings(max_examples=50)
@given(
    n=st.integers(1, 64),
    seed=st.integers(0, 2**32 - 1),
)
def test_dot_error_interval(n, seed):
    fmt = FxFormat(16, 10)
    rng = np.random.default_rng(seed)
    ra = rng.integers(-(2**10), 2**10, size=n)
    rb = rng.integers(-(2**10), 2**10, size=n)
    got = Fraction(fx_dot(FxVector.from_raw(ra, fmt), FxVector.from_raw(rb, fmt)).raw, fmt.scale)
    exact = Fraction(int(np.dot(ra, rb)), fmt.scale**2)
    assert -Fraction(n, fmt.scale) <= got - exact <= 0


@given(raw=st.integers(-(2**15), 2**15 - 1))
def test_quantize_truncate_idempotent(raw):
    fmt = FxFormat(8, 8)
    v = FxValue(raw, fmt)
    assert quantize(v.to_real(), fmt, "truncate").raw == raw
    assert quantize(v.to_real(), fmt, "nearest").raw == raw


class TestVectorEngine:
    fmt = FxFormat(6, 10)

    def test_matvec_matches_scalar_dot(self):
        rng = np.random.default_rng(3)
        m = FxMatrix.from_raw(rng.integers(-500, 500, size=(5, 7)), self.fmt)
        v = FxVector.from_raw(rng.integers(-500, 500, size=7), self.fmt)
        out = matvec_trunc(m, v)
        for i in range(5):
            row = FxVector.from_raw(m.raw[i], self.fmt)
            assert out.raw[i] == fx_dot(row, v).raw

    def test_partial_sum_overflow_detected(self):
        tight = FxFormat(2, 4)
        # Row sums cancel to zero but the running sum exceeds the range.
        m = FxMatrix.from_raw([[31, 31, -31, -31]], tight)
        one = FxVector.from_raw([16, 16, 16, 16], tight)
        with pytest.raises(OverflowError):
            matvec_trunc(m, one, policy="checked", check_partials=True)

    def test_scale_matches_scalar(self):
        s = FxValue(777, self.fmt)
        v = FxVector.from_raw([-513, 12, 1000], self.fmt)
        out = vec_scale_trunc(s, v)
        for i in range(3):
            assert out.raw[i] == fx_mul_trunc(s, FxValue(int(v.raw[i]), self.fmt)).raw

    def test_shifts(self):
        v = FxVector.from_raw([4, -8, 12], self.fmt)
        assert list(vec_shift_left(v, 2).raw) == [16, -32, 48]
        assert list(vec_shift_right_exact(v, 2).raw) == [1, -2, 3]
        with pytest.raises(RangeError):
            vec_shift_right_exact(FxVector.from_raw([5], self.fmt), 1)

    def test_clip_is_exact(self):
        v = FxVector.from_raw([-100, 0, 100], self.fmt)
        lo = FxVector.from_raw([-10, -10, -10], self.fmt)
        hi = FxVector.from_raw([10, 10, 10], self.fmt)
        assert list(vec_clip(v, lo, hi).raw) == [-10, 0, 10]

    def test_immutability(self):
        v = FxVector.from_raw([1, 2], self.fmt)
        with pytest.raises(Exception):
            v.raw[0] = 5
        with pytest.raises(AttributeError):
            v.fmt = self.fmt

    def test_wide_format_rejected_for_products(self):
        wide = FxFormat(10, 30)
        v = FxVector.from_raw([1], wide)
        m = FxMatrix.from_raw([[1]], wide)
        with pytest.raises(RangeError):
            matvec_trunc(m, v)

    def test_sub(self):
        a = FxVector.from_raw([5, 6], self.fmt)
        b = FxVector.from_raw([1, 9], self.fmt)
        from fixmpc.fxp import vec_sub

        assert list(vec_sub(a, b).raw) == [4, -3]
