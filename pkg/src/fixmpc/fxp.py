"""Bit-accurate signed two's-complement fixed-point arithmetic.

A value is stored as a raw integer ``raw`` with ``value = raw * 2**-b`` for a
format with ``b`` fraction bits.  The single rounding mode used by the online
solvers is truncation, i.e. floor toward minus infinity applied to the raw
representation, so the round-off error of a truncated product lies in
``(-2**-b, 0]`` for operands of either sign.  Rounding to nearest exists only
for quantizing problem data offline.

Dot products truncate every scalar product to ``b`` fraction bits before the
(exact) accumulation, which is the behavior of one hardware multiplier feeding
an adder tree; the total error over a length-``n`` dot product therefore lies
in ``[-n * 2**-b, 0]``.

Scalar operations use Python integers and support any format up to 64 bits
total.  The vectorized operations (``FxVector``/``FxMatrix``) are backed by
int64 arrays and require the total width to be at most 32 bits so that raw
products and accumulations cannot overflow the backing store.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal

import numpy as np

from .errors import DimensionError, RangeError

Policy = Literal["checked", "saturate", "wrap"]
RoundingMode = Literal["truncate", "nearest"]

# Raw products of two vector elements must fit int64: 2*(total_bits-1) <= 62.
_VECTOR_WIDTH_LIMIT = 32


@dataclass(frozen=True)
class FxFormat:
    """Signed two's-complement format: ``integer_bits`` includes the sign bit."""

    integer_bits: int
    fraction_bits: int

    def __post_init__(self):
        if self.integer_bits < 1 or self.fraction_bits < 1:
            raise RangeError("integer_bits and fraction_bits must each be >= 1")
        if self.total_bits > 64:
            raise RangeError(f"total width {self.total_bits} exceeds 64 bits")

    @property
    def total_bits(self) -> int:
        return self.integer_bits + self.fraction_bits

    @property
    def scale(self) -> int:
        return 1 << self.fraction_bits

    @property
    def resolution(self) -> float:
        return 1.0 / self.scale

    @property
    def raw_min(self) -> int:
        return -(1 << (self.total_bits - 1))

    @property
    def raw_max(self) -> int:
        return (1 << (self.total_bits - 1)) - 1

    @property
    def real_min(self) -> float:
        return self.raw_min / self.scale

    @property
    def real_max(self) -> float:
        return self.raw_max / self.scale

    def hex(self, raw: int) -> str:
        """Render a raw integer as unsigned two's-complement hex at this width."""
        nibbles = (self.total_bits + 3) // 4
        return f"0x{raw % (1 << self.total_bits):0{nibbles}X}"


def _saturate(raw: int, fmt: FxFormat) -> int:
    return max(fmt.raw_min, min(fmt.raw_max, raw))


def _wrap(raw: int, fmt: FxFormat) -> int:
    span = 1 << fmt.total_bits
    return (raw + (span >> 1)) % span - (span >> 1)


def _fit(raw: int, fmt: FxFormat, policy: Policy, context: str) -> int:
    if fmt.raw_min <= raw <= fmt.raw_max:
        return raw
    if policy == "checked":
        raise OverflowError(
            f"{context}: raw {raw} outside [{fmt.raw_min}, {fmt.raw_max}] "
            f"for Q({fmt.integer_bits},{fmt.fraction_bits})"
        )
    if policy == "saturate":
        return _saturate(raw, fmt)
    return _wrap(raw, fmt)


@dataclass(frozen=True)
class FxValue:
    """A fixed-point scalar: ``value = raw * 2**-fraction_bits``."""

    raw: int
    fmt: FxFormat

    def __post_init__(self):
        if not (self.fmt.raw_min <= self.raw <= self.fmt.raw_max):
            raise RangeError(
                f"raw {self.raw} outside two's-complement range of "
                f"Q({self.fmt.integer_bits},{self.fmt.fraction_bits})"
            )

    def to_real(self) -> float:
        return self.raw / self.fmt.scale

    def hex(self) -> str:
        return self.fmt.hex(self.raw)

    def __str__(self) -> str:
        return f"{self.to_real()!r} ({self.hex()})"


def _quantize_raw(x: float, fmt: FxFormat, mode: RoundingMode) -> int:
    # x * 2**b is exact in binary floating point (power-of-two scaling), so
    # floor/rounding below introduce no double-rounding.
    scaled = x * fmt.scale
    if mode == "truncate":
        return math.floor(scaled)
    if mode == "nearest":
        # Round half away from zero.
        return math.floor(scaled + 0.5) if x >= 0 else -math.floor(-scaled + 0.5)
    raise ValueError(f"unknown rounding mode {mode!r}")


def quantize(x: float, fmt: FxFormat, mode: RoundingMode = "truncate") -> FxValue:
    """Quantize a real number; raises RangeError if the integer part overflows."""
    if not math.isfinite(x):
        raise RangeError(f"cannot quantize non-finite value {x!r}")
    raw = _quantize_raw(x, fmt, mode)
    if not (fmt.raw_min <= raw <= fmt.raw_max):
        raise RangeError(
            f"{x!r} outside representable range "
            f"[{fmt.real_min}, {fmt.real_max}] of Q({fmt.integer_bits},{fmt.fraction_bits})"
        )
    return FxValue(raw, fmt)


def _require_same_format(a: FxValue | FxVector, b: FxValue | FxVector, op: str):
    if a.fmt != b.fmt:
        raise DimensionError(f"{op}: operand formats differ ({a.fmt} vs {b.fmt})")


def fx_add(a: FxValue, b: FxValue, policy: Policy = "checked") -> FxValue:
    """Exact sum when representable; overflow handling per policy."""
    _require_same_format(a, b, "fx_add")
    return FxValue(_fit(a.raw + b.raw, a.fmt, policy, "fx_add"), a.fmt)


def fx_sub(a: FxValue, b: FxValue, policy: Policy = "checked") -> FxValue:
    _require_same_format(a, b, "fx_sub")
    return FxValue(_fit(a.raw - b.raw, a.fmt, policy, "fx_sub"), a.fmt)


def fx_mul_trunc(a: FxValue, b: FxValue, policy: Policy = "checked") -> FxValue:
    """Truncated product: exact 2b-fraction product floored to b fraction bits."""
    _require_same_format(a, b, "fx_mul_trunc")
    raw = (a.raw * b.raw) >> a.fmt.fraction_bits
    return FxValue(_fit(raw, a.fmt, policy, "fx_mul_trunc"), a.fmt)


def fx_dot(row: FxVector, col: FxVector, policy: Policy = "checked") -> FxValue:
    """Dot product with one truncation per scalar product, then exact sums.

    Every partial (cumulative) sum is range-checked under the checked policy,
    matching an adder chain whose intermediate registers share the format.
    """
    _require_same_format(row, col, "fx_dot")
    if row.n != col.n:
        raise DimensionError(f"fx_dot: lengths differ ({row.n} vs {col.n})")
    fmt = row.fmt
    acc = 0
    for ra, rb in zip(row.raw.tolist(), col.raw.tolist()):
        prod = _fit((ra * rb) >> fmt.fraction_bits, fmt, policy, "fx_dot product")
        acc = _fit(acc + prod, fmt, policy, "fx_dot partial sum")
    return FxValue(acc, fmt)


# ---------------------------------------------------------------------------
# Vectorized engine (int64-backed)
# ---------------------------------------------------------------------------


def _check_vector_width(fmt: FxFormat, op: str):
    if fmt.total_bits > _VECTOR_WIDTH_LIMIT:
        raise RangeError(
            f"{op}: vectorized arithmetic supports formats up to "
            f"{_VECTOR_WIDTH_LIMIT} total bits, got {fmt.total_bits}"
        )


def _fit_array(raw: np.ndarray, fmt: FxFormat, policy: Policy, context: str) -> np.ndarray:
    lo, hi = fmt.raw_min, fmt.raw_max
    if policy == "checked":
        bad = (raw < lo) | (raw > hi)
        if bad.any():
            worst = int(raw[bad].flat[np.argmax(np.abs(raw[bad]))])
            raise OverflowError(
                f"{context}: raw {worst} outside [{lo}, {hi}] "
                f"for Q({fmt.integer_bits},{fmt.fraction_bits})"
            )
        return raw
    if policy == "saturate":
        return np.clip(raw, lo, hi)
    span = np.int64(1) << fmt.total_bits
    half = span >> 1
    return (raw + half) % span - half


class _FxArray:
    """Shared behavior of FxVector and FxMatrix (immutable raw int64 array)."""

    __slots__ = ("raw", "fmt")

    def __init__(self, raw: np.ndarray, fmt: FxFormat):
        raw = np.asarray(raw, dtype=np.int64).copy()
        if (raw < fmt.raw_min).any() or (raw > fmt.raw_max).any():
            raise RangeError("raw array contains values outside the format range")
        raw.flags.writeable = False
        object.__setattr__(self, "raw", raw)
        object.__setattr__(self, "fmt", fmt)

    def __setattr__(self, name, value):
        raise AttributeError(f"{type(self).__name__} is immutable")

    def to_real(self) -> np.ndarray:
        return self.raw / self.fmt.scale

    @classmethod
    def from_real(cls, x, fmt: FxFormat, mode: RoundingMode = "truncate"):
        x = np.asarray(x, dtype=float)
        if not np.isfinite(x).all():
            raise RangeError("cannot quantize non-finite entries")
        scaled = x * fmt.scale
        if mode == "truncate":
            raw = np.floor(scaled)
        elif mode == "nearest":
            raw = np.where(x >= 0, np.floor(scaled + 0.5), -np.floor(-scaled + 0.5))
        else:
            raise ValueError(f"unknown rounding mode {mode!r}")
        if (raw < fmt.raw_min).any() or (raw > fmt.raw_max).any():
            raise RangeError("array entry outside representable range")
        return cls(raw.astype(np.int64), fmt)

    @classmethod
    def from_raw(cls, raw, fmt: FxFormat):
        return cls(raw, fmt)


class FxVector(_FxArray):
    def __init__(self, raw, fmt):
        super().__init__(raw, fmt)
        if self.raw.ndim != 1:
            raise DimensionError("FxVector requires a 1-d raw array")

    @property
    def n(self) -> int:
        return self.raw.shape[0]


class FxMatrix(_FxArray):
    def __init__(self, raw, fmt):
        super().__init__(raw, fmt)
        if self.raw.ndim != 2:
            raise DimensionError("FxMatrix requires a 2-d raw array")

    @property
    def shape(self) -> tuple[int, int]:
        return self.raw.shape  # type: ignore[return-value]


def vec_add(a: FxVector, b: FxVector, policy: Policy = "checked") -> FxVector:
    _require_same_format(a, b, "vec_add")
    return FxVector(_fit_array(a.raw + b.raw, a.fmt, policy, "vec_add"), a.fmt)


def vec_sub(a: FxVector, b: FxVector, policy: Policy = "checked") -> FxVector:
    _require_same_format(a, b, "vec_sub")
    return FxVector(_fit_array(a.raw - b.raw, a.fmt, policy, "vec_sub"), a.fmt)


def vec_neg(a: FxVector, policy: Policy = "checked") -> FxVector:
    return FxVector(_fit_array(-a.raw, a.fmt, policy, "vec_neg"), a.fmt)


def vec_scale_trunc(s: FxValue, v: FxVector, policy: Policy = "checked") -> FxVector:
    """Scalar-vector product with one truncation per component."""
    _require_same_format(s, v, "vec_scale_trunc")
    _check_vector_width(v.fmt, "vec_scale_trunc")
    raw = (np.int64(s.raw) * v.raw) >> v.fmt.fraction_bits
    return FxVector(_fit_array(raw, v.fmt, policy, "vec_scale_trunc"), v.fmt)


def vec_shift_left(v: FxVector, k: int, policy: Policy = "checked") -> FxVector:
    """Multiply by 2**k (k >= 0); exact apart from possible overflow."""
    if k < 0:
        raise ValueError("k must be >= 0")
    return FxVector(_fit_array(v.raw * (np.int64(1) << k), v.fmt, policy, "vec_shift_left"), v.fmt)


def vec_shift_right_exact(v: FxVector, k: int) -> FxVector:
    """Divide by 2**k; raises if any raw is not a multiple of 2**k.

    Used where a division by a power of two must be bit-exact (no low bits may
    be discarded), as asserted for the multiplier shifts in the ADMM loop.
    """
    if k < 0:
        raise ValueError("k must be >= 0")
    if k == 0:
        return v
    mask = (np.int64(1) << k) - 1
    if (v.raw & mask).any():
        raise RangeError("right shift would discard nonzero low bits")
    return FxVector(v.raw >> k, v.fmt)


def vec_clip(v: FxVector, lo: FxVector, hi: FxVector) -> FxVector:
    """Componentwise clamp; comparisons only, no arithmetic error."""
    _require_same_format(v, lo, "vec_clip")
    _require_same_format(v, hi, "vec_clip")
    return FxVector(np.clip(v.raw, lo.raw, hi.raw), v.fmt)


def matvec_trunc(
    m: FxMatrix,
    v: FxVector,
    policy: Policy = "checked",
    check_partials: bool = True,
) -> FxVector:
    """Matrix-vector product: per-product truncation, exact row accumulation.

    With ``check_partials`` every cumulative sum along each row is
    range-checked too (the adder-tree intermediate registers).
    """
    _require_same_format(m, v, "matvec_trunc")
    _check_vector_width(v.fmt, "matvec_trunc")
    if m.shape[1] != v.n:
        raise DimensionError(f"matvec_trunc: {m.shape} @ ({v.n},)")
    prods = (m.raw * v.raw[None, :]) >> v.fmt.fraction_bits
    prods = _fit_array(prods, v.fmt, policy, "matvec_trunc product")
    if check_partials and policy == "checked":
        partials = np.cumsum(prods, axis=1)
        _fit_array(partials, v.fmt, policy, "matvec_trunc partial sum")
        out = partials[:, -1]
    else:
        out = prods.sum(axis=1)
        out = _fit_array(out, v.fmt, policy, "matvec_trunc row sum")
    return FxVector(out, v.fmt)
