"""Quantized int8 matrix primitives.

Weight matrices are stored as signed 8-bit integers with one positive
float32 scale per column; activations are quantized per row on the fly
inside the quantized GEMM. The GEMM's integer accumulation stage is
exact, so its results are bit-identical regardless of batch shape,
kernel choice, or thread count. That exactness is the correctness
contract every accelerated path in this module must preserve.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import InputValidationError, ShapeMismatchError, TruncatedBlobError

QMAX = 127  # symmetric clamp; -128 is never produced

# Largest inner dimension for which int8 products accumulate exactly in
# float32 (k * 127 * 127 must stay below 2**24).
_F32_EXACT_K = 1024


def _round_half_away(x: np.ndarray) -> np.ndarray:
    return np.trunc(x + np.copysign(0.5, x))


@dataclass(frozen=True, eq=False)
class QuantizedMatrix:
    """Row-major int8 matrix with per-column float32 scale factors."""

    data: np.ndarray    # int8, shape (rows, cols)
    scales: np.ndarray  # float32, shape (cols,), all > 0

    def __post_init__(self) -> None:
        if self.data.ndim != 2 or self.data.dtype != np.int8:
            raise InputValidationError("data must be a 2-D int8 array")
        if self.scales.shape != (self.data.shape[1],) or self.scales.dtype != np.float32:
            raise InputValidationError("scales must be float32 with one entry per column")
        if not (self.scales > 0).all():
            raise InputValidationError("every column scale must be > 0")
        if self.data.size and int(self.data.min()) < -QMAX:
            raise InputValidationError(f"quantized values must lie in [-{QMAX}, {QMAX}]")

    @property
    def rows(self) -> int:
        return self.data.shape[0]

    @property
    def cols(self) -> int:
        return self.data.shape[1]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, QuantizedMatrix):
            return NotImplemented
        return np.array_equal(self.data, other.data) and np.array_equal(
            self.scales, other.scales
        )

    @cached_property
    def data_f32(self) -> np.ndarray:
        """The int8 values widened to float32 (exact); feeds the BLAS path."""
        return self.data.astype(np.float32)


def _as_float_matrix(m: np.ndarray, name: str = "matrix") -> np.ndarray:
    m = np.asarray(m, dtype=np.float32)
    if m.ndim != 2:
        raise InputValidationError(f"{name} must be 2-D")
    return m


def _safe_scale(amax: np.ndarray) -> np.ndarray:
    amax = amax.astype(np.float64)
    out = np.ones_like(amax)
    np.divide(QMAX, amax, out=out, where=amax > 0)
    return out.astype(np.float32)


def column_scales(m: np.ndarray) -> np.ndarray:
    """Per-column scale s_j = QMAX / max_i |m[i, j]|, 1.0 for all-zero columns."""
    amax = np.abs(m).max(axis=0) if m.shape[0] else np.zeros(m.shape[1], np.float32)
    return _safe_scale(amax)


def quantize(m: np.ndarray) -> QuantizedMatrix:
    """Quantize a float32 matrix to int8 with per-column scales.

    q[i, j] = clamp(round_half_away_from_zero(m[i, j] * s_j), -127, 127).
    Rejects non-finite input. The scale product is taken in float64 so
    rounding happens exactly once.
    """
    m = _as_float_matrix(m)
    if not np.isfinite(m).all():
        raise InputValidationError("cannot quantize non-finite values")
    scales = column_scales(m)
    prod = m.astype(np.float64) * scales.astype(np.float64)
    q = np.clip(_round_half_away(prod), -QMAX, QMAX).astype(np.int8)
    return QuantizedMatrix(data=q, scales=scales)


def dequantize(q: QuantizedMatrix) -> np.ndarray:
    """Recover float32 values: out[i, j] = q[i, j] / s_j."""
    return np.asarray(
        q.data.astype(np.float64) / q.scales.astype(np.float64), dtype=np.float32
    )


def _quantize_rows_values(a: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-row quantized activations as integral float32 values (no int8
    round-trip; the values are exact small integers either way)."""
    amax = np.abs(a).max(axis=1) if a.shape[1] else np.zeros(a.shape[0], np.float32)
    r = _safe_scale(amax)
    prod = a.astype(np.float64) * r[:, None].astype(np.float64)
    qa = np.clip(_round_half_away(prod), -QMAX, QMAX).astype(np.float32)
    return qa, r


def quantize_rows(a: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Quantize activations per row; returns (int8 matrix, per-row scales r_i)."""
    qa, r = _quantize_rows_values(a)
    return qa.astype(np.int8), r


def int8_matmul(qa: np.ndarray, qb: np.ndarray) -> np.ndarray:
    """Exact int32 accumulation of two int8 matrices.

    For small inner dimensions the product runs through float32 BLAS:
    every partial sum stays below 2**24 in magnitude, so the float
    result is the exact integer accumulator no matter how BLAS blocks
    or vectorizes the loop. Larger inner dimensions fall back to a
    plain integer matmul.
    """
    if qa.shape[1] <= _F32_EXACT_K:
        acc = qa.astype(np.float32) @ qb.astype(np.float32)
        return acc.astype(np.int32)
    return qa.astype(np.int32) @ qb.astype(np.int32)


def _accumulate(qa_values: np.ndarray, b: QuantizedMatrix) -> np.ndarray:
    # float32 result holds the exact integer accumulator while k <= 1024
    if b.rows <= _F32_EXACT_K:
        return qa_values @ b.data_f32
    return qa_values.astype(np.int32) @ b.data.astype(np.int32)


def _check_gemm_shapes(a: np.ndarray, b: QuantizedMatrix, bias: np.ndarray | None) -> np.ndarray:
    a = _as_float_matrix(a, "a")
    if a.shape[1] != b.rows:
        raise ShapeMismatchError(
            f"inner dimensions disagree: a is {a.shape}, b is {b.rows}x{b.cols}"
        )
    if bias is not None and bias.shape != (b.cols,):
        raise ShapeMismatchError(
            f"bias must have shape ({b.cols},), got {bias.shape}"
        )
    return a


def gemm_q8_accumulator(a: np.ndarray, b: QuantizedMatrix) -> np.ndarray:
    """The exact int32 accumulator gemm_q8 consumes for these operands."""
    a = _check_gemm_shapes(a, b, None)
    qa_values, _ = _quantize_rows_values(a)
    return _accumulate(qa_values, b).astype(np.int32)


def gemm_q8(
    a: np.ndarray, b: QuantizedMatrix, bias: np.ndarray | None = None
) -> np.ndarray:
    """Float x quantized matrix product with exact integer accumulation.

    a is quantized per row with scale r_i; out[i, j] equals
    acc[i, j] / (r_i * s_j) + bias[j] where acc is the int32 sum of
    qa[i, k] * qb[k, j] over k.
    """
    a = _check_gemm_shapes(a, b, bias)
    qa_values, r = _quantize_rows_values(a)
    acc = _accumulate(qa_values, b)
    out = acc.astype(np.float32, copy=False) / (r[:, None] * b.scales[None, :])
    if bias is not None:
        out = out + bias.astype(np.float32, copy=False)
    return out


# --- binary serialization -------------------------------------------------
# Per matrix, little-endian: rows u32, cols u32, scales f32 * cols,
# data i8 * rows * cols.


def matrix_to_bytes(q: QuantizedMatrix) -> bytes:
    header = struct.pack("<II", q.rows, q.cols)
    return header + q.scales.astype("<f4").tobytes() + np.ascontiguousarray(q.data).tobytes()


def matrix_from_bytes(buf: bytes | memoryview, offset: int = 0) -> tuple[QuantizedMatrix, int]:
    """Parse one serialized matrix; returns (matrix, offset past it)."""
    view = memoryview(buf)
    if offset + 8 > len(view):
        raise TruncatedBlobError("blob ended inside a matrix header")
    rows, cols = struct.unpack_from("<II", view, offset)
    offset += 8
    scale_bytes = 4 * cols
    data_bytes = rows * cols
    if offset + scale_bytes + data_bytes > len(view):
        raise TruncatedBlobError(
            f"blob ended inside a {rows}x{cols} matrix body"
        )
    scales = np.frombuffer(view, dtype="<f4", count=cols, offset=offset).astype(np.float32)
    offset += scale_bytes
    data = np.frombuffer(view, dtype=np.int8, count=data_bytes, offset=offset).reshape(rows, cols).copy()
    offset += data_bytes
    return QuantizedMatrix(data=data, scales=scales), offset
