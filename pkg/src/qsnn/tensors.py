"""Minimal dense tensors with explicit shape metadata.

RealTensor holds float64 data, IntTensor holds int64 codes with a declared
logical bit-width; both are row-major throughout. The heavy arithmetic
(GEMM, im2col) delegates to numpy; these wrappers pin down the shape and
finiteness contracts everything downstream relies on.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "Shape",
    "RealTensor",
    "IntTensor",
    "ShapeError",
    "NonFiniteError",
    "matmul",
    "elementwise",
    "conv2d",
    "im2col",
    "col2im",
    "conv2d_batch",
]


class ShapeError(ValueError):
    """Operand shapes are incompatible for the requested operation."""


class NonFiniteError(ArithmeticError):
    """An operation produced NaN or Inf from finite inputs."""


@dataclass(frozen=True)
class Shape:
    """An ordered list of positive dimension sizes."""

    dims: tuple[int, ...]

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        object.__setattr__(self, "dims", dims)
        if not dims:
            raise ShapeError("shape needs at least one dimension")
        for d in dims:
            if d < 1:
                raise ShapeError(f"dimensions must be >= 1, got {dims}")

    @property
    def elements(self) -> int:
        return math.prod(self.dims)

    def __iter__(self):
        return iter(self.dims)

    def __len__(self):
        return len(self.dims)

    def __getitem__(self, i):
        return self.dims[i]

    def __str__(self):
        return "x".join(str(d) for d in self.dims)


def _as_c_array(data, dtype) -> np.ndarray:
    arr = np.ascontiguousarray(np.asarray(data, dtype=dtype))
    if arr.ndim == 0:
        arr = arr.reshape(1)
    return arr


class RealTensor:
    """Row-major float64 tensor."""

    __slots__ = ("data",)

    def __init__(self, data):
        self.data = _as_c_array(data, np.float64)
        Shape(self.data.shape)  # validates dims >= 1

    @classmethod
    def zeros(cls, shape) -> "RealTensor":
        dims = tuple(shape.dims) if isinstance(shape, Shape) else tuple(shape)
        return cls(np.zeros(dims, dtype=np.float64))

    @property
    def shape(self) -> Shape:
        return Shape(self.data.shape)

    def tolist(self):
        return self.data.tolist()

    def __repr__(self):
        return f"RealTensor(shape={self.shape}, data={self.data!r})"


class IntTensor:
    """Row-major int64 tensor with a declared logical bit-width.

    The storage is always int64; ``bits`` records how wide the values are
    *logically* (weight codes, spike levels), and construction rejects
    values outside the declared range. ``unsigned`` selects [0, 2^bits - 1]
    instead of the symmetric signed range.
    """

    __slots__ = ("data", "bits", "unsigned")

    def __init__(self, data, bits: int, unsigned: bool = False):
        bits = int(bits)
        if bits < 1:
            raise ValueError(f"bit-width must be >= 1, got {bits}")
        self.data = _as_c_array(data, np.int64)
        Shape(self.data.shape)
        self.bits = bits
        self.unsigned = bool(unsigned)
        lo, hi = self.value_range()
        if self.data.size and (self.data.min() < lo or self.data.max() > hi):
            bad = int(np.argmax((self.data < lo) | (self.data > hi)))
            raise ValueError(
                f"value {self.data.reshape(-1)[bad]} at flat index {bad} "
                f"outside [{lo}, {hi}] for {bits}-bit "
                f"{'unsigned' if self.unsigned else 'signed'} tensor"
            )

    def value_range(self) -> tuple[int, int]:
        if self.unsigned:
            return 0, (1 << self.bits) - 1
        if self.bits == 1:
            # 1-bit signed tensors hold sign codes {-1, 0, +1}, not two's
            # complement: binarized weights are +-1 by construction.
            return -1, 1
        return -(1 << (self.bits - 1)), (1 << (self.bits - 1)) - 1

    @property
    def shape(self) -> Shape:
        return Shape(self.data.shape)

    def tolist(self):
        return self.data.tolist()

    def __repr__(self):
        kind = "u" if self.unsigned else "i"
        return f"IntTensor(shape={self.shape}, bits={kind}{self.bits}, data={self.data!r})"


def _ensure_finite(arr: np.ndarray, op: str) -> np.ndarray:
    if not np.all(np.isfinite(arr)):
        raise NonFiniteError(f"{op} produced non-finite values")
    return arr


def matmul(a: RealTensor, b: RealTensor) -> RealTensor:
    """C = A·B for 2-D operands, accumulating over the inner dimension.

    Summation runs in a fixed order for a given shape and thread count, so
    repeated calls are bit-reproducible; on integer-valued inputs the result
    is exact and therefore identical to a naive triple loop.
    """
    if len(a.shape) != 2 or len(b.shape) != 2:
        raise ShapeError(f"matmul needs 2-D operands, got {a.shape} and {b.shape}")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul: inner dimensions disagree: {a.shape} x {b.shape}")
    return RealTensor(_ensure_finite(a.data @ b.data, "matmul"))


_ELEMENTWISE = {
    "add": np.add,
    "sub": np.subtract,
    "mul": np.multiply,
    "scale": np.multiply,
}


def elementwise(op: str, a: RealTensor, b) -> RealTensor:
    """Apply add/sub/mul with equal shapes, or scale by a scalar."""
    if op not in _ELEMENTWISE:
        raise ValueError(f"unknown elementwise op {op!r}")
    if isinstance(b, RealTensor):
        if op == "scale":
            raise ShapeError("scale takes a scalar, not a tensor")
        if b.shape != a.shape:
            raise ShapeError(f"elementwise {op}: shapes differ: {a.shape} vs {b.shape}")
        other = b.data
    else:
        other = float(b)
    return RealTensor(_ensure_finite(_ELEMENTWISE[op](a.data, other), op))


def im2col(x: np.ndarray, kh: int, kw: int, stride: int, padding: int):
    """Unfold [b, c, h, w] into [b, c*kh*kw, h_out*w_out] patch columns.

    Column ordering is (channel, kernel-row, kernel-col), matching a kernel
    tensor reshaped to [c_out, c_in*kh*kw].
    """
    b, c, h, w = x.shape
    hp, wp = h + 2 * padding, w + 2 * padding
    h_out = (hp - kh) // stride + 1
    w_out = (wp - kw) // stride + 1
    if kh > hp or kw > wp:
        raise ShapeError(
            f"kernel {kh}x{kw} larger than padded input {hp}x{wp}"
        )
    if padding:
        xp = np.zeros((b, c, hp, wp), dtype=x.dtype)
        xp[:, :, padding:padding + h, padding:padding + w] = x
    else:
        xp = x
    cols = np.empty((b, c * kh * kw, h_out * w_out), dtype=x.dtype)
    idx = 0
    for ci in range(c):
        for ki in range(kh):
            for kj in range(kw):
                patch = xp[:, ci,
                           ki:ki + stride * h_out:stride,
                           kj:kj + stride * w_out:stride]
                cols[:, idx, :] = patch.reshape(b, -1)
                idx += 1
    return cols, h_out, w_out


def col2im(cols: np.ndarray, x_shape, kh: int, kw: int, stride: int, padding: int) -> np.ndarray:
    """Scatter-add inverse of :func:`im2col`, used by the conv backward pass."""
    b, c, h, w = x_shape
    hp, wp = h + 2 * padding, w + 2 * padding
    h_out = (hp - kh) // stride + 1
    w_out = (wp - kw) // stride + 1
    xp = np.zeros((b, c, hp, wp), dtype=cols.dtype)
    idx = 0
    for ci in range(c):
        for ki in range(kh):
            for kj in range(kw):
                patch = cols[:, idx, :].reshape(b, h_out, w_out)
                xp[:, ci,
                   ki:ki + stride * h_out:stride,
                   kj:kj + stride * w_out:stride] += patch
                idx += 1
    if padding:
        return xp[:, :, padding:padding + h, padding:padding + w]
    return xp


def conv2d_batch(x: np.ndarray, kernels: np.ndarray, stride: int = 1, padding: int = 0) -> np.ndarray:
    """Cross-correlate [b, c_in, h, w] with [c_out, c_in, kh, kw]."""
    c_out, c_in, kh, kw = kernels.shape
    if x.shape[1] != c_in:
        raise ShapeError(
            f"conv2d: input channels {x.shape[1]} do not match kernel channels {c_in}"
        )
    cols, h_out, w_out = im2col(x, kh, kw, stride, padding)
    km = kernels.reshape(c_out, c_in * kh * kw)
    out = km @ cols  # [b, c_out, h_out*w_out] by broadcasting over the batch
    return out.reshape(x.shape[0], c_out, h_out, w_out)


def conv2d(input: RealTensor, kernels: RealTensor, stride: int = 1, padding: int = 0) -> RealTensor:
    """Standard cross-correlation of a [c_in, h, w] input with [c_out, c_in, kh, kw] kernels.

    Output spatial size is floor((h + 2*pad - kh)/stride) + 1 per axis.
    Implemented as im2col followed by a single GEMM.
    """
    if len(input.shape) != 3:
        raise ShapeError(f"conv2d input must be [c_in, h, w], got {input.shape}")
    if len(kernels.shape) != 4:
        raise ShapeError(f"conv2d kernels must be [c_out, c_in, kh, kw], got {kernels.shape}")
    if stride < 1:
        raise ValueError(f"stride must be >= 1, got {stride}")
    if padding < 0:
        raise ValueError(f"padding must be >= 0, got {padding}")
    x = input.data[np.newaxis]
    out = conv2d_batch(x, kernels.data, stride=stride, padding=padding)
    return RealTensor(_ensure_finite(out[0], "conv2d"))
