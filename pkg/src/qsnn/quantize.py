"""Weight and activation quantizers, bit-plane decomposition, and the
straight-through gradient rule.

Two distinct rounding conventions coexist on purpose: weights use
round-to-nearest onto a symmetric integer grid, activations use floor.
Both are pinned by tests including their negative-value behavior.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .tensors import IntTensor, RealTensor

__all__ = [
    "QuantScheme",
    "BitPlanes",
    "QuantizedWeights",
    "quantize_weights",
    "dequantize",
    "quantize_activation",
    "bit_planes",
    "reconstruct",
    "ste_backward",
]


@dataclass(frozen=True)
class QuantScheme:
    """A fixed-step uniform quantizer description."""

    bits: int
    step: float
    signed: bool = True
    clamp_lo: float = -1.0
    clamp_hi: float = 1.0

    def __post_init__(self):
        if self.bits < 1:
            raise ValueError(f"bits must be >= 1, got {self.bits}")
        if not self.step > 0:
            raise ValueError(f"quantization step must be > 0, got {self.step}")
        if not self.clamp_lo < self.clamp_hi:
            raise ValueError(
                f"clamp range is empty: [{self.clamp_lo}, {self.clamp_hi}]"
            )

    @property
    def qmax(self) -> int:
        """Largest representable integer code magnitude."""
        if self.signed:
            return max((1 << (self.bits - 1)) - 1, 1)
        return (1 << self.bits) - 1

    @classmethod
    def symmetric(cls, bits: int, step: float) -> "QuantScheme":
        if bits == 1:
            # Sign binarization: codes are +-1, shadow weights clipped to
            # the unit interval as is standard for binary nets.
            return cls(bits=1, step=step, signed=True, clamp_lo=-1.0, clamp_hi=1.0)
        qmax = (1 << (bits - 1)) - 1
        bound = qmax * step
        return cls(bits=bits, step=step, signed=True, clamp_lo=-bound, clamp_hi=bound)


@dataclass
class QuantizedWeights:
    """Integer weight codes plus the shared scale that dequantizes them.

    ``degenerate`` flags an all-zero source tensor, where the step defaults
    to 1 and every code is zero.
    """

    codes: IntTensor
    delta: float
    degenerate: bool
    scheme: QuantScheme

    def dequantized(self) -> RealTensor:
        return RealTensor(self.codes.data.astype(np.float64) * self.delta)


@dataclass(frozen=True)
class BitPlanes:
    """Least-significant-first binary planes of an unsigned integer tensor."""

    planes: tuple
    source_bits: int

    def __post_init__(self):
        if len(self.planes) != self.source_bits:
            raise ValueError(
                f"expected {self.source_bits} planes, got {len(self.planes)}"
            )


def quantize_weights(w: RealTensor, bits: int, rule: str = "max-abs",
                     t_steps: int | None = None) -> QuantizedWeights:
    """Quantize a real weight tensor onto a symmetric integer grid.

    rule="max-abs" (default) picks the per-tensor step max|w| / (2^(bits-1)-1);
    rule="fixed-t" uses the literal step 2^(t_steps-1) coupled to the network's
    step count, kept for reproduction attempts (it collapses small weights to
    zero for t_steps >= 2 and is not the default for that reason). bits=1 is
    sign binarization with step mean|w| and codes in {-1, +1}.
    """
    if bits < 1:
        raise ValueError(f"weight bit-width must be >= 1, got {bits}")
    data = w.data
    if not np.all(np.isfinite(data)):
        raise ValueError("weights must be finite")

    max_abs = float(np.max(np.abs(data))) if data.size else 0.0
    if max_abs == 0.0:
        delta = 1.0
        codes = IntTensor(np.zeros_like(data, dtype=np.int64), bits=bits)
        return QuantizedWeights(codes, delta, True, QuantScheme.symmetric(bits, delta))

    if bits == 1:
        delta = float(np.mean(np.abs(data)))
        raw = np.where(data >= 0, 1, -1).astype(np.int64)
        codes = IntTensor(raw, bits=1)
        return QuantizedWeights(codes, delta, False, QuantScheme.symmetric(1, delta))

    qmax = (1 << (bits - 1)) - 1
    if rule == "max-abs":
        delta = max_abs / qmax
    elif rule == "fixed-t":
        if t_steps is None or t_steps < 1:
            raise ValueError("rule='fixed-t' needs the network step count t_steps >= 1")
        delta = float(2.0 ** (t_steps - 1))
    else:
        raise ValueError(f"unknown quantization rule {rule!r}")
    raw = np.clip(np.rint(data / delta), -qmax, qmax).astype(np.int64)
    codes = IntTensor(raw, bits=bits)
    return QuantizedWeights(codes, delta, False, QuantScheme.symmetric(bits, delta))


def dequantize(q: QuantizedWeights) -> RealTensor:
    return q.dequantized()


def quantize_activation(a_prime: RealTensor, delta_a: float) -> RealTensor:
    """Floor-quantize activations: floor(a' / delta) * delta.

    Floor, not round: negative inputs quantize downward (-0.3 -> -delta).
    """
    if not delta_a > 0:
        raise ValueError(f"activation step must be > 0, got {delta_a}")
    return RealTensor(np.floor(a_prime.data / delta_a) * delta_a)


def bit_planes(a: IntTensor, T: int) -> BitPlanes:
    """Decompose an unsigned integer tensor into T binary planes, LSB first."""
    if T < 1:
        raise ValueError(f"plane count must be >= 1, got {T}")
    data = a.data
    if data.size:
        limit = (1 << T) - 1
        flat = data.reshape(-1)
        if flat.min() < 0 or flat.max() > limit:
            bad = int(np.argmax((flat < 0) | (flat > limit)))
            raise ValueError(
                f"value {flat[bad]} at flat index {bad} does not fit in {T} bit planes"
            )
    planes = tuple(
        IntTensor((data >> t) & 1, bits=1, unsigned=True) for t in range(T)
    )
    return BitPlanes(planes=planes, source_bits=T)


def reconstruct(bp: BitPlanes) -> IntTensor:
    """Inverse of bit_planes: sum_t 2^t * plane_t."""
    total = np.zeros_like(bp.planes[0].data)
    for t, plane in enumerate(bp.planes):
        total = total + (plane.data << t)
    return IntTensor(total, bits=bp.source_bits, unsigned=True)


def ste_backward(grad_out: RealTensor, w: RealTensor, scheme: QuantScheme) -> RealTensor:
    """Straight-through estimator with clipping.

    Gradients pass unchanged where the shadow weight lies inside the
    scheme's clamp range and are zeroed outside it.
    """
    if grad_out.shape != w.shape:
        raise ValueError(
            f"gradient shape {grad_out.shape} does not match weights {w.shape}"
        )
    inside = (w.data >= scheme.clamp_lo) & (w.data <= scheme.clamp_hi)
    return RealTensor(np.where(inside, grad_out.data, 0.0))
