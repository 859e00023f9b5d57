"""Spiking neuron dynamics: binary LIF and graded multi-level spikes.

The update order inside one step is fixed: leak, integrate, fire, reset.
Firing uses the strict comparison v > v_th. A graded neuron with S spike
bits emits an integer level min(floor(v / v_th), 2^S - 1) and transmits
level * v_th downstream; S = 1 degenerates to the plain binary LIF, which
is implemented separately and cross-checked rather than aliased.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import kernels
from .tensors import IntTensor, RealTensor, ShapeError

__all__ = [
    "NeuronParams",
    "NeuronState",
    "SpikeTensor",
    "lif_step",
    "graded_step",
    "surrogate_grad",
    "staircase_surrogate",
]

RESET_MODES = ("hard", "subtract")


@dataclass(frozen=True)
class NeuronParams:
    tau: float = 2.0
    v_th: float = 1.0
    v_rst: float = 0.0
    reset_mode: str = "hard"
    spike_bits: int = 1
    surrogate_width: float = 1.0

    def __post_init__(self):
        if not self.tau > 1:
            raise ValueError(f"tau must be > 1 so the leak contracts, got {self.tau}")
        if not self.v_th > 0:
            raise ValueError(f"threshold must be > 0, got {self.v_th}")
        if not self.v_th > self.v_rst:
            raise ValueError(
                f"threshold {self.v_th} must exceed reset potential {self.v_rst}"
            )
        if self.reset_mode not in RESET_MODES:
            raise ValueError(f"reset_mode must be one of {RESET_MODES}, got {self.reset_mode!r}")
        if self.spike_bits < 1:
            raise ValueError(f"spike_bits must be >= 1, got {self.spike_bits}")
        if not self.surrogate_width > 0:
            raise ValueError(f"surrogate width must be > 0, got {self.surrogate_width}")

    @property
    def level_cap(self) -> int:
        """Largest emittable spike level, 2^S - 1."""
        return (1 << self.spike_bits) - 1

    def with_spike_bits(self, s: int) -> "NeuronParams":
        return replace(self, spike_bits=s)


@dataclass
class NeuronState:
    """Membrane potentials of one neuron population plus a step counter."""

    v: RealTensor
    step_index: int = 0

    @classmethod
    def initial(cls, shape, params: NeuronParams) -> "NeuronState":
        dims = tuple(shape) if not isinstance(shape, int) else (shape,)
        return cls(v=RealTensor(np.full(dims, params.v_rst, dtype=np.float64)))


@dataclass
class SpikeTensor:
    """Integer spike levels emitted by one population in one step."""

    levels: IntTensor
    spike_bits: int

    def values(self, v_th: float) -> RealTensor:
        """The transmitted analog values, level * v_th."""
        return RealTensor(self.levels.data.astype(np.float64) * v_th)


def _check_shapes(state: NeuronState, current: RealTensor) -> None:
    if state.v.shape != current.shape:
        raise ShapeError(
            f"current shape {current.shape} does not match membrane shape {state.v.shape}"
        )


def lif_step(state: NeuronState, current: RealTensor, p: NeuronParams):
    """One binary LIF update; requires p.spike_bits == 1.

    Returns (new state, spikes). The membrane first leaks by 1/tau, then
    integrates the current; neurons above threshold emit a single spike and
    reset (hard: to v_rst, subtract: by v_th).
    """
    if p.spike_bits != 1:
        raise ValueError(f"lif_step is binary; spike_bits must be 1, got {p.spike_bits}")
    _check_shapes(state, current)
    u = state.v.data * (1.0 / p.tau) + current.data
    fired = u > p.v_th
    if p.reset_mode == "hard":
        v_next = np.where(fired, p.v_rst, u)
    else:
        v_next = u - np.where(fired, 1.0, 0.0) * p.v_th
    levels = IntTensor(fired.astype(np.int64), bits=1, unsigned=True)
    return (
        NeuronState(v=RealTensor(v_next), step_index=state.step_index + 1),
        SpikeTensor(levels=levels, spike_bits=1),
    )


def graded_step(state: NeuronState, current: RealTensor, p: NeuronParams):
    """One graded-spike update for any spike_bits >= 1.

    Neurons above threshold emit level = min(floor(v / v_th), 2^S - 1);
    subtract reset removes level * v_th so residual charge carries over,
    hard reset discards it.
    """
    _check_shapes(state, current)
    v = state.v.data.copy().reshape(-1)
    cur = np.ascontiguousarray(current.data.reshape(-1))
    levels = np.empty(v.shape[0], dtype=np.int64)
    kernels.fused_step(
        v, cur, levels,
        1.0 / p.tau, p.v_th, p.v_rst,
        p.reset_mode == "hard", p.level_cap,
    )
    dims = state.v.data.shape
    return (
        NeuronState(v=RealTensor(v.reshape(dims)), step_index=state.step_index + 1),
        SpikeTensor(
            levels=IntTensor(levels.reshape(dims), bits=p.spike_bits, unsigned=True),
            spike_bits=p.spike_bits,
        ),
    )


def surrogate_grad(v: RealTensor, p: NeuronParams) -> RealTensor:
    """Rectangular surrogate for the firing nonlinearity.

    dH/dv ~ (1/alpha) inside the window |v - v_th| < alpha/2, zero outside.
    """
    alpha = p.surrogate_width
    inside = np.abs(v.data - p.v_th) < alpha / 2.0
    return RealTensor(inside.astype(np.float64) / alpha)


def staircase_surrogate(u: np.ndarray, p: NeuronParams) -> np.ndarray:
    """Rectangular windows at every staircase jump of the graded emission.

    d(level)/dv ~ (1/alpha) * #{k in 1..2^S-1 : |v - k*v_th| < alpha/2}.
    At spike_bits=1 this reduces to surrogate_grad. Windows can overlap for
    alpha > v_th, in which case counts add.
    """
    alpha = p.surrogate_width
    cap = p.level_cap
    if alpha <= p.v_th:
        # At most one window can contain u: the nearest jump.
        k = np.clip(np.rint(u / p.v_th), 1.0, float(cap))
        inside = np.abs(u - k * p.v_th) < alpha / 2.0
        return inside.astype(np.float64) / alpha
    # Overlapping windows: count the integers k with k*v_th inside the open
    # interval (u - alpha/2, u + alpha/2), clipped to [1, cap].
    lo = np.maximum(np.floor((u - alpha / 2.0) / p.v_th) + 1.0, 1.0)
    hi = np.minimum(np.ceil((u + alpha / 2.0) / p.v_th) - 1.0, float(cap))
    count = np.maximum(hi - lo + 1.0, 0.0)
    return count / alpha
