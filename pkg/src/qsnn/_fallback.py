"""Pure-numpy implementations of the hot kernels.

These are the reference semantics for qsnn._core: the expressions here are
written operation for operation like the C loops (multiply by the
precomputed 1/tau, then add; floor of the ratio; clamp; subtract), and the
test suite holds both paths to bit-identical outputs.
"""

from __future__ import annotations

import numpy as np

__all__ = ["fused_step", "bitserial_gemm"]


def fused_step(v: np.ndarray, cur: np.ndarray, levels: np.ndarray,
               inv_tau: float, v_th: float, v_rst: float,
               hard: bool, level_cap: int) -> None:
    """One leak/integrate/fire/reset update over flat float64 arrays, in place.

    v is the membrane (updated in place), cur the input current, levels the
    int64 output buffer for emitted spike levels. level_cap is 2^S - 1; a
    neuron fires when the post-integration potential exceeds v_th strictly,
    emitting min(floor(u / v_th), level_cap).
    """
    u = v * inv_tau + cur
    fired = u > v_th
    lvl = np.floor(u / v_th)
    np.minimum(lvl, float(level_cap), out=lvl)
    lvl[~fired] = 0.0
    levels[:] = lvl.astype(np.int64)
    if hard:
        v[:] = np.where(fired, v_rst, u)
    else:
        v[:] = u - lvl * v_th


def bitserial_gemm(w: np.ndarray, planes: np.ndarray) -> np.ndarray:
    """Accumulate sum_t 2^t * (W @ plane_t) exactly in int64.

    w: int64 [m, k]; planes: int64 [T, k] with values in {0, 1};
    returns int64 [m].
    """
    psums = planes @ w.T                      # [T, m], exact integer GEMM
    weights = np.left_shift(np.int64(1), np.arange(planes.shape[0], dtype=np.int64))
    return weights @ psums
