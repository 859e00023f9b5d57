"""Kernel backend selection.

The compiled core (qsnn._core) is used when it imported cleanly; otherwise,
or when QSNN_FORCE_FALLBACK=1 is set, the numpy fallback takes over. Both
backends produce bit-identical results; the choice only affects speed.
"""

from __future__ import annotations

import os

import numpy as np

from . import _fallback

try:
    from . import _core
    HAS_CORE = True
except ImportError:
    _core = None
    HAS_CORE = False

use_fallback = (not HAS_CORE) or os.environ.get("QSNN_FORCE_FALLBACK") == "1"

__all__ = ["HAS_CORE", "use_fallback", "backend_name", "fused_step", "bitserial_gemm"]


def backend_name() -> str:
    return "fallback" if use_fallback else "compiled"


def fused_step(v: np.ndarray, cur: np.ndarray, levels: np.ndarray,
               inv_tau: float, v_th: float, v_rst: float,
               hard: bool, level_cap: int) -> None:
    """In-place neuron update over flat arrays (see _fallback.fused_step)."""
    if use_fallback:
        _fallback.fused_step(v, cur, levels, inv_tau, v_th, v_rst, hard, level_cap)
    else:
        _core.fused_step(v, cur, levels, inv_tau, v_th, v_rst, hard, level_cap)


def bitserial_gemm(w: np.ndarray, planes: np.ndarray) -> np.ndarray:
    """Exact int64 bit-serial GEMM (see _fallback.bitserial_gemm)."""
    w = np.ascontiguousarray(w, dtype=np.int64)
    planes = np.ascontiguousarray(planes, dtype=np.int64)
    if use_fallback:
        return _fallback.bitserial_gemm(w, planes)
    return _core.bitserial_gemm(w, planes)
