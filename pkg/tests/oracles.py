"""Independent reference implementations used to check the library.

Everything here is written in the most literal way possible (scalar loops,
plain Python arithmetic) on purpose: these are the oracles the vectorized
code is judged against, so they must not share its structure.
"""

import math


def matmul_loops(a, b):
    """Triple-loop matrix product over nested lists, fixed k order."""
    m, k = len(a), len(a[0])
    k2, n = len(b), len(b[0])
    assert k == k2
    out = [[0.0] * n for _ in range(m)]
    for i in range(m):
        for j in range(n):
            acc = 0.0
            for p in range(k):
                acc += a[i][p] * b[p][j]
            out[i][j] = acc
    return out


def conv2d_loops(x, kernels, stride=1, padding=0):
    """Sliding-window cross-correlation over nested lists.

    x: [c_in][h][w]; kernels: [c_out][c_in][kh][kw]. Returns [c_out][h'][w'].
    """
    c_in, h, w = len(x), len(x[0]), len(x[0][0])
    c_out = len(kernels)
    kh, kw = len(kernels[0][0]), len(kernels[0][0][0])
    h_out = (h + 2 * padding - kh) // stride + 1
    w_out = (w + 2 * padding - kw) // stride + 1
    out = [[[0.0] * w_out for _ in range(h_out)] for _ in range(c_out)]
    for co in range(c_out):
        for oy in range(h_out):
            for ox in range(w_out):
                acc = 0.0
                for ci in range(c_in):
                    for ky in range(kh):
                        for kx in range(kw):
                            iy = oy * stride + ky - padding
                            ix = ox * stride + kx - padding
                            if 0 <= iy < h and 0 <= ix < w:
                                acc += x[ci][iy][ix] * kernels[co][ci][ky][kx]
                out[co][oy][ox] = acc
    return out


def lif_trace(currents, tau, v_th, v_rst, reset_mode):
    """Scalar LIF recurrence for one neuron over a list of input currents.

    Returns (spikes per step, membrane after each step).
    """
    v = v_rst
    spikes = []
    vs = []
    for cur in currents:
        v = v * (1.0 / tau) + cur
        if v > v_th:
            spikes.append(1)
            v = v_rst if reset_mode == "hard" else v - v_th
        else:
            spikes.append(0)
        vs.append(v)
    return spikes, vs


def graded_trace(currents, tau, v_th, v_rst, reset_mode, s_bits):
    """Scalar graded-spike recurrence; returns (levels per step, membranes)."""
    cap = (1 << s_bits) - 1
    v = v_rst
    levels = []
    vs = []
    for cur in currents:
        v = v * (1.0 / tau) + cur
        if v > v_th:
            level = min(math.floor(v / v_th), cap)
            levels.append(level)
            v = v_rst if reset_mode == "hard" else v - level * v_th
        else:
            levels.append(0)
        vs.append(v)
    return levels, vs


def sace_sum(classes, t_steps):
    """Per-class bit-op total: sum of macs * (T * w * s)."""
    total = 0
    for (w_bits, s_bits), macs in classes.items():
        total += macs * (t_steps * w_bits * s_bits)
    return total


def nsace_sum(classes, rates, t_steps):
    total = 0.0
    for key, macs in classes.items():
        total += rates[key] * macs * (t_steps * key[0] * key[1])
    return total


def bit_digits(value, base_bits, count):
    """value as count base-2^base_bits digits, least significant first."""
    mask = (1 << base_bits) - 1
    return [(value >> (i * base_bits)) & mask for i in range(count)]


def quantize_scalar(values, bits):
    """Per-scalar weight quantization: (codes, delta)."""
    max_abs = max(abs(v) for v in values)
    if max_abs == 0:
        return [0] * len(values), 1.0
    if bits == 1:
        delta = sum(abs(v) for v in values) / len(values)
        return [1 if v >= 0 else -1 for v in values], delta
    qmax = (1 << (bits - 1)) - 1
    delta = max_abs / qmax
    codes = []
    for v in values:
        c = round(v / delta)
        # round() is banker's in Python 3 and so is numpy's rint
        codes.append(max(-qmax, min(qmax, c)))
    return codes, delta
