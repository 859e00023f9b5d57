"""Exact equivalence between direct integer GeMM and its bit-serial form,
plus a signal-level emulator of the membrane-integration datapath.

The equivalence is stated at the GeMM stage, over integer weight codes and
unsigned integer activations, with the shared quantizer scale factored out:
sum_j w_j * a_j == sum_t 2^t * (sum_j w_j * bit_t(a_j)). Everything here is
int64-exact; a mismatch is a reported finding, never a tolerance question.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .quantize import bit_planes
from .tensors import IntTensor

__all__ = [
    "gemm_direct",
    "gemm_bitserial",
    "check_equivalence",
    "exhaustive_equivalence",
    "EquivalenceReport",
    "DatapathConfig",
    "DatapathTrace",
    "AccumulatorOverflow",
    "datapath_run",
    "split_payload",
    "datapath_invariance_check",
]


class AccumulatorOverflow(ArithmeticError):
    """The datapath accumulator exceeded its declared width."""


def _overflow_bound_ok(w: np.ndarray, a: np.ndarray) -> bool:
    # Worst-case |sum_j w_j a_j| <= k * max|w| * max(a); keep it clear of
    # int64 so the numpy accumulation cannot wrap silently.
    if w.size == 0 or a.size == 0:
        return True
    k = w.shape[1]
    worst = int(np.max(np.abs(w))) * int(np.max(a)) * k
    return worst < 2 ** 62


def gemm_direct(w: IntTensor, a: IntTensor) -> IntTensor:
    """Exact integer product: out_i = sum_j w[i, j] * a[j]."""
    wm = w.data
    av = a.data
    if wm.ndim != 2 or av.ndim != 1:
        raise ValueError(f"expected w [m, k] and a [k], got {w.shape} and {a.shape}")
    if wm.shape[1] != av.shape[0]:
        raise ValueError(f"inner dimensions disagree: {w.shape} x {a.shape}")
    if av.size and int(av.min()) < 0:
        raise ValueError("activations must be non-negative")
    if not _overflow_bound_ok(wm, av):
        raise OverflowError(
            f"worst-case dot product for {w.shape} x {a.shape} operands "
            "does not fit the 64-bit accumulator"
        )
    return IntTensor(wm @ av, bits=64)


def gemm_bitserial(w: IntTensor, a: IntTensor, T: int) -> IntTensor:
    """Bit-serial form: decompose a into T planes, accumulate shifted partial sums."""
    wm = w.data
    if wm.ndim != 2 or a.data.ndim != 1:
        raise ValueError(f"expected w [m, k] and a [k], got {w.shape} and {a.shape}")
    if wm.shape[1] != a.data.shape[0]:
        raise ValueError(f"inner dimensions disagree: {w.shape} x {a.shape}")
    if not _overflow_bound_ok(wm, a.data):
        raise OverflowError(
            f"worst-case dot product for {w.shape} x {a.shape} operands "
            "does not fit the 64-bit accumulator"
        )
    planes = bit_planes(a, T)
    plane_mat = np.stack([p.data for p in planes.planes])  # [T, k]
    return IntTensor(kernels.bitserial_gemm(wm, plane_mat), bits=64)


@dataclass
class EquivalenceReport:
    mode: str
    trials: int
    mismatches: int
    seed: int | None = None
    dims: tuple | None = None
    t_bits: int | None = None
    first_counterexample: dict | None = None

    @property
    def ok(self) -> bool:
        return self.mismatches == 0

    def to_json_dict(self) -> dict:
        return {
            "mode": self.mode,
            "trials": self.trials,
            "mismatches": self.mismatches,
            "seed": self.seed,
            "dims": list(self.dims) if self.dims else None,
            "t_bits": self.t_bits,
            "first_counterexample": self.first_counterexample,
            "ok": self.ok,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), sort_keys=True)


def check_equivalence(dims: tuple[int, int], T: int, trials: int, seed: int,
                      w_bits: int = 8) -> EquivalenceReport:
    """Randomized exact-equality check of gemm_bitserial against gemm_direct.

    dims = (m, k); weights draw from the symmetric w_bits range, activations
    from [0, 2^T - 1]. Deterministic under seed.
    """
    if trials < 1:
        raise ValueError(f"trials must be >= 1, got {trials}")
    m, k = dims
    rng = np.random.default_rng(seed)
    wmax = (1 << (w_bits - 1)) - 1 if w_bits > 1 else 1
    amax = (1 << T) - 1
    mismatches = 0
    first = None
    for _ in range(trials):
        w = IntTensor(rng.integers(-wmax, wmax + 1, size=(m, k)), bits=w_bits)
        a = IntTensor(rng.integers(0, amax + 1, size=k), bits=T, unsigned=True)
        direct = gemm_direct(w, a).data
        serial = gemm_bitserial(w, a, T).data
        if not np.array_equal(direct, serial):
            mismatches += 1
            if first is None:
                first = {
                    "w": w.tolist(),
                    "a": a.tolist(),
                    "direct": direct.tolist(),
                    "bitserial": serial.tolist(),
                }
    return EquivalenceReport(
        mode="randomized", trials=trials, mismatches=mismatches,
        seed=seed, dims=(m, k), t_bits=T, first_counterexample=first,
    )


def exhaustive_equivalence(k_max: int = 2, t_max: int = 3, w_max: int = 3) -> EquivalenceReport:
    """Exhaustive check over every small operand combination.

    Output rows are independent, so one weight row (m = 1) covers the
    general case; all w in [-w_max, w_max]^k and a in [0, 2^T - 1]^k are
    enumerated for k <= k_max, T <= t_max.
    """
    trials = 0
    mismatches = 0
    first = None
    wvals = range(-w_max, w_max + 1)
    for k in range(1, k_max + 1):
        for T in range(1, t_max + 1):
            avals = range(0, 1 << T)
            for w_row in itertools.product(wvals, repeat=k):
                w = IntTensor(np.array([w_row], dtype=np.int64), bits=8)
                for a_vec in itertools.product(avals, repeat=k):
                    a = IntTensor(np.array(a_vec, dtype=np.int64), bits=T, unsigned=True)
                    direct = gemm_direct(w, a).data
                    serial = gemm_bitserial(w, a, T).data
                    trials += 1
                    if not np.array_equal(direct, serial):
                        mismatches += 1
                        if first is None:
                            first = {"w": list(w_row), "a": list(a_vec),
                                     "direct": direct.tolist(),
                                     "bitserial": serial.tolist()}
    return EquivalenceReport(
        mode="exhaustive", trials=trials, mismatches=mismatches,
        first_counterexample=first,
    )


# --- datapath emulation ----------------------------------------------------

STATE_RESET = "reset"
STATE_ACCUMULATE = "accumulate"
STATE_EMIT = "emit"


@dataclass(frozen=True)
class DatapathConfig:
    """One (S, T) split of a serial membrane integration."""

    spike_bits: int
    time_steps: int
    weight_bits: int = 8
    accumulator_width: int = 48

    def __post_init__(self):
        for name in ("spike_bits", "time_steps", "weight_bits"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.accumulator_width < 2:
            raise ValueError("accumulator must be at least 2 bits wide")


@dataclass
class DatapathCycle:
    cycle: int
    p_sum: int
    valid: int
    last: int
    membrane: int
    state: str


@dataclass
class DatapathTrace:
    cycles: list = field(default_factory=list)

    CSV_HEADER = "cycle,p_sum,valid,last,membrane,state"

    @property
    def final_membrane(self) -> int:
        return self.cycles[-1].membrane if self.cycles else 0

    def to_csv(self) -> str:
        lines = [self.CSV_HEADER]
        for c in self.cycles:
            lines.append(f"{c.cycle},{c.p_sum},{c.valid},{c.last},{c.membrane},{c.state}")
        return "\n".join(lines) + "\n"

    def write_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.to_csv())


def datapath_run(cfg: DatapathConfig, weighted_inputs) -> tuple[int, DatapathTrace]:
    """Run the 3-state integration FSM over a stream of partial sums.

    weighted_inputs holds one pre-weighted partial sum (P_sum) per time
    step; on the t-th valid cycle the accumulator adds p_sum << (t * S),
    the shift matching the spike-bit significance of that step. The FSM
    spends one cycle in reset (membrane cleared), T cycles accumulating
    (valid asserted, last on the final one), and one emit cycle holding the
    result.
    """
    p_sums = [int(x) for x in weighted_inputs]
    if len(p_sums) != cfg.time_steps:
        raise ValueError(
            f"expected {cfg.time_steps} partial sums (one per step), got {len(p_sums)}"
        )
    limit = 1 << (cfg.accumulator_width - 1)
    trace = DatapathTrace()
    membrane = 0
    trace.cycles.append(DatapathCycle(0, 0, 0, 0, membrane, STATE_RESET))
    for t, p in enumerate(p_sums):
        membrane += p << (t * cfg.spike_bits)
        if not (-limit <= membrane < limit):
            raise AccumulatorOverflow(
                f"membrane {membrane} exceeds {cfg.accumulator_width}-bit accumulator "
                f"on cycle {t + 1}"
            )
        last = 1 if t == cfg.time_steps - 1 else 0
        trace.cycles.append(
            DatapathCycle(t + 1, p, 1, last, membrane, STATE_ACCUMULATE)
        )
    trace.cycles.append(
        DatapathCycle(cfg.time_steps + 1, 0, 0, 0, membrane, STATE_EMIT)
    )
    return membrane, trace


def split_payload(value: int, spike_bits: int, time_steps: int) -> list[int]:
    """Split an unsigned payload into time_steps groups of spike_bits, LSB first."""
    value = int(value)
    if value < 0:
        raise ValueError(f"payload must be non-negative, got {value}")
    if value >= 1 << (spike_bits * time_steps):
        raise ValueError(
            f"payload {value} does not fit {time_steps} groups of {spike_bits} bits"
        )
    mask = (1 << spike_bits) - 1
    return [(value >> (t * spike_bits)) & mask for t in range(time_steps)]


def datapath_invariance_check(n_sets: int, splits, payload_bits: int, seed: int,
                              k: int = 4, w_bits: int = 8) -> dict:
    """Check that the final membrane is split-invariant for random operands.

    For each operand set (random weights, random payload_bits-wide
    activations) and each (S, T) split with S*T == payload_bits, the
    activation bits are regrouped into S-bit digits, pre-weighted into
    per-step partial sums, and streamed through datapath_run. All splits
    must land on the same membrane, which must equal the direct dot
    product.
    """
    for s, t in splits:
        if s * t != payload_bits:
            raise ValueError(f"split ({s},{t}) does not cover {payload_bits} payload bits")
    rng = np.random.default_rng(seed)
    wmax = (1 << (w_bits - 1)) - 1
    mismatches = 0
    first = None
    for _ in range(n_sets):
        w = rng.integers(-wmax, wmax + 1, size=k)
        a = rng.integers(0, 1 << payload_bits, size=k)
        direct = int(np.dot(w, a))
        membranes = []
        for s, t in splits:
            cfg = DatapathConfig(spike_bits=s, time_steps=t, weight_bits=w_bits)
            digits = np.array([split_payload(int(av), s, t) for av in a])  # [k, t]
            p_sums = [int(np.dot(w, digits[:, step])) for step in range(t)]
            membrane, _ = datapath_run(cfg, p_sums)
            membranes.append(membrane)
        if any(m != direct for m in membranes):
            mismatches += 1
            if first is None:
                first = {
                    "w": w.tolist(), "a": a.tolist(), "direct": direct,
                    "membranes": {f"{s}/{t}": m for (s, t), m in zip(splits, membranes)},
                }
    return {
        "sets": n_sets,
        "splits": [f"{s}/{t}" for s, t in splits],
        "payload_bits": payload_bits,
        "seed": seed,
        "mismatches": mismatches,
        "first_counterexample": first,
        "ok": mismatches == 0,
    }
