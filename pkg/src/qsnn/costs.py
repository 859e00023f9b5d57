"""Bit-budget cost model: SOPs, S-ACE, NS-ACE, parameter-bit accounting,
and the firing-rate profiler.

Conventions, fixed here because common usage leaves them ambiguous:
SOPs = (MACs per step) * T. S-ACE counts MACs per step per (w, s) class and
multiplies by that class's full bit budget T*w*s, so time re-enters through
the budget; under a uniform allocation S-ACE = MACs/step * T * W * S.
NS-ACE scales each class by the firing rate of the spike tensors feeding
its MACs, so a silent network costs nothing.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .network import BitAllocation, NetworkSpec, count_macs, forward
from .tensors import RealTensor

__all__ = [
    "CostReport",
    "bit_budget",
    "sops",
    "s_ace",
    "ns_ace",
    "s_ace_from_classes",
    "ns_ace_from_classes",
    "param_bits",
    "profile_firing_rates",
    "class_firing_rates",
    "cost_report",
    "COST_CSV_HEADER",
    "cost_csv_rows",
]

COST_CSV_HEADER = "w_bits,s_bits,t_steps,bit_budget,params_bits,sops,s_ace,ns_ace,acc,fr_mean"


def bit_budget(alloc: BitAllocation) -> int:
    """The product T*W*S: bits moved per synaptic operation."""
    return alloc.t_steps * alloc.w_bits * alloc.s_bits


def _num(x):
    """Keep integral counts as ints, fractional stub counts as floats."""
    if isinstance(x, float) and x.is_integer():
        return int(x)
    return x


def sops(net: NetworkSpec) -> int:
    """Synaptic operations per inference: total MACs per step times T."""
    per_step = sum(count_macs(net).values())
    return _num(per_step * net.allocation.t_steps)


def s_ace_from_classes(classes: dict, t_steps: int):
    """sum over (w, s) classes of macs_per_step * (T * w * s)."""
    total = 0
    for (w, s), n in classes.items():
        total += n * (t_steps * w * s)
    return _num(total)


def s_ace(net: NetworkSpec):
    """Arithmetic effort in bit-operations per inference."""
    return s_ace_from_classes(count_macs(net), net.allocation.t_steps)


def ns_ace_from_classes(classes: dict, rates: dict, t_steps: int) -> float:
    """S-ACE with each (w, s) class scaled by its input firing rate."""
    total = 0.0
    for key, n in classes.items():
        if key not in rates:
            raise ValueError(f"no firing rate supplied for MAC class {key}")
        r = float(rates[key])
        if not 0.0 <= r <= 1.0:
            raise ValueError(f"firing rate for class {key} outside [0, 1]: {r}")
        total += r * n * (t_steps * key[0] * key[1])
    return total


def ns_ace(net: NetworkSpec, firing_rates) -> float:
    """Event-driven effort: only nonzero spikes trigger work.

    firing_rates is a mapping from (w_bits, s_bits) class to rate, or a
    sequence with one rate per class in sorted class order.
    """
    classes = count_macs(net)
    if not isinstance(firing_rates, dict):
        keys = sorted(classes)
        rates_list = list(firing_rates)
        if len(rates_list) != len(keys):
            raise ValueError(
                f"{len(keys)} MAC classes but {len(rates_list)} firing rates"
            )
        firing_rates = dict(zip(keys, rates_list))
    return ns_ace_from_classes(classes, firing_rates, net.allocation.t_steps)


def param_bits(net: NetworkSpec) -> tuple[int, float]:
    """Total weight storage bits and its float16-equivalent in millions."""
    bits = 0
    if net.param_classes is not None:
        for pc in net.param_classes:
            bits += int(pc["count"]) * int(pc["w_bits"])
    else:
        for li in net.weight_layers():
            layer = net.layers[li]
            w_bits = layer.w_bits or net.allocation.w_bits
            bits += layer.weight.data.size * w_bits
    return bits, bits / 16.0 / 1e6


def profile_firing_rates(net: NetworkSpec, samples, sequence: bool = False) -> list[float]:
    """Mean firing rate per neuron layer over a batch of samples.

    A (neuron, step, sample) slot counts as firing when its level is
    nonzero; graded levels > 1 still count once.
    """
    arr = samples.data if isinstance(samples, RealTensor) else np.asarray(samples, dtype=np.float64)
    n = arr.shape[1] if sequence else arr.shape[0]
    if n == 0:
        raise ValueError("cannot profile an empty sample set")
    _, trace = forward(net, RealTensor(arr), sequence=sequence)
    return trace.firing_rates()


def _class_rates_from_trace(net: NetworkSpec, trace) -> dict:
    nz: dict = {}
    slots: dict = {}
    for pos, li in enumerate(trace.weight_layer_ids):
        key = net.layer_class(net.layers[li])
        nz[key] = nz.get(key, 0) + trace.input_nonzero[pos]
        slots[key] = slots.get(key, 0) + trace.input_slots[pos]
    return {key: (nz[key] / slots[key] if slots[key] else 0.0) for key in nz}


def class_firing_rates(net: NetworkSpec, samples, sequence: bool = False) -> dict:
    """Nonzero input fraction pooled per (w_bits, s_bits) MAC class."""
    arr = samples.data if isinstance(samples, RealTensor) else np.asarray(samples, dtype=np.float64)
    _, trace = forward(net, RealTensor(arr), sequence=sequence)
    return _class_rates_from_trace(net, trace)


@dataclass
class CostReport:
    """Flat cost summary for one network under one allocation."""

    w_bits: int
    s_bits: int
    t_steps: int
    bit_budget: int
    params_bits: int
    params_f16_equiv: float
    sops: float
    s_ace: float
    ns_ace: float | None = None
    acc: float | None = None
    per_layer_firing_rate: list | None = None

    def __post_init__(self):
        if self.ns_ace is not None and self.ns_ace > self.s_ace + 1e-9:
            raise ValueError(
                f"NS-ACE {self.ns_ace} exceeds S-ACE {self.s_ace}; rates outside [0, 1]?"
            )
        if self.per_layer_firing_rate is not None:
            for r in self.per_layer_firing_rate:
                if not 0.0 <= r <= 1.0:
                    raise ValueError(f"firing rate outside [0, 1]: {r}")

    @property
    def fr_mean(self) -> float | None:
        if not self.per_layer_firing_rate:
            return None
        return float(np.mean(self.per_layer_firing_rate))

    def to_json_dict(self) -> dict:
        return {
            "w_bits": self.w_bits,
            "s_bits": self.s_bits,
            "t_steps": self.t_steps,
            "bit_budget": self.bit_budget,
            "params_bits": self.params_bits,
            "params_f16_equiv_millions": self.params_f16_equiv,
            "sops": self.sops,
            "s_ace": self.s_ace,
            "ns_ace": self.ns_ace,
            "acc": self.acc,
            "per_layer_firing_rate": self.per_layer_firing_rate,
            "fr_mean": self.fr_mean,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), sort_keys=True)

    def csv_row(self) -> str:
        def cell(v):
            return "" if v is None else repr(v) if isinstance(v, float) else str(v)
        return ",".join([
            str(self.w_bits), str(self.s_bits), str(self.t_steps),
            str(self.bit_budget), str(self.params_bits),
            cell(self.sops), cell(self.s_ace), cell(self.ns_ace),
            cell(self.acc), cell(self.fr_mean),
        ])


def cost_report(net: NetworkSpec, samples=None, sequence: bool = False,
                acc: float | None = None) -> CostReport:
    """Assemble the full report; firing-dependent fields need samples."""
    alloc = net.allocation
    bits, _f16 = param_bits(net)
    layer_rates = None
    ns = None
    if samples is not None:
        arr = samples.data if isinstance(samples, RealTensor) else np.asarray(samples, dtype=np.float64)
        _, trace = forward(net, RealTensor(arr), sequence=sequence)
        layer_rates = trace.firing_rates()
        ns = ns_ace_from_classes(
            count_macs(net), _class_rates_from_trace(net, trace), alloc.t_steps,
        )
    return CostReport(
        w_bits=alloc.w_bits, s_bits=alloc.s_bits, t_steps=alloc.t_steps,
        bit_budget=bit_budget(alloc),
        params_bits=bits, params_f16_equiv=bits / 16.0 / 1e6,
        sops=sops(net), s_ace=s_ace(net), ns_ace=ns, acc=acc,
        per_layer_firing_rate=layer_rates,
    )


def cost_csv_rows(reports, config: dict | None = None,
                  extra_header: str = "", extra_cells=None) -> str:
    """Render reports as CSV with a provenance comment line, a header, and
    one row per report. extra_header/extra_cells append columns (sweeps add
    seed and epochs)."""
    lines = []
    if config is not None:
        lines.append("# config: " + json.dumps(config, sort_keys=True))
    header = COST_CSV_HEADER + ("," + extra_header if extra_header else "")
    lines.append(header)
    for i, rep in enumerate(reports):
        row = rep.csv_row()
        if extra_cells is not None:
            row += "," + extra_cells[i]
        lines.append(row)
    return "\n".join(lines) + "\n"
