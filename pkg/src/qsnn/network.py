"""Network assembly and temporal execution.

A NetworkSpec is an ordered layer list plus one (W, S, T) bit allocation:
weights quantized to W bits, neurons emitting S-bit spike levels, forward
running exactly T steps. Static inputs are turned into per-step currents by
an encoder; logits come from a decoder over the per-step outputs.
"""

from __future__ import annotations

import base64
import json
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .neuron import NeuronParams
from .quantize import QuantizedWeights, quantize_weights
from .tensors import RealTensor, ShapeError, conv2d_batch

__all__ = [
    "BitAllocation",
    "AllocationError",
    "LayerSpec",
    "NetworkSpec",
    "ForwardTrace",
    "forward",
    "encode_static",
    "count_macs",
    "dense_layer",
    "conv_layer",
    "pooling_layer",
    "flatten_layer",
    "build_mlp",
    "build_cnn",
    "save_network",
    "load_network",
    "network_to_json_dict",
    "network_from_json_dict",
]

ENCODERS = ("direct-current", "level-quantized")
DECODERS = ("membrane-sum", "spike-count")
LAYER_KINDS = ("dense", "conv2d", "pooling", "flatten")


class AllocationError(ValueError):
    """A layer's bit usage is inconsistent with the network allocation."""


@dataclass(frozen=True)
class BitAllocation:
    """Weight bits, spike bits, and time steps; their product is the bit budget."""

    w_bits: int
    s_bits: int
    t_steps: int

    def __post_init__(self):
        for name in ("w_bits", "s_bits", "t_steps"):
            v = getattr(self, name)
            if not isinstance(v, int) or v < 1:
                raise ValueError(f"{name} must be an integer >= 1, got {v!r}")

    @property
    def product(self) -> int:
        return self.w_bits * self.s_bits * self.t_steps

    @classmethod
    def parse(cls, text: str) -> "BitAllocation":
        """Parse the W/S/T flag syntax, e.g. '8/2/2'."""
        parts = text.strip().split("/")
        if len(parts) != 3:
            raise ValueError(
                f"allocation must be W/S/T (three integers), got {text!r}"
            )
        try:
            w, s, t = (int(p) for p in parts)
        except ValueError:
            raise ValueError(f"allocation parts must be integers, got {text!r}") from None
        return cls(w, s, t)

    def __str__(self):
        return f"{self.w_bits}/{self.s_bits}/{self.t_steps}"


@dataclass
class LayerSpec:
    """One layer: dense/conv2d carry weights and optionally a neuron
    population on their output; pooling/flatten are shape plumbing."""

    kind: str
    weight: RealTensor | None = None
    neuron: NeuronParams | None = None
    stride: int = 1
    padding: int = 0
    window: int = 2
    w_bits: int | None = None   # per-layer override of allocation.w_bits
    s_bits: int | None = None   # per-layer override of the input spike class
    in_shape: tuple | None = None
    out_shape: tuple | None = None
    quantized: QuantizedWeights | None = None

    def has_weight(self) -> bool:
        return self.kind in ("dense", "conv2d")


def _init_weight(rng: np.random.Generator, shape: tuple, fan_in: int) -> RealTensor:
    bound = 1.0 / np.sqrt(fan_in)
    return RealTensor(rng.uniform(-bound, bound, size=shape))


def dense_layer(in_features: int, out_features: int, neuron: NeuronParams | None = None,
                weight: RealTensor | None = None,
                rng: np.random.Generator | None = None) -> LayerSpec:
    if weight is None:
        rng = rng if rng is not None else np.random.default_rng(0)
        weight = _init_weight(rng, (in_features, out_features), in_features)
    if tuple(weight.data.shape) != (in_features, out_features):
        raise ShapeError(
            f"dense weight must be [{in_features}, {out_features}], got {weight.shape}"
        )
    return LayerSpec(kind="dense", weight=weight, neuron=neuron)


def conv_layer(in_channels: int, out_channels: int, kernel: int,
               stride: int = 1, padding: int = 0,
               neuron: NeuronParams | None = None,
               weight: RealTensor | None = None,
               rng: np.random.Generator | None = None) -> LayerSpec:
    shape = (out_channels, in_channels, kernel, kernel)
    if weight is None:
        rng = rng if rng is not None else np.random.default_rng(0)
        weight = _init_weight(rng, shape, in_channels * kernel * kernel)
    if tuple(weight.data.shape) != shape:
        raise ShapeError(f"conv weight must be {shape}, got {weight.shape}")
    return LayerSpec(kind="conv2d", weight=weight, neuron=neuron,
                     stride=stride, padding=padding)


def pooling_layer(window: int = 2) -> LayerSpec:
    if window < 1:
        raise ValueError(f"pooling window must be >= 1, got {window}")
    return LayerSpec(kind="pooling", window=window)


def flatten_layer() -> LayerSpec:
    return LayerSpec(kind="flatten")


@dataclass
class NetworkSpec:
    """Ordered layers plus allocation, encoder, and decoder.

    A spec may instead carry ``mac_classes``/``param_classes`` stubs (lists
    of {w_bits, s_bits, macs_per_step} / {w_bits, count}) for cost
    accounting without materialized layers; such stubs cannot run forward.
    """

    layers: list
    allocation: BitAllocation
    input_shape: tuple = ()
    encoder: str = "direct-current"
    decoder: str = "membrane-sum"
    quant_rule: str = "max-abs"
    mac_classes: list | None = None
    param_classes: list | None = None

    def __post_init__(self):
        if self.encoder not in ENCODERS:
            raise ValueError(f"encoder must be one of {ENCODERS}, got {self.encoder!r}")
        if self.decoder not in DECODERS:
            raise ValueError(f"decoder must be one of {DECODERS}, got {self.decoder!r}")
        self.input_shape = tuple(int(d) for d in self.input_shape)
        if self.layers:
            self._validate_allocation()
            self.resolve_shapes()
            self.requantize()
            if self.decoder == "membrane-sum" and self.layers[-1].neuron is not None:
                raise ValueError(
                    "membrane-sum decoding needs a neuron-free output layer"
                )
            if self.decoder == "spike-count" and self.layers[-1].neuron is None:
                raise ValueError(
                    "spike-count decoding needs a spiking output layer"
                )
        elif self.mac_classes is None:
            raise ValueError("a network needs layers (or mac_classes for a cost stub)")

    def _validate_allocation(self):
        for i, layer in enumerate(self.layers):
            if layer.neuron is not None and layer.neuron.spike_bits != self.allocation.s_bits:
                raise AllocationError(
                    f"layer {i} emits {layer.neuron.spike_bits}-bit spikes but the "
                    f"allocation says S={self.allocation.s_bits}"
                )

    def resolve_shapes(self):
        if not self.input_shape:
            raise ShapeError("network needs an input_shape to resolve layers")
        shape = self.input_shape
        for i, layer in enumerate(self.layers):
            layer.in_shape = shape
            if layer.kind == "dense":
                if len(shape) != 1:
                    raise ShapeError(
                        f"layer {i}: dense input must be flat, got {shape} "
                        "(insert a flatten layer)"
                    )
                f_in, f_out = layer.weight.data.shape
                if shape[0] != f_in:
                    raise ShapeError(
                        f"layer {i}: dense expects {f_in} features, got {shape[0]}"
                    )
                shape = (f_out,)
            elif layer.kind == "conv2d":
                if len(shape) != 3:
                    raise ShapeError(
                        f"layer {i}: conv input must be [c, h, w], got {shape}"
                    )
                c_out, c_in, kh, kw = layer.weight.data.shape
                c, h, w = shape
                if c != c_in:
                    raise ShapeError(
                        f"layer {i}: conv expects {c_in} channels, got {c}"
                    )
                hp, wp = h + 2 * layer.padding, w + 2 * layer.padding
                if kh > hp or kw > wp:
                    raise ShapeError(
                        f"layer {i}: kernel {kh}x{kw} larger than padded input {hp}x{wp}"
                    )
                h_out = (hp - kh) // layer.stride + 1
                w_out = (wp - kw) // layer.stride + 1
                shape = (c_out, h_out, w_out)
            elif layer.kind == "pooling":
                if len(shape) != 3:
                    raise ShapeError(
                        f"layer {i}: pooling input must be [c, h, w], got {shape}"
                    )
                c, h, w = shape
                shape = (c, h // layer.window, w // layer.window)
            elif layer.kind == "flatten":
                shape = (int(np.prod(shape)),)
            else:
                raise ValueError(f"layer {i}: unknown kind {layer.kind!r}")
            layer.out_shape = shape

    def requantize(self):
        """Refresh every layer's integer codes from its real weights."""
        for layer in self.layers:
            if layer.has_weight():
                bits = layer.w_bits or self.allocation.w_bits
                layer.quantized = quantize_weights(
                    layer.weight, bits, rule=self.quant_rule,
                    t_steps=self.allocation.t_steps,
                )

    @property
    def num_classes(self) -> int:
        return self.layers[-1].out_shape[0]

    def neuron_layers(self) -> list[int]:
        return [i for i, l in enumerate(self.layers) if l.neuron is not None]

    def weight_layers(self) -> list[int]:
        return [i for i, l in enumerate(self.layers) if l.has_weight()]

    def layer_class(self, layer: LayerSpec) -> tuple[int, int]:
        """The (w_bits, s_bits) accounting class of a weight layer's MACs."""
        return (
            layer.w_bits or self.allocation.w_bits,
            layer.s_bits or self.allocation.s_bits,
        )


@dataclass
class ForwardTrace:
    """Per-layer spike history and instrumentation from one forward call."""

    spikes: list = field(default_factory=list)        # per neuron layer: int64 [T, b, ...]
    neuron_layer_ids: list = field(default_factory=list)
    steps_run: int = 0
    neuron_updates: list = field(default_factory=list)  # updates per neuron layer
    step_outputs: list = field(default_factory=list)    # per step: float [b, classes]
    input_nonzero: list = field(default_factory=list)   # per weight layer: nonzero slots
    input_slots: list = field(default_factory=list)     # per weight layer: total slots
    weight_layer_ids: list = field(default_factory=list)

    def firing_rates(self) -> list[float]:
        """Fraction of (sample, step, neuron) slots with a nonzero level,
        one entry per neuron layer."""
        return [float(np.count_nonzero(s)) / s.size for s in self.spikes]

    def input_rates(self) -> list[float]:
        """Nonzero fraction of each weight layer's input, pooled over steps."""
        return [n / s if s else 0.0 for n, s in zip(self.input_nonzero, self.input_slots)]


def encode_static(image: RealTensor, allocation: BitAllocation,
                  mode: str = "direct-current") -> RealTensor:
    """Turn a static [0,1] image (optionally batched) into T per-step currents.

    direct-current repeats the pixel value at every step; level-quantized
    presents the S-bit level floor(pixel * (2^S - 1)) at step 1 and zeros
    after.
    """
    if mode not in ENCODERS:
        raise ValueError(f"encoder must be one of {ENCODERS}, got {mode!r}")
    x = image.data
    if x.size and (x.min() < 0.0 or x.max() > 1.0):
        raise ValueError("pixel values must lie in [0, 1]")
    T = allocation.t_steps
    if mode == "direct-current":
        out = np.repeat(x[np.newaxis], T, axis=0)
    else:
        levels = np.floor(x * float((1 << allocation.s_bits) - 1))
        out = np.zeros((T,) + x.shape, dtype=np.float64)
        out[0] = levels
    return RealTensor(out)


def _avg_pool(h: np.ndarray, window: int) -> np.ndarray:
    b, c, hh, ww = h.shape
    h2, w2 = hh // window, ww // window
    trimmed = h[:, :, :h2 * window, :w2 * window]
    return trimmed.reshape(b, c, h2, window, w2, window).mean(axis=(3, 5))


def forward(net: NetworkSpec, x: RealTensor, sequence: bool = False):
    """Run T steps and decode logits.

    x is [batch, *input_shape] for a static input (encoded per the network's
    encoder) or [T, batch, *input_shape] when sequence=True (pre-binned
    per-step currents, e.g. event frames). Returns (logits, ForwardTrace).
    """
    if not net.layers:
        raise ValueError("this spec is a cost-only stub and cannot run forward")
    T = net.allocation.t_steps
    xarr = x.data
    if sequence:
        if xarr.shape[0] != T:
            raise ShapeError(
                f"sequence input has {xarr.shape[0]} steps but the allocation says T={T}"
            )
        steps = xarr
        batch = xarr.shape[1]
        sample_shape = tuple(xarr.shape[2:])
    else:
        steps = encode_static(x, net.allocation, net.encoder).data
        batch = xarr.shape[0]
        sample_shape = tuple(xarr.shape[1:])
    if sample_shape != net.input_shape:
        raise ShapeError(
            f"input sample shape {sample_shape} does not match network input "
            f"{net.input_shape}"
        )

    neuron_ids = net.neuron_layers()
    weight_ids = net.weight_layers()
    states = {i: np.full((batch,) + net.layers[i].out_shape,
                         net.layers[i].neuron.v_rst, dtype=np.float64)
              for i in neuron_ids}
    trace = ForwardTrace(
        spikes=[np.zeros((T, batch) + net.layers[i].out_shape, dtype=np.int64)
                for i in neuron_ids],
        neuron_layer_ids=list(neuron_ids),
        neuron_updates=[0] * len(neuron_ids),
        input_nonzero=[0] * len(weight_ids),
        input_slots=[0] * len(weight_ids),
        weight_layer_ids=list(weight_ids),
    )
    neuron_pos = {li: k for k, li in enumerate(neuron_ids)}
    weight_pos = {li: k for k, li in enumerate(weight_ids)}

    for t in range(T):
        h = steps[t]
        for li, layer in enumerate(net.layers):
            if layer.kind == "dense":
                trace.input_nonzero[weight_pos[li]] += int(np.count_nonzero(h))
                trace.input_slots[weight_pos[li]] += h.size
                z = h @ layer.quantized.dequantized().data
            elif layer.kind == "conv2d":
                trace.input_nonzero[weight_pos[li]] += int(np.count_nonzero(h))
                trace.input_slots[weight_pos[li]] += h.size
                z = conv2d_batch(h, layer.quantized.dequantized().data,
                                 stride=layer.stride, padding=layer.padding)
            elif layer.kind == "pooling":
                z = _avg_pool(h, layer.window)
            else:  # flatten
                z = h.reshape(batch, -1)

            if layer.neuron is not None:
                p = layer.neuron
                v = states[li].reshape(-1)
                levels = np.empty(v.shape[0], dtype=np.int64)
                kernels.fused_step(
                    v, np.ascontiguousarray(z.reshape(-1)), levels,
                    1.0 / p.tau, p.v_th, p.v_rst,
                    p.reset_mode == "hard", p.level_cap,
                )
                states[li] = v.reshape(states[li].shape)
                lv = levels.reshape((batch,) + layer.out_shape)
                k = neuron_pos[li]
                trace.spikes[k][t] = lv
                trace.neuron_updates[k] += 1
                if li == len(net.layers) - 1:
                    h = lv.astype(np.float64)     # spike-count decoder sees raw levels
                else:
                    h = lv.astype(np.float64) * p.v_th
            else:
                h = z
        trace.step_outputs.append(h)
        trace.steps_run += 1

    logits = np.sum(trace.step_outputs, axis=0)
    return RealTensor(logits), trace


def count_macs(net: NetworkSpec) -> dict:
    """Multiply-accumulate counts per step, keyed by (w_bits, s_bits)."""
    counts: dict = {}
    if net.mac_classes is not None:
        for mc in net.mac_classes:
            key = (int(mc["w_bits"]), int(mc["s_bits"]))
            counts[key] = counts.get(key, 0) + mc["macs_per_step"]
        return counts
    for li in net.weight_layers():
        layer = net.layers[li]
        if layer.out_shape is None:
            raise ShapeError(f"layer {li} has unresolved shapes")
        if layer.kind == "dense":
            f_in, f_out = layer.weight.data.shape
            macs = f_in * f_out
        else:
            c_out, c_in, kh, kw = layer.weight.data.shape
            _, h_out, w_out = layer.out_shape
            macs = c_out * h_out * w_out * c_in * kh * kw
        key = net.layer_class(layer)
        counts[key] = counts.get(key, 0) + macs
    return counts


# --- presets ---------------------------------------------------------------

def _neuron_for(allocation: BitAllocation, tau: float, v_th: float,
                reset_mode: str, surrogate_width: float) -> NeuronParams:
    return NeuronParams(tau=tau, v_th=v_th, v_rst=0.0, reset_mode=reset_mode,
                        spike_bits=allocation.s_bits,
                        surrogate_width=surrogate_width)


def build_mlp(allocation: BitAllocation, input_shape=(28, 28), hidden=(256,),
              classes: int = 10, seed: int = 0, tau: float = 2.0, v_th: float = 1.0,
              reset_mode: str = "hard", surrogate_width: float = 1.0,
              encoder: str = "direct-current", decoder: str = "membrane-sum",
              quant_rule: str = "max-abs") -> NetworkSpec:
    """Fully-connected stack: flatten, hidden spiking layers, linear readout."""
    rng = np.random.default_rng(seed)
    neuron = _neuron_for(allocation, tau, v_th, reset_mode, surrogate_width)
    layers = []
    in_features = int(np.prod(input_shape))
    if len(input_shape) > 1:
        layers.append(flatten_layer())
    prev = in_features
    for h in hidden:
        layers.append(dense_layer(prev, h, neuron=neuron, rng=rng))
        prev = h
    out_neuron = neuron if decoder == "spike-count" else None
    layers.append(dense_layer(prev, classes, neuron=out_neuron, rng=rng))
    return NetworkSpec(layers=layers, allocation=allocation,
                       input_shape=tuple(input_shape), encoder=encoder,
                       decoder=decoder, quant_rule=quant_rule)


def build_cnn(allocation: BitAllocation, input_shape=(1, 28, 28), classes: int = 10,
              channels=(8, 16), hidden: int = 64, seed: int = 0, tau: float = 2.0,
              v_th: float = 1.0, reset_mode: str = "hard",
              surrogate_width: float = 1.0, encoder: str = "direct-current",
              decoder: str = "membrane-sum",
              quant_rule: str = "max-abs") -> NetworkSpec:
    """Two conv blocks (3x3, pad 1, 2x2 average pool) and two dense layers."""
    rng = np.random.default_rng(seed)
    neuron = _neuron_for(allocation, tau, v_th, reset_mode, surrogate_width)
    c_in, h, w = input_shape
    layers = [
        conv_layer(c_in, channels[0], 3, padding=1, neuron=neuron, rng=rng),
        pooling_layer(2),
        conv_layer(channels[0], channels[1], 3, padding=1, neuron=neuron, rng=rng),
        pooling_layer(2),
        flatten_layer(),
    ]
    flat = channels[1] * (h // 4) * (w // 4)
    layers.append(dense_layer(flat, hidden, neuron=neuron, rng=rng))
    out_neuron = neuron if decoder == "spike-count" else None
    layers.append(dense_layer(hidden, classes, neuron=out_neuron, rng=rng))
    return NetworkSpec(layers=layers, allocation=allocation,
                       input_shape=tuple(input_shape), encoder=encoder,
                       decoder=decoder, quant_rule=quant_rule)


# --- serialization ---------------------------------------------------------

def _encode_array(arr: np.ndarray) -> dict:
    return {
        "dtype": str(arr.dtype),
        "shape": list(arr.shape),
        "b64": base64.b64encode(np.ascontiguousarray(arr).tobytes()).decode("ascii"),
    }


def _decode_array(d: dict) -> np.ndarray:
    raw = base64.b64decode(d["b64"])
    return np.frombuffer(raw, dtype=d["dtype"]).reshape(d["shape"]).copy()


def _neuron_to_dict(p: NeuronParams | None):
    if p is None:
        return None
    return {
        "tau": p.tau, "v_th": p.v_th, "v_rst": p.v_rst,
        "reset_mode": p.reset_mode, "spike_bits": p.spike_bits,
        "surrogate_width": p.surrogate_width,
    }


def _neuron_from_dict(d) -> NeuronParams | None:
    if d is None:
        return None
    return NeuronParams(**d)


def network_to_json_dict(net: NetworkSpec) -> dict:
    layers = []
    for layer in net.layers:
        d = {"kind": layer.kind}
        if layer.weight is not None:
            d["weight"] = _encode_array(layer.weight.data)
        if layer.kind == "conv2d":
            d["stride"] = layer.stride
            d["padding"] = layer.padding
        if layer.kind == "pooling":
            d["window"] = layer.window
        d["neuron"] = _neuron_to_dict(layer.neuron)
        if layer.w_bits is not None:
            d["w_bits"] = layer.w_bits
        if layer.s_bits is not None:
            d["s_bits"] = layer.s_bits
        layers.append(d)
    return {
        "format": "qsnn-network",
        "version": 1,
        "allocation": {
            "w_bits": net.allocation.w_bits,
            "s_bits": net.allocation.s_bits,
            "t_steps": net.allocation.t_steps,
        },
        "input_shape": list(net.input_shape),
        "encoder": net.encoder,
        "decoder": net.decoder,
        "quant_rule": net.quant_rule,
        "layers": layers,
        "mac_classes": net.mac_classes,
        "param_classes": net.param_classes,
    }


def network_from_json_dict(doc: dict) -> NetworkSpec:
    if doc.get("format") != "qsnn-network":
        raise ValueError("not a network document (missing format tag)")
    alloc = BitAllocation(**doc["allocation"])
    layers = []
    for d in doc.get("layers") or []:
        kind = d["kind"]
        weight = RealTensor(_decode_array(d["weight"])) if "weight" in d else None
        layer = LayerSpec(
            kind=kind, weight=weight, neuron=_neuron_from_dict(d.get("neuron")),
            stride=d.get("stride", 1), padding=d.get("padding", 0),
            window=d.get("window", 2),
            w_bits=d.get("w_bits"), s_bits=d.get("s_bits"),
        )
        layers.append(layer)
    return NetworkSpec(
        layers=layers, allocation=alloc,
        input_shape=tuple(doc.get("input_shape") or ()),
        encoder=doc.get("encoder", "direct-current"),
        decoder=doc.get("decoder", "membrane-sum"),
        quant_rule=doc.get("quant_rule", "max-abs"),
        mac_classes=doc.get("mac_classes"),
        param_classes=doc.get("param_classes"),
    )


def save_network(net: NetworkSpec, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(network_to_json_dict(net), fh, sort_keys=True)
        fh.write("\n")


def load_network(path) -> NetworkSpec:
    with open(path, "r", encoding="utf-8") as fh:
        return network_from_json_dict(json.load(fh))
