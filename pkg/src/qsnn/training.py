"""Surrogate-gradient training (BPTT through all T steps) with
quantization-aware weight updates, plus allocation sweeps.

Forward passes use the quantized weights; the backward pass applies the
rectangular surrogate at every spike point and the straight-through
estimator at the weight quantizer, updating real-valued shadow weights
that are re-quantized after every batch.

A second, "relaxed" forward mode replaces each neuron's emission with the
piecewise-linear antiderivative of its surrogate (a smooth staircase) and
carries the subtract reset differentiably. BPTT on the relaxed network is
its exact gradient, which is what the finite-difference check validates.
"""

from __future__ import annotations

import json
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from . import kernels
from .costs import CostReport, cost_csv_rows, cost_report
from .datasets import Dataset
from .network import BitAllocation, NetworkSpec, encode_static, forward
from .neuron import staircase_surrogate
from .quantize import ste_backward
from .tensors import RealTensor, col2im, im2col

__all__ = [
    "TrainConfig",
    "RunRecord",
    "DivergenceError",
    "AllocationBudgetError",
    "train",
    "evaluate",
    "sweep_allocations",
    "sweep_csv",
    "training_forward",
    "loss_and_grads",
    "finite_difference_grads",
]

OPTIMIZERS = ("adam-style", "sgd-momentum")
LOSSES = ("cross-entropy-on-logits",)


class DivergenceError(RuntimeError):
    """Training loss left the finite range."""


class AllocationBudgetError(ValueError):
    """A sweep candidate's W*S*T does not match the declared budget."""


@dataclass
class TrainConfig:
    epochs: int = 10
    batch_size: int = 32
    learning_rate: float = 5e-4
    seed: int = 0
    optimizer: str = "adam-style"
    loss: str = "cross-entropy-on-logits"
    allocation: BitAllocation | None = None
    dataset: str = ""
    strict_deterministic: bool = False

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.learning_rate < 0:
            raise ValueError(f"learning_rate must be >= 0, got {self.learning_rate}")
        if self.optimizer not in OPTIMIZERS:
            raise ValueError(f"optimizer must be one of {OPTIMIZERS}, got {self.optimizer!r}")
        if self.loss not in LOSSES:
            raise ValueError(f"loss must be one of {LOSSES}, got {self.loss!r}")

    def to_json_dict(self) -> dict:
        d = asdict(self)
        d["allocation"] = str(self.allocation) if self.allocation else None
        return d


@dataclass
class RunRecord:
    """Everything one training run produced, serializable to JSON.

    wall_time_s is None when the run was strict-deterministic, keeping the
    serialized record byte-identical across same-seed runs.
    """

    config: dict
    train_loss: list = field(default_factory=list)
    test_acc: list = field(default_factory=list)
    cost: CostReport | None = None
    wall_time_s: float | None = None
    backend: str = ""

    @property
    def final_acc(self) -> float | None:
        return self.test_acc[-1] if self.test_acc else None

    def to_json_dict(self) -> dict:
        return {
            "config": self.config,
            "train_loss": self.train_loss,
            "test_acc": self.test_acc,
            "final_acc": self.final_acc,
            "cost": self.cost.to_json_dict() if self.cost else None,
            "wall_time_s": self.wall_time_s,
            "backend": self.backend,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), sort_keys=True)


# --- forward/backward with caches ------------------------------------------

def _layer_weight(layer, relaxed: bool) -> np.ndarray:
    if relaxed:
        return layer.weight.data
    return layer.quantized.dequantized().data


def _smooth_emission(u: np.ndarray, p) -> np.ndarray:
    """v_th * sum_k clip((u - k*v_th)/alpha + 1/2, 0, 1): the ramp staircase
    whose derivative is the rectangular surrogate at every jump."""
    total = np.zeros_like(u)
    for k in range(1, p.level_cap + 1):
        total += np.clip((u - k * p.v_th) / p.surrogate_width + 0.5, 0.0, 1.0)
    return total * p.v_th


def _smooth_emission_grad(u: np.ndarray, p) -> np.ndarray:
    total = np.zeros_like(u)
    for k in range(1, p.level_cap + 1):
        r = (u - k * p.v_th) / p.surrogate_width + 0.5
        total += ((r > 0.0) & (r < 1.0)).astype(np.float64)
    return total * (p.v_th / p.surrogate_width)


def _spike_surrogate_grad(u: np.ndarray, p) -> np.ndarray:
    """d(emitted value)/du for the spiking forward: v_th per unit level."""
    return staircase_surrogate(u, p) * p.v_th


def training_forward(net: NetworkSpec, x_steps: np.ndarray, relaxed: bool = False):
    """Forward over T steps keeping every intermediate needed by backward.

    x_steps: float64 [T, b, *input_shape]. Returns (logits [b, C], caches).
    """
    T = net.allocation.t_steps
    if x_steps.shape[0] != T:
        raise ValueError(f"x_steps has {x_steps.shape[0]} steps, allocation says {T}")
    batch = x_steps.shape[1]
    states = {i: np.full((batch,) + net.layers[i].out_shape,
                         net.layers[i].neuron.v_rst, dtype=np.float64)
              for i in net.neuron_layers()}
    caches = []
    step_outputs = []
    for t in range(T):
        h = x_steps[t]
        step_cache = []
        for li, layer in enumerate(net.layers):
            entry = {"kind": layer.kind}
            if layer.kind == "dense":
                entry["x"] = h
                z = h @ _layer_weight(layer, relaxed)
            elif layer.kind == "conv2d":
                w = _layer_weight(layer, relaxed)
                cols, h_out, w_out = im2col(h, w.shape[2], w.shape[3],
                                            layer.stride, layer.padding)
                entry["cols"] = cols
                entry["x_shape"] = h.shape
                km = w.reshape(w.shape[0], -1)
                z = (km @ cols).reshape(batch, w.shape[0], h_out, w_out)
            elif layer.kind == "pooling":
                entry["in_shape"] = h.shape
                b_, c_, hh, ww = h.shape
                h2, w2 = hh // layer.window, ww // layer.window
                z = h[:, :, :h2 * layer.window, :w2 * layer.window] \
                    .reshape(b_, c_, h2, layer.window, w2, layer.window).mean(axis=(3, 5))
            else:  # flatten
                entry["in_shape"] = h.shape
                z = h.reshape(batch, -1)

            if layer.neuron is not None:
                p = layer.neuron
                u = states[li] * (1.0 / p.tau) + z
                entry["u"] = u
                if relaxed:
                    out = _smooth_emission(u, p)
                    states[li] = u - out
                    entry["relaxed"] = True
                else:
                    v = states[li].reshape(-1).copy()
                    levels = np.empty(v.size, dtype=np.int64)
                    kernels.fused_step(
                        v, np.ascontiguousarray(z.reshape(-1)), levels,
                        1.0 / p.tau, p.v_th, p.v_rst,
                        p.reset_mode == "hard", p.level_cap,
                    )
                    states[li] = v.reshape(states[li].shape)
                    lv = levels.reshape(u.shape)
                    entry["fired"] = lv > 0
                    out = lv.astype(np.float64) * p.v_th
                is_last = li == len(net.layers) - 1
                if is_last:
                    # spike-count decoding sees levels, not level*v_th
                    h = out / p.v_th
                    entry["decoder_scale"] = 1.0 / p.v_th
                else:
                    h = out
            else:
                h = z
            step_cache.append(entry)
        caches.append(step_cache)
        step_outputs.append(h)
    logits = np.sum(step_outputs, axis=0)
    return logits, caches


def training_backward(net: NetworkSpec, caches, dlogits: np.ndarray,
                      relaxed: bool = False) -> dict:
    """BPTT from dL/dlogits to per-layer weight gradients.

    Gradients are with respect to the weights the forward actually used
    (quantized in normal mode, raw in relaxed mode); the STE mapping onto
    shadow weights happens in the update step.
    """
    T = len(caches)
    grads = {li: np.zeros_like(net.layers[li].weight.data)
             for li in net.weight_layers()}
    dv_next = {li: 0.0 for li in net.neuron_layers()}
    for t in range(T - 1, -1, -1):
        dh = dlogits.copy()
        for li in range(len(net.layers) - 1, -1, -1):
            layer = net.layers[li]
            entry = caches[t][li]
            if layer.neuron is not None:
                p = layer.neuron
                u = entry["u"]
                scale = entry.get("decoder_scale", 1.0)
                dout = dh * scale
                if relaxed:
                    g = _smooth_emission_grad(u, p)
                    du = dout * g + dv_next[li] * (1.0 - g)
                else:
                    g = _spike_surrogate_grad(u, p)
                    if p.reset_mode == "hard":
                        carry = dv_next[li] * (~entry["fired"]).astype(np.float64)
                    else:
                        # subtract reset: the emitted amount is detached
                        carry = dv_next[li]
                    du = dout * g + carry
                dv_next[li] = du * (1.0 / p.tau)
                dz = du
            else:
                dz = dh

            if layer.kind == "dense":
                x = entry["x"]
                grads[li] += x.T @ dz
                dh = dz @ _layer_weight(layer, relaxed).T
            elif layer.kind == "conv2d":
                w = _layer_weight(layer, relaxed)
                c_out = w.shape[0]
                dz_flat = dz.reshape(dz.shape[0], c_out, -1)
                cols = entry["cols"]
                grads[li] += np.einsum("bol,bfl->of", dz_flat, cols).reshape(w.shape)
                km = w.reshape(c_out, -1)
                dcols = np.einsum("of,bol->bfl", km, dz_flat)
                dh = col2im(dcols, entry["x_shape"], w.shape[2], w.shape[3],
                            layer.stride, layer.padding)
            elif layer.kind == "pooling":
                b_, c_, hh, ww = entry["in_shape"]
                win = layer.window
                h2, w2 = hh // win, ww // win
                up = np.repeat(np.repeat(dz, win, axis=2), win, axis=3) / (win * win)
                dh = np.zeros(entry["in_shape"], dtype=np.float64)
                dh[:, :, :h2 * win, :w2 * win] = up
            else:  # flatten
                dh = dz.reshape(entry["in_shape"])
    return grads


def _softmax(z: np.ndarray) -> np.ndarray:
    zs = z - z.max(axis=1, keepdims=True)
    e = np.exp(zs)
    return e / e.sum(axis=1, keepdims=True)


def cross_entropy(logits: np.ndarray, y: np.ndarray):
    """Mean cross-entropy and its gradient with respect to logits."""
    n = logits.shape[0]
    p = _softmax(logits)
    eps = 1e-12
    loss = -float(np.mean(np.log(p[np.arange(n), y] + eps)))
    grad = p.copy()
    grad[np.arange(n), y] -= 1.0
    return loss, grad / n


def loss_and_grads(net: NetworkSpec, x_steps: np.ndarray, y: np.ndarray,
                   relaxed: bool = False):
    logits, caches = training_forward(net, x_steps, relaxed=relaxed)
    loss, dlogits = cross_entropy(logits, y)
    grads = training_backward(net, caches, dlogits, relaxed=relaxed)
    return loss, grads


def finite_difference_grads(net: NetworkSpec, x_steps: np.ndarray, y: np.ndarray,
                            step: float = 1e-4) -> dict:
    """Central differences of the relaxed-forward loss per weight entry."""
    def loss_only():
        logits, _ = training_forward(net, x_steps, relaxed=True)
        loss, _ = cross_entropy(logits, y)
        return loss

    out = {}
    for li in net.weight_layers():
        w = net.layers[li].weight.data
        g = np.zeros_like(w)
        flat = w.reshape(-1)
        gflat = g.reshape(-1)
        for i in range(flat.size):
            keep = flat[i]
            flat[i] = keep + step
            up = loss_only()
            flat[i] = keep - step
            down = loss_only()
            flat[i] = keep
            gflat[i] = (up - down) / (2.0 * step)
        out[li] = g
    return out


# --- optimizers ------------------------------------------------------------

class _Adam:
    def __init__(self, lr: float, beta1: float = 0.9, beta2: float = 0.999,
                 eps: float = 1e-8):
        self.lr, self.b1, self.b2, self.eps = lr, beta1, beta2, eps
        self.m: dict = {}
        self.v: dict = {}
        self.t = 0

    def step(self, params: dict, grads: dict) -> None:
        self.t += 1
        for key, w in params.items():
            g = grads[key]
            m = self.m.setdefault(key, np.zeros_like(w))
            v = self.v.setdefault(key, np.zeros_like(w))
            m[:] = self.b1 * m + (1.0 - self.b1) * g
            v[:] = self.b2 * v + (1.0 - self.b2) * (g * g)
            mhat = m / (1.0 - self.b1 ** self.t)
            vhat = v / (1.0 - self.b2 ** self.t)
            w -= self.lr * mhat / (np.sqrt(vhat) + self.eps)


class _SGDMomentum:
    def __init__(self, lr: float, momentum: float = 0.9):
        self.lr, self.mu = lr, momentum
        self.vel: dict = {}

    def step(self, params: dict, grads: dict) -> None:
        for key, w in params.items():
            v = self.vel.setdefault(key, np.zeros_like(w))
            v[:] = self.mu * v - self.lr * grads[key]
            w += v


def _make_optimizer(cfg: TrainConfig):
    if cfg.optimizer == "adam-style":
        return _Adam(cfg.learning_rate)
    return _SGDMomentum(cfg.learning_rate)


# --- data plumbing ---------------------------------------------------------

def _split_tensors(net: NetworkSpec, data: Dataset, split: str):
    """(inputs ready for the network, labels, is_sequence) for one split."""
    if data.kind == "static-images":
        x, y = data.static_arrays(split)
        return x, y, False
    x, y = data.event_tensors(split, net.allocation.t_steps)
    return x, y, True


def _steps_for_batch(net: NetworkSpec, x: np.ndarray, sequence: bool) -> np.ndarray:
    if sequence:
        # stored [n, T, ...] per sample; training wants [T, n, ...]
        return np.ascontiguousarray(np.swapaxes(x, 0, 1))
    return encode_static(RealTensor(x), net.allocation, net.encoder).data


def evaluate(net: NetworkSpec, data: Dataset, split: str = "test",
             batch_size: int = 256) -> float:
    """Deterministic top-1 accuracy over a split."""
    idx = data.split(split)
    if idx.size == 0:
        raise ValueError(f"split {split!r} is empty")
    x, y, sequence = _split_tensors(net, data, split)
    hits = 0
    for start in range(0, len(y), batch_size):
        xb = x[start:start + batch_size]
        if sequence:
            logits, _ = forward(net, RealTensor(np.swapaxes(xb, 0, 1)), sequence=True)
        else:
            logits, _ = forward(net, RealTensor(xb))
        hits += int(np.sum(np.argmax(logits.data, axis=1) == y[start:start + batch_size]))
    return hits / len(y)


# --- the training loop -----------------------------------------------------

def train(cfg: TrainConfig, net: NetworkSpec, data: Dataset, probe=None):
    """Quantization-aware surrogate-gradient training.

    Returns (net, RunRecord). The net is trained in place (shadow weights
    updated, integer codes refreshed after every batch). probe, when given,
    is called as probe(net, epoch, batch_index) right after each forward
    pass; tests use it to watch invariants mid-run.
    """
    t0 = time.perf_counter()
    rng = np.random.default_rng(cfg.seed)
    x_train, y_train, sequence = _split_tensors(net, data, "train")
    n = len(y_train)
    if n == 0:
        raise ValueError("train split is empty")
    eval_split = "test" if data.test_idx.size else "train"
    optimizer = _make_optimizer(cfg)
    record = RunRecord(config=cfg.to_json_dict(), backend=kernels.backend_name())

    for epoch in range(cfg.epochs):
        perm = rng.permutation(n)
        losses = []
        for bi, start in enumerate(range(0, n, cfg.batch_size)):
            take = perm[start:start + cfg.batch_size]
            xb = x_train[take]
            yb = y_train[take]
            x_steps = _steps_for_batch(net, xb, sequence)
            loss, gradsq = loss_and_grads(net, x_steps, yb, relaxed=False)
            if probe is not None:
                probe(net, epoch, bi)
            if not np.isfinite(loss):
                raise DivergenceError(
                    f"loss diverged to {loss} at epoch {epoch} batch {bi}"
                )
            losses.append(loss)
            # STE: route the quantized-weight gradient onto the shadows,
            # zeroed where the shadow sits outside the clamp range.
            params = {}
            grads = {}
            for li in net.weight_layers():
                layer = net.layers[li]
                g = ste_backward(RealTensor(gradsq[li]), layer.weight,
                                 layer.quantized.scheme).data
                params[li] = layer.weight.data
                grads[li] = g
            optimizer.step(params, grads)
            for li in net.weight_layers():
                layer = net.layers[li]
                bits = layer.w_bits or net.allocation.w_bits
                if bits == 1:
                    # binary nets keep shadows in the unit interval
                    np.clip(layer.weight.data, -1.0, 1.0, out=layer.weight.data)
            net.requantize()
        record.train_loss.append(float(np.mean(losses)))
        record.test_acc.append(evaluate(net, data, split=eval_split))

    record.cost = cost_report(
        net,
        samples=(np.swapaxes(x_train[: min(n, 256)], 0, 1) if sequence
                 else x_train[: min(n, 256)]),
        sequence=sequence,
        acc=record.final_acc,
    )
    record.wall_time_s = None if cfg.strict_deterministic else time.perf_counter() - t0
    return net, record


def sweep_allocations(budget: int, candidates, cfg: TrainConfig, data: Dataset,
                      net_builder, seeds=None, override: bool = False):
    """Train one model per (candidate allocation, seed).

    net_builder(allocation, seed) must return a fresh NetworkSpec. Every
    candidate must satisfy W*S*T == budget unless override is set. Returns
    a list of (allocation, seed, RunRecord), ordered by candidate then
    seed.
    """
    seeds = list(seeds) if seeds is not None else [cfg.seed]
    for alloc in candidates:
        if alloc.product != budget and not override:
            raise AllocationBudgetError(
                f"allocation {alloc} has product {alloc.product}, budget is {budget}"
            )
    out = []
    for alloc in candidates:
        for seed in seeds:
            run_cfg = TrainConfig(**{**asdict(cfg), "allocation": alloc, "seed": seed})
            net = net_builder(alloc, seed)
            _, record = train(run_cfg, net, data)
            out.append((alloc, seed, record))
    return out


def sweep_csv(results, config: dict | None = None) -> str:
    """Render sweep results with the cost columns plus seed and epochs."""
    reports = []
    extra = []
    for alloc, seed, record in results:
        reports.append(record.cost)
        extra.append(f"{seed},{record.config['epochs']}")
    return cost_csv_rows(reports, config=config, extra_header="seed,epochs",
                         extra_cells=extra)
