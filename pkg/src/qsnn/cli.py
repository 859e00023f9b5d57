"""Command-line front end: train/eval/cost/sweep/equiv-check/profile/gen-data.

Configuration comes from an optional JSON file (--config) with individual
flags overriding file values. Every artifact a verb writes embeds the fully
resolved configuration: JSON outputs carry a "config" object, CSV outputs a
leading "# config: {...}" comment line.

Exit codes: 0 success, 2 usage or configuration error, 3 runtime failure,
4 verification failure (equiv-check found a mismatch).
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .costs import cost_csv_rows, cost_report
from .datasets import (
    DataFormatError,
    Dataset,
    load_event_dataset,
    load_idx,
    make_xor,
    save_event_dataset,
    synth_digits,
    synth_events,
    write_idx_images,
    write_idx_labels,
)
from .equivalence import (
    DatapathConfig,
    check_equivalence,
    datapath_invariance_check,
    datapath_run,
    exhaustive_equivalence,
    split_payload,
)
from .network import (
    AllocationError,
    BitAllocation,
    build_cnn,
    build_mlp,
    forward,
    load_network,
    save_network,
)
from .tensors import RealTensor
from .training import (
    AllocationBudgetError,
    DivergenceError,
    TrainConfig,
    evaluate,
    sweep_allocations,
    sweep_csv,
    train,
)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_RUNTIME = 3
EXIT_CHECK_FAILED = 4


class ConfigError(ValueError):
    """Bad config file, flag value, or key combination."""


# --- config resolution ------------------------------------------------------

_DATA_DEFAULTS = {
    "dataset": "synth-digits",
    "data_n": 256,
    "data_seed": 7,
    "frame": "12x12",
    "duration": 16,
    "test_fraction": 0.25,
}

TRAIN_DEFAULTS = {
    **_DATA_DEFAULTS,
    "alloc": "4/1/4",
    "arch": "mlp",
    "hidden": "32",
    "epochs": 5,
    "batch_size": 32,
    "learning_rate": 5e-4,
    "optimizer": "adam-style",
    "seed": 0,
    "tau": 2.0,
    "v_th": 1.0,
    "reset_mode": "hard",
    "surrogate_width": 1.0,
    "encoder": "direct-current",
    "decoder": "membrane-sum",
    "quant_rule": "max-abs",
    "strict_deterministic": False,
    "out_dir": "qsnn-run",
}

EVAL_DEFAULTS = {
    **_DATA_DEFAULTS,
    "model": None,
    "split": "test",
    "batch_size": 256,
    "out": None,
}

COST_DEFAULTS = {
    **_DATA_DEFAULTS,
    "model": None,
    "alloc": None,
    "dataset": None,
    "csv": None,
}

SWEEP_DEFAULTS = {
    **_DATA_DEFAULTS,
    "budget": None,
    "candidates": None,
    "seeds": "0",
    "arch": "mlp",
    "hidden": "32",
    "epochs": 5,
    "batch_size": 32,
    "learning_rate": 5e-4,
    "optimizer": "adam-style",
    "tau": 2.0,
    "v_th": 1.0,
    "reset_mode": "hard",
    "surrogate_width": 1.0,
    "encoder": "direct-current",
    "decoder": "membrane-sum",
    "quant_rule": "max-abs",
    "strict_deterministic": False,
    "allow_off_budget": False,
    "out": "sweep.csv",
}

EQUIV_DEFAULTS = {
    "dims": "8x8",
    "t_steps": 8,
    "trials": 10000,
    "seed": 0,
    "w_bits": 8,
    "sets": 1000,
    "payload_bits": 4,
    "splits": "1/4,4/1,2/2",
    "out": None,
    "trace_out": None,
    "trace_split": "2/2",
}

PROFILE_DEFAULTS = {
    **_DATA_DEFAULTS,
    "model": None,
    "split": "test",
    "limit": 64,
    "out": None,
}

GEN_DEFAULTS = {
    "kind": "synth-digits",
    "out": "data",
    "n": 256,
    "seed": 7,
    "size": 28,
    "noise": 0.04,
    "frame": "12x12",
    "duration": 16,
    "test_fraction": 0.25,
}


def _resolve(args, defaults: dict) -> dict:
    """defaults <- config file <- explicit flags, rejecting unknown keys."""
    cfg = dict(defaults)
    path = getattr(args, "config", None)
    if path:
        try:
            file_cfg = json.loads(Path(path).read_text(encoding="utf-8"))
        except OSError as exc:
            raise ConfigError(f"cannot read config file {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {path} is not valid JSON: {exc}") from exc
        if not isinstance(file_cfg, dict):
            raise ConfigError(f"config file {path} must hold a JSON object")
        unknown = sorted(set(file_cfg) - set(defaults))
        if unknown:
            raise ConfigError(f"unknown config keys for this verb: {', '.join(unknown)}")
        cfg.update(file_cfg)
    for key in defaults:
        val = getattr(args, key, None)
        if val is not None:
            cfg[key] = val
    return cfg


def _parse_alloc(text) -> BitAllocation:
    if isinstance(text, BitAllocation):
        return text
    try:
        return BitAllocation.parse(str(text))
    except (AllocationError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def _parse_ints(value, what: str) -> tuple:
    if isinstance(value, (list, tuple)):
        return tuple(int(v) for v in value)
    try:
        return tuple(int(p) for p in str(value).split(",") if p.strip() != "")
    except ValueError as exc:
        raise ConfigError(f"cannot parse {what} from {value!r}") from exc


def _parse_pair(value, what: str) -> tuple:
    parts = str(value).lower().split("x")
    if len(parts) != 2:
        raise ConfigError(f"{what} must look like '12x12', got {value!r}")
    try:
        return int(parts[0]), int(parts[1])
    except ValueError as exc:
        raise ConfigError(f"{what} must look like '12x12', got {value!r}") from exc


# --- dataset and network construction --------------------------------------

def _load_dataset(cfg: dict) -> Dataset:
    name = cfg["dataset"]
    if name is None:
        raise ConfigError("a dataset is required (name or path)")
    if name == "xor":
        return make_xor()
    if name == "synth-digits":
        images, labels = synth_digits(int(cfg["data_n"]), seed=int(cfg["data_seed"]))
        inputs = images.astype(np.float64) / 255.0
        n = len(labels)
        cut = max(1, int(round(n * (1.0 - float(cfg["test_fraction"])))))
        return Dataset(
            kind="static-images", inputs=inputs, labels=labels,
            train_idx=np.arange(cut), test_idx=np.arange(cut, n),
            num_classes=10,
        )
    if name in ("moving-bar", "two-class-rotation"):
        return synth_events(
            name, int(cfg["data_n"]), frame=_parse_pair(cfg["frame"], "frame"),
            duration=int(cfg["duration"]), seed=int(cfg["data_seed"]),
            test_fraction=float(cfg["test_fraction"]),
        )
    path = Path(name)
    if (path / "manifest.json").exists():
        return load_event_dataset(path)
    if (path / "train-images.idx").exists():
        test_images = path / "test-images.idx"
        return load_idx(
            path / "train-images.idx", path / "train-labels.idx",
            test_images if test_images.exists() else None,
            (path / "test-labels.idx") if test_images.exists() else None,
        )
    raise ConfigError(
        f"dataset {name!r} is neither a builtin (xor, synth-digits, moving-bar, "
        f"two-class-rotation) nor a directory with manifest.json or train-images.idx"
    )


def _sample_shape(data: Dataset) -> tuple:
    if data.kind == "static-images":
        return tuple(data.inputs.shape[1:])
    stream = data.inputs[0]
    return (2, stream.height, stream.width)


def _build_net(cfg: dict, data: Dataset, alloc: BitAllocation, seed: int):
    shape = _sample_shape(data)
    common = dict(
        classes=data.num_classes, seed=seed, tau=float(cfg["tau"]),
        v_th=float(cfg["v_th"]), reset_mode=cfg["reset_mode"],
        surrogate_width=float(cfg["surrogate_width"]), encoder=cfg["encoder"],
        decoder=cfg["decoder"], quant_rule=cfg["quant_rule"],
    )
    if cfg["arch"] == "mlp":
        return build_mlp(alloc, input_shape=shape,
                         hidden=_parse_ints(cfg["hidden"], "hidden"), **common)
    if cfg["arch"] == "cnn":
        if len(shape) == 2:
            shape = (1,) + shape
        return build_cnn(alloc, input_shape=shape, **common)
    raise ConfigError(f"arch must be 'mlp' or 'cnn', got {cfg['arch']!r}")


def _samples_for_cost(net, data: Dataset, split: str, limit: int):
    """(samples ready for cost_report, sequence flag) from a dataset slice."""
    if data.kind == "static-images":
        x, _ = data.static_arrays(split)
        return x[:limit], False
    x, _ = data.event_tensors(split, net.allocation.t_steps)
    return np.swapaxes(x[:limit], 0, 1), True


def _write_text(path, text: str) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text(text, encoding="utf-8")


# --- verbs ------------------------------------------------------------------

def _cmd_train(args) -> int:
    cfg = _resolve(args, TRAIN_DEFAULTS)
    alloc = _parse_alloc(cfg["alloc"])
    cfg["alloc"] = str(alloc)
    data = _load_dataset(cfg)
    net = _build_net(cfg, data, alloc, int(cfg["seed"]))
    tc = TrainConfig(
        epochs=int(cfg["epochs"]), batch_size=int(cfg["batch_size"]),
        learning_rate=float(cfg["learning_rate"]), seed=int(cfg["seed"]),
        optimizer=cfg["optimizer"], allocation=alloc, dataset=str(cfg["dataset"]),
        strict_deterministic=bool(cfg["strict_deterministic"]),
    )
    net, record = train(tc, net, data)
    record.config = {k: cfg[k] for k in sorted(cfg)}
    out = Path(cfg["out_dir"])
    out.mkdir(parents=True, exist_ok=True)
    save_network(net, out / "model.json")
    _write_text(out / "run_record.json", record.to_json() + "\n")
    _write_text(out / "cost.csv", cost_csv_rows([record.cost], config=record.config))
    print(f"trained {cfg['arch']} alloc={alloc} on {cfg['dataset']}: "
          f"final acc {record.final_acc:.4f}, last loss {record.train_loss[-1]:.4f}")
    print(f"wrote {out / 'model.json'}, {out / 'run_record.json'}, {out / 'cost.csv'}")
    return EXIT_OK


def _cmd_eval(args) -> int:
    cfg = _resolve(args, EVAL_DEFAULTS)
    if not cfg["model"]:
        raise ConfigError("eval needs --model pointing at a saved network")
    net = load_network(cfg["model"])
    data = _load_dataset(cfg)
    acc = evaluate(net, data, split=cfg["split"], batch_size=int(cfg["batch_size"]))
    n = int(data.split(cfg["split"]).size)
    doc = {"config": cfg, "accuracy": acc, "n": n}
    text = json.dumps(doc, sort_keys=True)
    print(text)
    if cfg["out"]:
        _write_text(cfg["out"], text + "\n")
    return EXIT_OK


def _cmd_cost(args) -> int:
    cfg = _resolve(args, COST_DEFAULTS)
    if not cfg["model"]:
        raise ConfigError("cost needs --model pointing at a network JSON")
    net = load_network(cfg["model"])
    if cfg["alloc"]:
        if net.layers:
            raise ConfigError(
                "--alloc override applies only to cost-stub specs; "
                "rebuild and retrain for a different allocation"
            )
        net = replace(net, allocation=_parse_alloc(cfg["alloc"]))
    samples = None
    sequence = False
    if cfg["dataset"]:
        data = _load_dataset(cfg)
        split = "test" if data.test_idx.size else "train"
        samples, sequence = _samples_for_cost(net, data, split, int(cfg["data_n"]))
    report = cost_report(net, samples=samples, sequence=sequence)
    doc = {"config": cfg, "cost": report.to_json_dict()}
    print(json.dumps(doc, sort_keys=True))
    if cfg["csv"]:
        _write_text(cfg["csv"], cost_csv_rows([report], config=cfg))
    return EXIT_OK


def _cmd_sweep(args) -> int:
    cfg = _resolve(args, SWEEP_DEFAULTS)
    if cfg["budget"] is None:
        raise ConfigError("sweep needs --budget (the W*S*T product to hold fixed)")
    if not cfg["candidates"]:
        raise ConfigError("sweep needs --candidates, e.g. '1/1/16,4/2/2'")
    raw = cfg["candidates"]
    parts = raw if isinstance(raw, list) else str(raw).split(",")
    candidates = [_parse_alloc(p.strip()) for p in parts]
    seeds = _parse_ints(cfg["seeds"], "seeds")
    data = _load_dataset(cfg)
    tc = TrainConfig(
        epochs=int(cfg["epochs"]), batch_size=int(cfg["batch_size"]),
        learning_rate=float(cfg["learning_rate"]), seed=int(seeds[0]),
        optimizer=cfg["optimizer"], dataset=str(cfg["dataset"]),
        strict_deterministic=bool(cfg["strict_deterministic"]),
    )

    def net_builder(alloc, seed):
        return _build_net(cfg, data, alloc, seed)

    results = sweep_allocations(
        int(cfg["budget"]), candidates, tc, data, net_builder,
        seeds=seeds, override=bool(cfg["allow_off_budget"]),
    )
    csv_text = sweep_csv(results, config=cfg)
    _write_text(cfg["out"], csv_text)
    rows = [("alloc", "seed", "acc", "s_ace", "ns_ace", "fr_mean")]
    for alloc, seed, record in results:
        rep = record.cost
        rows.append((str(alloc), str(seed), f"{record.final_acc:.4f}",
                     f"{rep.s_ace:.6g}", f"{rep.ns_ace:.6g}",
                     f"{rep.fr_mean:.4f}" if rep.fr_mean is not None else ""))
    widths = [max(len(r[i]) for r in rows) for i in range(len(rows[0]))]
    for r in rows:
        print("  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip())
    print(f"wrote {cfg['out']}")
    return EXIT_OK


def _cmd_equiv_check(args) -> int:
    cfg = _resolve(args, EQUIV_DEFAULTS)
    m, k = _parse_pair(cfg["dims"], "dims")
    exhaustive = exhaustive_equivalence()
    randomized = check_equivalence(
        (m, k), int(cfg["t_steps"]), int(cfg["trials"]), int(cfg["seed"]),
        w_bits=int(cfg["w_bits"]),
    )
    split_pairs = []
    for part in str(cfg["splits"]).split(","):
        s, t = part.strip().split("/")
        split_pairs.append((int(s), int(t)))
    datapath = datapath_invariance_check(
        int(cfg["sets"]), split_pairs, int(cfg["payload_bits"]), int(cfg["seed"]),
        w_bits=int(cfg["w_bits"]),
    )
    ok = exhaustive.ok and randomized.ok and datapath["ok"]
    doc = {
        "config": cfg,
        "exhaustive": exhaustive.to_json_dict(),
        "randomized": randomized.to_json_dict(),
        "datapath": datapath,
        "ok": ok,
    }
    print(json.dumps(doc, sort_keys=True))
    if cfg["out"]:
        _write_text(cfg["out"], json.dumps(doc, sort_keys=True) + "\n")
    if cfg["trace_out"]:
        s, t = (int(v) for v in str(cfg["trace_split"]).split("/"))
        rng = np.random.default_rng(int(cfg["seed"]))
        payload_bits = s * t
        w = rng.integers(-7, 8, size=4)
        a = rng.integers(0, 1 << payload_bits, size=4)
        digits = np.array([split_payload(int(av), s, t) for av in a])
        p_sums = [int(np.dot(w, digits[:, step])) for step in range(t)]
        _, trace = datapath_run(
            DatapathConfig(spike_bits=s, time_steps=t, weight_bits=int(cfg["w_bits"])),
            p_sums,
        )
        _write_text(cfg["trace_out"],
                    "# config: " + json.dumps(cfg, sort_keys=True) + "\n" + trace.to_csv())
    return EXIT_OK if ok else EXIT_CHECK_FAILED


def _cmd_profile(args) -> int:
    cfg = _resolve(args, PROFILE_DEFAULTS)
    if not cfg["model"]:
        raise ConfigError("profile needs --model pointing at a saved network")
    net = load_network(cfg["model"])
    data = _load_dataset(cfg)
    split = cfg["split"]
    if data.split(split).size == 0:
        split = "train"
    samples, sequence = _samples_for_cost(net, data, split, int(cfg["limit"]))
    _, trace = forward(net, RealTensor(samples), sequence=sequence)
    rates = trace.firing_rates()
    lines = ["# config: " + json.dumps(cfg, sort_keys=True), "layer,kind,rate"]
    for li, rate in zip(trace.neuron_layer_ids, rates):
        lines.append(f"{li},{net.layers[li].kind},{rate!r}")
    text = "\n".join(lines) + "\n"
    print(text, end="")
    if cfg["out"]:
        _write_text(cfg["out"], text)
    return EXIT_OK


def _cmd_gen_data(args) -> int:
    cfg = _resolve(args, GEN_DEFAULTS)
    out = Path(cfg["out"])
    kind = cfg["kind"]
    if kind == "synth-digits":
        images, labels = synth_digits(int(cfg["n"]), seed=int(cfg["seed"]),
                                      size=int(cfg["size"]), noise=float(cfg["noise"]))
        n = len(labels)
        cut = max(1, int(round(n * (1.0 - float(cfg["test_fraction"])))))
        out.mkdir(parents=True, exist_ok=True)
        write_idx_images(out / "train-images.idx", images[:cut])
        write_idx_labels(out / "train-labels.idx", labels[:cut])
        write_idx_images(out / "test-images.idx", images[cut:])
        write_idx_labels(out / "test-labels.idx", labels[cut:])
        _write_text(out / "config.json", json.dumps({"config": cfg}, sort_keys=True) + "\n")
        print(f"wrote {n} digit images ({cut} train / {n - cut} test) under {out}")
    elif kind in ("moving-bar", "two-class-rotation"):
        ds = synth_events(kind, int(cfg["n"]), frame=_parse_pair(cfg["frame"], "frame"),
                          duration=int(cfg["duration"]), seed=int(cfg["seed"]),
                          test_fraction=float(cfg["test_fraction"]))
        save_event_dataset(ds, out, config=cfg)
        print(f"wrote {len(ds.inputs)} event streams under {out}")
    elif kind == "xor":
        ds = make_xor()
        out.mkdir(parents=True, exist_ok=True)
        images = (ds.inputs.reshape(4, 1, 2) * 255.0).astype(np.uint8)
        write_idx_images(out / "train-images.idx", images)
        write_idx_labels(out / "train-labels.idx", ds.labels)
        _write_text(out / "config.json", json.dumps({"config": cfg}, sort_keys=True) + "\n")
        print(f"wrote the 4 xor patterns under {out}")
    else:
        raise ConfigError(
            f"kind must be synth-digits, moving-bar, two-class-rotation, or xor, "
            f"got {kind!r}"
        )
    return EXIT_OK


# --- parser -----------------------------------------------------------------

def _add_data_flags(p):
    p.add_argument("--dataset", help="builtin name (xor, synth-digits, moving-bar, "
                                     "two-class-rotation) or a data directory")
    p.add_argument("--data-n", dest="data_n", type=int, help="synthetic sample count")
    p.add_argument("--data-seed", dest="data_seed", type=int)
    p.add_argument("--frame", help="event frame size, e.g. 12x12")
    p.add_argument("--duration", type=int, help="event stream duration in ticks")
    p.add_argument("--test-fraction", dest="test_fraction", type=float)


def _add_train_like_flags(p):
    p.add_argument("--arch", choices=["mlp", "cnn"])
    p.add_argument("--hidden", help="comma-separated hidden widths, e.g. 64,32")
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch-size", dest="batch_size", type=int)
    p.add_argument("--learning-rate", "--lr", dest="learning_rate", type=float)
    p.add_argument("--optimizer", choices=["adam-style", "sgd-momentum"])
    p.add_argument("--tau", type=float)
    p.add_argument("--v-th", dest="v_th", type=float)
    p.add_argument("--reset-mode", dest="reset_mode", choices=["hard", "subtract"])
    p.add_argument("--surrogate-width", dest="surrogate_width", type=float)
    p.add_argument("--encoder", choices=["direct-current", "level-quantized"])
    p.add_argument("--decoder", choices=["membrane-sum", "spike-count"])
    p.add_argument("--quant-rule", dest="quant_rule", choices=["max-abs", "fixed-t"])
    p.add_argument("--strict-deterministic", dest="strict_deterministic",
                   action="store_true", default=None)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qsnn",
        description="Quantized spiking network laboratory: training, cost "
                    "accounting, and bit-serial equivalence checks.",
    )
    sub = parser.add_subparsers(dest="verb", required=True)

    p = sub.add_parser("train", help="train one network and record run + cost")
    p.add_argument("--config", help="JSON config file; flags override its values")
    p.add_argument("--alloc", help="bit allocation W/S/T, e.g. 4/1/4")
    p.add_argument("--seed", type=int)
    p.add_argument("--out-dir", dest="out_dir")
    _add_data_flags(p)
    _add_train_like_flags(p)
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("eval", help="accuracy of a saved model on a dataset split")
    p.add_argument("--config")
    p.add_argument("--model", help="model.json from a training run")
    p.add_argument("--split", choices=["train", "test"])
    p.add_argument("--batch-size", dest="batch_size", type=int)
    p.add_argument("--out", help="write the JSON result here as well")
    _add_data_flags(p)
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("cost", help="cost report for a network JSON (no training)")
    p.add_argument("--config")
    p.add_argument("--model", help="network or cost-stub JSON")
    p.add_argument("--alloc", help="allocation override (cost stubs only)")
    p.add_argument("--csv", help="also write a one-row cost CSV here")
    _add_data_flags(p)
    p.set_defaults(func=_cmd_cost)

    p = sub.add_parser("sweep", help="train every W/S/T candidate at a fixed budget")
    p.add_argument("--config")
    p.add_argument("--budget", type=int, help="required W*S*T product")
    p.add_argument("--candidates", help="comma-separated allocations, e.g. 1/1/16,4/2/2")
    p.add_argument("--seeds", help="comma-separated seeds, e.g. 0,1,2")
    p.add_argument("--allow-off-budget", dest="allow_off_budget",
                   action="store_true", default=None)
    p.add_argument("--out", help="sweep CSV path")
    _add_data_flags(p)
    _add_train_like_flags(p)
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("equiv-check",
                       help="bit-serial GeMM equivalence and datapath invariance")
    p.add_argument("--config")
    p.add_argument("--dims", help="random-trial matrix dims, e.g. 8x8")
    p.add_argument("--t-steps", dest="t_steps", type=int)
    p.add_argument("--trials", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--w-bits", dest="w_bits", type=int)
    p.add_argument("--sets", type=int, help="datapath operand sets")
    p.add_argument("--payload-bits", dest="payload_bits", type=int)
    p.add_argument("--splits", help="datapath splits S/T, e.g. 1/4,4/1,2/2")
    p.add_argument("--out", help="write the JSON report here as well")
    p.add_argument("--trace-out", dest="trace_out", help="write one datapath trace CSV")
    p.add_argument("--trace-split", dest="trace_split", help="S/T for the trace")
    p.set_defaults(func=_cmd_equiv_check)

    p = sub.add_parser("profile", help="per-layer firing rates of a saved model")
    p.add_argument("--config")
    p.add_argument("--model")
    p.add_argument("--split", choices=["train", "test"])
    p.add_argument("--limit", type=int, help="samples to profile")
    p.add_argument("--out", help="write the CSV here as well")
    _add_data_flags(p)
    p.set_defaults(func=_cmd_profile)

    p = sub.add_parser("gen-data", help="write a synthetic dataset to disk")
    p.add_argument("--config")
    p.add_argument("--kind", choices=["synth-digits", "moving-bar",
                                      "two-class-rotation", "xor"])
    p.add_argument("--out", help="output directory")
    p.add_argument("--n", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--size", type=int, help="digit image side length")
    p.add_argument("--noise", type=float, help="digit salt-and-pepper rate")
    p.add_argument("--frame")
    p.add_argument("--duration", type=int)
    p.add_argument("--test-fraction", dest="test_fraction", type=float)
    p.set_defaults(func=_cmd_gen_data)

    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, AllocationError, AllocationBudgetError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataFormatError, DivergenceError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
