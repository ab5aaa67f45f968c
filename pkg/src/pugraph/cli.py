"""Command-line entry point: train, sweep, partition, gen-synth, eval.

A run is described by one JSON config document::

    {
      "dataset": { ... dataset manifest ... },
      "label_ratio": 0.01,
      "loss":  { "kind": "distance_aware", "pi_p": "auto", ... },
      "train": { "epochs": 400, "learning_rate": 0.01, ... }
    }

``--override key=value`` patches the document with dotted paths
(e.g. ``--override loss.alpha=0``); values are parsed as JSON when possible.
Exit codes: 0 success, 1 configuration error, 2 data error, 3 numeric abort.
"""

import argparse
import datetime
import json
import os
import sys
import time
from dataclasses import asdict

import numpy as np

from . import __version__
from .data import build_dataset, load_jsonl, make_sbm_dataset, save_jsonl
from .errors import ConfigError, InputError, NumericError, TrainingAbort
from .evaluate import (DEFAULT_RATIOS, MAIN_METHODS, aggregate, macro_f1,
                       run_ablation, run_grid, run_sensitivity,
                       write_results_csv)
from .graph import normalize_adjacency, partition_unlabeled
from .losses import LossConfig
from .nn import forward_from_propagated, load_checkpoint, save_checkpoint
from .published import external_rows
from .train import TrainConfig, train

DATA_DIR_ENV = "PUGRAPH_DATA"


def _fail(kind: str, code: int, message: str) -> int:
    print(f'pugraph-error kind={kind} exit={code} msg="{message}"', file=sys.stderr)
    return code


def _parse_override(text: str) -> tuple[list[str], object]:
    if "=" not in text:
        raise ConfigError(f"override {text!r} must look like dotted.key=value")
    key, raw = text.split("=", 1)
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return key.split("."), value


def _apply_overrides(config: dict, overrides) -> dict:
    for text in overrides or []:
        path, value = _parse_override(text)
        node = config
        for part in path[:-1]:
            if not isinstance(node.get(part), dict):
                node[part] = {}
            node = node[part]
        node[path[-1]] = value
    return config


def _load_config(path: str, overrides) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            config = json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc.msg}")
    return _apply_overrides(config, overrides)


def _resolve_data_path(path: str, config_dir: str) -> str:
    """Absolute as-is; else try cwd, the config's directory, then $PUGRAPH_DATA."""
    if os.path.isabs(path) or os.path.exists(path):
        return path
    beside_config = os.path.join(config_dir, path)
    if os.path.exists(beside_config):
        return beside_config
    data_dir = os.environ.get(DATA_DIR_ENV)
    if data_dir and os.path.exists(os.path.join(data_dir, path)):
        return os.path.join(data_dir, path)
    return path


def _resolve_manifest(config: dict, config_path: str) -> dict:
    manifest = dict(config.get("dataset") or {})
    if not manifest:
        raise ConfigError("config is missing the 'dataset' section")
    config_dir = os.path.dirname(os.path.abspath(config_path))
    for key in ("content", "cites", "path"):
        if key in manifest:
            manifest[key] = _resolve_data_path(str(manifest[key]), config_dir)
    return manifest


def _train_config(config: dict, seed_flag, loss_cfg: LossConfig) -> TrainConfig:
    section = dict(config.get("train") or {})
    if seed_flag is not None:
        section["seed"] = seed_flag
    try:
        cfg = TrainConfig(**section, loss=loss_cfg)
    except TypeError as exc:
        raise ConfigError(f"bad 'train' section: {exc}")
    cfg.validate()
    return cfg


def _loss_config(config: dict, positive_prior: float | None) -> LossConfig:
    section = dict(config.get("loss") or {})
    if section.get("pi_p") in (None, "auto"):
        section["pi_p"] = positive_prior if positive_prior is not None else 0.5
    try:
        cfg = LossConfig(**section)
    except TypeError as exc:
        raise ConfigError(f"bad 'loss' section: {exc}")
    cfg.validate()
    return cfg


def _write_json(path, payload):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_run_manifest(out_dir: str, config_path: str, resolved: dict):
    _write_json(os.path.join(out_dir, "manifest.json"), {
        "config_path": os.path.abspath(config_path),
        "resolved_config": resolved,
        "out_dir": os.path.abspath(out_dir),
        "tool_version": __version__,
        "timestamp_utc": datetime.datetime.now(datetime.timezone.utc).isoformat(),
    })


def _thread_note() -> dict:
    return {"cpu_count": os.cpu_count(),
            "omp_num_threads": os.environ.get("OMP_NUM_THREADS")}


def cmd_train(args) -> int:
    config = _load_config(args.config, args.override)
    manifest = _resolve_manifest(config, args.config)
    out_dir = args.out or "run_out"
    os.makedirs(out_dir, exist_ok=True)
    _write_run_manifest(out_dir, args.config, config)
    label_ratio = float(config.get("label_ratio", 0.01))
    seed = args.seed if args.seed is not None else int(config.get("train", {}).get("seed", 0))
    delta = int(config.get("loss", {}).get("delta", LossConfig.delta))
    dataset = build_dataset(manifest, label_ratio, seed, delta)
    loss_cfg = _loss_config(config, dataset.positive_prior)
    cfg = _train_config(config, seed, loss_cfg)
    t0 = time.perf_counter()
    try:
        params, records = train(dataset, cfg)
    except TrainingAbort as exc:
        if exc.last_good is not None:
            save_checkpoint(os.path.join(out_dir, "checkpoint.bin"), exc.last_good)
        raise
    save_checkpoint(os.path.join(out_dir, "checkpoint.bin"), params)
    with open(os.path.join(out_dir, "train_log.jsonl"), "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(record, sort_keys=True) + "\n")
    adj = normalize_adjacency(dataset.graph)
    cache = forward_from_propagated(adj, adj.matmul(dataset.features), params)
    metrics = macro_f1(cache.y_hat, dataset.true_label, dataset.test_mask)
    _write_json(os.path.join(out_dir, "result.json"), {
        "dataset": manifest.get("name", "unnamed"),
        "seed": seed,
        "label_ratio": label_ratio,
        "loss": asdict(loss_cfg),
        "macro_f1": metrics.macro_f1,
        "f1_pos": metrics.f1_pos,
        "f1_neg": metrics.f1_neg,
        "confusion": asdict(metrics.confusion),
        "wall_time_s": time.perf_counter() - t0,
        "threads": _thread_note(),
        "tool_version": __version__,
    })
    print(f"train done: macro_f1={metrics.macro_f1:.2f} out={out_dir}")
    return 0


def cmd_sweep(args) -> int:
    config = _load_config(args.config, args.override)
    manifest = _resolve_manifest(config, args.config)
    out_dir = args.out or f"sweep_{args.kind}"
    os.makedirs(out_dir, exist_ok=True)
    _write_run_manifest(out_dir, args.config, config)
    seeds = range(args.seeds)
    ratios = tuple(float(r) for r in args.ratios.split(",")) if args.ratios else DEFAULT_RATIOS
    loss_cfg = _loss_config(config, None)
    base = _train_config(config, None, loss_cfg)
    loss_overrides = dict(config.get("loss") or {})
    if args.kind == "main":
        results = run_grid(manifest, MAIN_METHODS, ratios, seeds, base,
                           loss_overrides, jobs=args.jobs)
        extra = external_rows(manifest.get("name", ""))
    elif args.kind == "ablation":
        results = run_ablation(manifest, ratios, seeds, base, jobs=args.jobs)
        extra = []
    elif args.kind == "prior":
        results = run_sensitivity(manifest, args.ratio, seeds, base, jobs=args.jobs,
                                  deltas=())["prior"]
        extra = []
    elif args.kind == "delta":
        results = run_sensitivity(manifest, args.ratio, seeds, base, jobs=args.jobs,
                                  pi_hats=())["delta"]
        extra = []
    else:
        raise ConfigError(f"unknown sweep kind {args.kind!r}")
    write_results_csv(os.path.join(out_dir, "runs.csv"), results)
    _write_json(os.path.join(out_dir, "aggregate.json"),
                {"rows": aggregate(results), "external": extra})
    failures = [r for r in results if r.error]
    print(f"sweep {args.kind}: {len(results) - len(failures)} runs ok, "
          f"{len(failures)} failed, out={out_dir}")
    return 0


def cmd_partition(args) -> int:
    config = _load_config(args.config, args.override)
    manifest = _resolve_manifest(config, args.config)
    label_ratio = float(config.get("label_ratio", 0.01))
    seed = args.seed if args.seed is not None else 0
    if args.delta is not None and args.delta < 1:
        raise ConfigError(f"delta must be >= 1, got {args.delta}")
    deltas = [args.delta] if args.delta is not None else list(range(1, 7))
    dataset = build_dataset(manifest, label_ratio, seed, deltas[0])
    dist = dataset.partition.min_dist
    finite = dist[np.isfinite(dist)].astype(int)
    print(f"labeled |V_L| = {dataset.partition.labeled.size}")
    print("min-distance histogram (hops: count):")
    for hop in range(int(finite.max()) + 1 if finite.size else 0):
        print(f"  {hop}: {int(np.sum(finite == hop))}")
    unreachable = int(np.sum(~np.isfinite(dist)))
    if unreachable:
        print(f"  unreachable: {unreachable}")
    print("delta  |near V_U|  |far V_U|")
    for delta in deltas:
        part = partition_unlabeled(dataset.graph, dataset.partition.labeled, delta)
        print(f"{delta:>5}  {part.near_unlabeled.size:>10}  {part.far_unlabeled.size:>9}")
    return 0


def cmd_gen_synth(args) -> int:
    try:
        graph, features, labels = make_sbm_dataset(
            args.n_pos, args.n_neg, args.p_intra, args.p_inter, args.seed,
            feature_dim=args.feature_dim)
    except InputError as exc:
        raise ConfigError(str(exc))  # invalid generator parameters -> exit 1
    save_jsonl(args.out, graph, features, labels)
    manifest = {
        "name": f"sbm_{args.n_pos}p_{args.n_neg}n_seed{args.seed}",
        "format": "jsonl",
        "path": os.path.abspath(args.out),
        "positive_classes": ["pos"],
        "normalize_features": True,
        "train_fraction": 0.1,
        "split_seed": 0,
    }
    _write_json(args.out + ".manifest.json", manifest)
    print(f"wrote {args.out} ({graph.num_nodes} nodes, {graph.num_edges} edges)")
    return 0


def cmd_eval(args) -> int:
    config = _load_config(args.config, args.override)
    manifest = _resolve_manifest(config, args.config)
    label_ratio = float(config.get("label_ratio", 0.01))
    seed = args.seed if args.seed is not None else int(config.get("train", {}).get("seed", 0))
    delta = int(config.get("loss", {}).get("delta", LossConfig.delta))
    dataset = build_dataset(manifest, label_ratio, seed, delta)
    params = load_checkpoint(args.checkpoint)
    adj = normalize_adjacency(dataset.graph)
    cache = forward_from_propagated(adj, adj.matmul(dataset.features), params)
    metrics = macro_f1(cache.y_hat, dataset.true_label, dataset.test_mask)
    payload = {
        "dataset": manifest.get("name", "unnamed"),
        "checkpoint": os.path.abspath(args.checkpoint),
        "macro_f1": metrics.macro_f1,
        "f1_pos": metrics.f1_pos,
        "f1_neg": metrics.f1_neg,
        "confusion": asdict(metrics.confusion),
    }
    if args.out:
        _write_json(args.out, payload)
    print(json.dumps(payload, sort_keys=True))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pugraph",
        description="Positive-unlabeled node classification engine")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config_required=True):
        p.add_argument("--config", required=config_required,
                       help="run config JSON document")
        p.add_argument("--override", action="append", default=[],
                       metavar="KEY=VALUE",
                       help="patch the config with a dotted path, repeatable")
        p.add_argument("--seed", type=int, default=None,
                       help="run seed (overrides train.seed)")

    p_train = sub.add_parser("train", help="train one model and score it")
    common(p_train)
    p_train.add_argument("--out", default=None, help="output directory")
    p_train.set_defaults(func=cmd_train)

    p_sweep = sub.add_parser("sweep", help="run an experiment grid")
    p_sweep.add_argument("kind", choices=["main", "ablation", "prior", "delta"],
                         help="which sweep to run")
    common(p_sweep)
    p_sweep.add_argument("--out", default=None, help="output directory")
    p_sweep.add_argument("--seeds", type=int, default=5,
                         help="number of seeds (0..N-1) per cell")
    p_sweep.add_argument("--ratios", default=None,
                         help="comma-separated label ratios (main/ablation)")
    p_sweep.add_argument("--ratio", type=float, default=0.002,
                         help="label ratio for prior/delta sweeps")
    p_sweep.add_argument("--jobs", type=int, default=1,
                         help="worker processes for grid cells")
    p_sweep.set_defaults(func=cmd_sweep)

    p_part = sub.add_parser("partition",
                            help="show distance-partition sizes per delta")
    common(p_part)
    p_part.add_argument("--delta", type=int, default=None,
                        help="single delta to report (default: 1..6)")
    p_part.set_defaults(func=cmd_partition)

    p_gen = sub.add_parser("gen-synth",
                           help="generate a synthetic SBM dataset as JSON lines")
    p_gen.add_argument("--out", required=True, help="output .jsonl path")
    p_gen.add_argument("--n-pos", type=int, default=200, help="positive-block size")
    p_gen.add_argument("--n-neg", type=int, default=200, help="negative-block size")
    p_gen.add_argument("--p-intra", type=float, default=0.05,
                       help="within-block edge probability")
    p_gen.add_argument("--p-inter", type=float, default=0.005,
                       help="between-block edge probability")
    p_gen.add_argument("--seed", type=int, default=0, help="generator seed")
    p_gen.add_argument("--feature-dim", type=int, default=8,
                       help="planted binary feature dimension")
    p_gen.set_defaults(func=cmd_gen_synth)

    p_eval = sub.add_parser("eval", help="re-score a saved checkpoint")
    common(p_eval)
    p_eval.add_argument("--checkpoint", required=True, help="checkpoint file")
    p_eval.add_argument("--out", default=None, help="optional metrics JSON path")
    p_eval.set_defaults(func=cmd_eval)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        return _fail("config", 1, str(exc))
    except FileNotFoundError as exc:
        return _fail("data", 2, str(exc))
    except InputError as exc:
        return _fail("data", 2, str(exc))
    except (NumericError, TrainingAbort) as exc:
        return _fail("numeric", 3, str(exc))


if __name__ == "__main__":
    sys.exit(main())
