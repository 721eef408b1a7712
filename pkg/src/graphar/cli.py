"""Command-line interface.

Subcommands: generate (process config to dataset file), train (dataset to
model checkpoint), evaluate (dataset plus fitted methods to report files),
sweep (config list to per-experiment reports plus a combined summary).
Exit codes: 0 success, 1 usage error, 2 runtime error.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .dataset import export_sequence_csv, load_sequence, save_sequence
from .distance import DistanceParams
from .generators import random_pmlds_config, random_rotational_config
from .harness import (
    ExperimentConfig,
    emit_report,
    evaluate_methods,
    experiment_config_from_dict,
    fit_methods,
    sweep,
)
from .neural import NgarConfig, NgarModel, load_model, save_model, train


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _generator_from_args(args) -> object:
    if args.generator == "rotational":
        return random_rotational_config(
            n_nodes=args.nodes,
            order=args.p,
            seed=args.seed,
            noise_std=args.sigma,
        )
    if args.c is None:
        raise UsageError("--c is required for the pmlds generator")
    return random_pmlds_config(
        n_nodes=args.nodes,
        complexity=args.c,
        seed=args.seed,
        noise_std=args.sigma,
    )


def _cmd_generate(args) -> int:
    from .generators import generate_sequence

    config = _generator_from_args(args)
    seq = generate_sequence(config, args.steps)
    save_sequence(seq, args.out)
    if args.csv:
        export_sequence_csv(seq, args.csv)
    print(f"wrote {len(seq)} graphs to {args.out}")
    return 0


def _ngar_config_from_args(args) -> NgarConfig:
    overrides = {"window": args.k, "seed": args.seed}
    for name in ("max_epochs", "batch_size", "patience", "dtype"):
        value = getattr(args, name, None)
        if value is not None:
            overrides[name] = value
    if getattr(args, "learning_rate", None) is not None:
        overrides["learning_rate"] = args.learning_rate
    return NgarConfig(**overrides)


def _cmd_train(args) -> int:
    seq = load_sequence(args.data)
    n_test = int(len(seq) * args.test_fraction)
    train_seq = seq[: len(seq) - n_test]
    config = _ngar_config_from_args(args)
    model = NgarModel.initialize(seq.n_nodes, seq.feature_dim, config)
    history = train(model, train_seq, config)
    save_model(model, args.out)
    print(
        f"trained {history.epochs} epochs, best epoch {history.best_epoch} "
        f"(val loss {history.best_val_loss:.6f}); checkpoint at {args.out}"
    )
    return 0


def _cmd_evaluate(args) -> int:
    seq = load_sequence(args.data)
    methods = tuple(m.strip() for m in args.methods.split(",") if m.strip())
    distance = DistanceParams(
        edge_weight=args.edge_weight, correspondence=args.correspondence
    )
    config = ExperimentConfig(
        generator=seq.origin,
        name=args.name,
        total_steps=len(seq),
        test_fraction=args.test_fraction,
        window=args.k,
        methods=methods,
        distance=distance,
        ngar=NgarConfig(window=args.k, seed=args.seed),
        seed=args.seed,
    )
    n_test = int(len(seq) * args.test_fraction)
    train_seq = seq[: len(seq) - n_test]
    test_targets = np.arange(len(seq) - n_test, len(seq))

    # baselines are cheap to fit here; NGAR comes from the checkpoint
    fit_config = replace(config, methods=tuple(m for m in methods if m != "ngar"))
    fitted = fit_methods(train_seq, fit_config)
    if "ngar" in methods:
        if not args.checkpoint:
            raise UsageError("--checkpoint is required when evaluating ngar")
        fitted.ngar_model = load_model(args.checkpoint)
        if fitted.ngar_model.config.window != args.k:
            raise UsageError(
                f"checkpoint was trained with window "
                f"{fitted.ngar_model.config.window}, but --k is {args.k}"
            )
        if (
            fitted.ngar_model.n_nodes != seq.n_nodes
            or fitted.ngar_model.feature_dim != seq.feature_dim
        ):
            raise UsageError("checkpoint layout does not match the dataset")
        fitted.fit_seconds["ngar"] = 0.0
    report = evaluate_methods(seq, fitted, config, test_targets)
    paths = emit_report(report, args.out)
    for method, result in report.results.items():
        print(f"{method}: median GED {result.summary().get('median', float('nan')):.6f}")
    if report.ngar_metrics:
        print(
            "ngar: loss {loss:.4f} mse {feature_mse:.4f} "
            "log-loss {adjacency_log_loss:.4f} accuracy {adjacency_accuracy:.4f}".format(
                **report.ngar_metrics
            )
        )
    print(f"report written to {paths[0].parent}")
    return 0


def _cmd_sweep(args) -> int:
    lines = Path(args.configs).read_text().splitlines()
    configs = []
    for line in lines:
        line = line.strip()
        if not line:
            continue
        configs.append(experiment_config_from_dict(json.loads(line)))
    result = sweep(configs, out_dir=args.out)
    print(f"completed {len(result.reports)} experiments, {len(result.errors)} failed")
    for name, message in result.errors.items():
        print(f"  {name}: {message}", file=sys.stderr)
    return 0 if not result.errors else 2


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="graphar", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("generate", help="simulate a process and write a dataset")
    gen.add_argument("--generator", choices=("rotational", "pmlds"), required=True)
    gen.add_argument("--p", type=int, default=10, help="rotational memory order")
    gen.add_argument("--c", type=int, help="pmlds latent dimension")
    gen.add_argument("--nodes", type=int, default=5)
    gen.add_argument("--steps", type=int, default=20_000)
    gen.add_argument("--sigma", type=float, default=0.001, help="process noise std")
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--out", required=True)
    gen.add_argument("--csv", help="also export the records as CSV")
    gen.set_defaults(func=_cmd_generate)

    tr = sub.add_parser("train", help="train the neural predictor on a dataset")
    tr.add_argument("--data", required=True)
    tr.add_argument("--k", type=int, default=20, help="window length")
    tr.add_argument("--test-fraction", type=float, default=0.1)
    tr.add_argument("--seed", type=int, default=0)
    tr.add_argument("--max-epochs", dest="max_epochs", type=int)
    tr.add_argument("--batch-size", dest="batch_size", type=int)
    tr.add_argument("--patience", type=int)
    tr.add_argument("--learning-rate", dest="learning_rate", type=float)
    tr.add_argument("--dtype", choices=("float32", "float64"))
    tr.add_argument("--out", required=True)
    tr.set_defaults(func=_cmd_train)

    ev = sub.add_parser("evaluate", help="score methods on the test segment")
    ev.add_argument("--data", required=True)
    ev.add_argument("--checkpoint", help="ngar checkpoint from `train`")
    ev.add_argument("--methods", default="mean,mart,move,var,ngar")
    ev.add_argument("--k", type=int, default=20)
    ev.add_argument("--test-fraction", type=float, default=0.1)
    ev.add_argument("--edge-weight", type=float, default=1.0)
    ev.add_argument(
        "--correspondence",
        choices=("identity", "optimal-permutation"),
        default="identity",
    )
    ev.add_argument("--name", default="experiment")
    ev.add_argument("--seed", type=int, default=0)
    ev.add_argument("--out", required=True)
    ev.set_defaults(func=_cmd_evaluate)

    sw = sub.add_parser("sweep", help="run a list of experiment configs")
    sw.add_argument("--configs", required=True, help="JSON lines, one config each")
    sw.add_argument("--out", required=True)
    sw.set_defaults(func=_cmd_sweep)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - map any failure to exit code 2
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
