"""Command-line entry points.

Subcommands: synth, train, eval, agree, simulate, serve. Every command
reads one optional TOML config (--config) and applies flag overrides on
top; flags always win. Any stage failure prints a stage-named diagnostic
on stderr and exits nonzero.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

from ..dataset import save_dataset, synthesize_dataset
from .config import apply_overrides, load_config
from .pipeline import StageError, run_end_to_end
from .server import serve


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="TOML config file")
    parser.add_argument("--seed", type=int, help="master seed for the run")
    parser.add_argument("--classifier", choices=("nn", "nfl"))
    parser.add_argument("--snr", type=float, help="synthetic class-separation gain")
    parser.add_argument("--out-dir", dest="out_dir", help="output directory")
    parser.add_argument("--bind", help="host:port for the service socket")
    parser.add_argument("--tick-hz", dest="tick_hz", type=float)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ecogcar",
        description="Movement-intention recognition driving a scanned-direction car",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="synthesize a dataset directory")
    _add_common(p)

    p = sub.add_parser("train", help="fit features and train a classifier")
    _add_common(p)
    p.add_argument("--dataset", help="dataset directory (default: synthesize)")

    p = sub.add_parser("eval", help="held-out evaluation with confusion matrix")
    _add_common(p)
    p.add_argument("--dataset", help="dataset directory (default: synthesize)")

    p = sub.add_parser("agree", help="pre-onset vs execution-window agreement")
    _add_common(p)
    p.add_argument("--dataset", help="dataset directory (default: synthesize)")

    p = sub.add_parser("simulate", help="full end-to-end run incl. command log")
    _add_common(p)
    p.add_argument("--dataset", help="dataset directory (default: synthesize)")

    p = sub.add_parser("serve", help="run the live telemetry/steering service")
    _add_common(p)
    p.add_argument("--dataset", help="dataset directory backing replay")
    p.add_argument("--static-dir", dest="static_dir", help="dashboard asset dir")

    return parser


def _config_from_args(args: argparse.Namespace):
    config = load_config(args.config)
    overrides = {
        k: getattr(args, k, None)
        for k in ("seed", "classifier", "snr", "out_dir", "bind", "tick_hz", "static_dir")
    }
    config = apply_overrides(config, **overrides)
    if getattr(args, "dataset", None):
        config = replace(config, dataset_path=args.dataset)
    return config


def _cmd_synth(config) -> int:
    dataset = synthesize_dataset(replace(config.synth, seed=config.seed))
    out = Path(config.out_dir) / "dataset"
    save_dataset(dataset, out)
    counts = {cls.value: n for cls, n in dataset.class_counts().items()}
    print(f"wrote {len(dataset.trials)} trials to {out} {counts}")
    return 0


def _cmd_train(config) -> int:
    result = run_end_to_end(config)
    print(
        f"trained {config.classifier}; held-out failure rate "
        f"{result.evaluation.failure_rate:.3f}"
    )
    print(f"model written to {result.out_dir / 'model.json'}")
    return 0


def _cmd_eval(config) -> int:
    result = run_end_to_end(config)
    print(result.evaluation.render_text())
    print(f"reports in {result.out_dir}")
    return 0


def _cmd_agree(config) -> int:
    result = run_end_to_end(config)
    print(f"agreement_rate = {result.agreement.agreement_rate:.4f} "
          f"over {len(result.agreement.pairs)} trials")
    print(f"reports in {result.out_dir}")
    return 0


def _cmd_simulate(config) -> int:
    result = run_end_to_end(config)
    print(result.evaluation.render_text())
    print(f"agreement_rate = {result.agreement.agreement_rate:.4f}")
    print(f"{result.n_pulses} switch pulses, {len(result.command_log)} commands logged")
    print(f"outputs in {result.out_dir}")
    return 0


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        config = _config_from_args(args)
    except Exception as exc:
        print(f"[config] {exc}", file=sys.stderr)
        return 1

    commands = {
        "synth": _cmd_synth,
        "train": _cmd_train,
        "eval": _cmd_eval,
        "agree": _cmd_agree,
        "simulate": _cmd_simulate,
    }
    try:
        if args.command == "serve":
            serve(config)
            return 0
        return commands[args.command](config)
    except StageError as exc:
        print(exc, file=sys.stderr)
        return 1
    except Exception as exc:
        print(f"[{args.command}] {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
