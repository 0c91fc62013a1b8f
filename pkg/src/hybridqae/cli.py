"""Command line entry point: `hybridqae <command> [--config ...]`."""

import argparse
import json
import sys

from . import pipeline
from .exceptions import (
    ConfigError,
    DataFormatError,
    DegenerateFeatureError,
    DegenerateInputError,
    DegenerateLabelsError,
    InvalidArgumentError,
    StageError,
    VerificationError,
)

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_NUMERICAL = 0, 2, 3, 4

STAGES = {
    "gen-data": pipeline.run_gen_data,
    "cluster": pipeline.run_cluster,
    "train-qae": pipeline.run_train_qae,
    "eval-qae": pipeline.run_eval_qae,
    "fidelity": pipeline.run_fidelity,
    "train-clf": pipeline.run_train_clf,
    "eval-clf": pipeline.run_eval_clf,
    "baseline": pipeline.run_baseline,
}
HELP = {
    "gen-data": "generate (or copy in) the dataset",
    "cluster": "label the dataset with 2-means",
    "train-qae": "train the quantum autoencoder",
    "eval-qae": "reconstruction error on the test split",
    "fidelity": "input/reconstruction fidelity on the test split",
    "train-clf": "train the latent-qubit classifier",
    "eval-clf": "classifier accuracy on the test split",
    "baseline": "classical MinMax + 4-2-4 autoencoder + KNN",
    "run-all": "run every stage and write report.json and summary.txt",
    "verify": "recompute every metric of a saved report",
}


def exit_code_for(exc):
    cause = exc.cause if isinstance(exc, StageError) else exc
    if isinstance(cause, (DataFormatError, DegenerateFeatureError, DegenerateInputError,
                          DegenerateLabelsError, OSError)):
        return EXIT_DATA
    if isinstance(cause, (ArithmeticError, VerificationError)):
        return EXIT_NUMERICAL
    if isinstance(cause, (ConfigError, InvalidArgumentError)):
        return EXIT_CONFIG
    return EXIT_DATA


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config document (defaults to the built-in reference)")
    common.add_argument("--seed", type=int, help="override the config seed")
    common.add_argument("--out-dir", default="hybridqae-out", help="artifact directory")
    common.add_argument("--shots", type=int,
                        help="override the shot count (fidelity: per-sample shots; otherwise classifier shots)")
    common.add_argument("--mode", choices=("exact", "shots"),
                        help="fidelity / eval-clf: exact only, or shots as well / instead")

    parser = argparse.ArgumentParser(prog="hybridqae", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in list(STAGES) + ["run-all", "verify"]:
        sub.add_parser(name, parents=[common], help=HELP[name])
    return parser


def _overrides(args):
    out = {}
    if args.seed is not None:
        out["seed"] = args.seed
    if args.shots is not None:
        key = "fidelity_shots" if args.command == "fidelity" else "classifier_shots"
        out["evaluation"] = {key: args.shots}
    return out


def _run(args):
    if args.command == "verify":
        recomputed = pipeline.verify(args.out_dir)
        print(f"verified report in {args.out_dir} (config_hash {recomputed['config_hash']})")
        return
    config = pipeline.load_config(args.config, _overrides(args))
    if args.command == "run-all":
        report = pipeline.run_pipeline(config, args.out_dir)
        print(report.summary(), end="")
        return
    ws = pipeline.Workspace(config, args.out_dir)
    if args.command == "fidelity":
        metrics = STAGES["fidelity"](ws, args.mode or "shots")
    elif args.command == "eval-clf":
        metrics = STAGES["eval-clf"](ws, args.mode or "exact")
    else:
        metrics = STAGES[args.command](ws)
    print(json.dumps(metrics, indent=2, sort_keys=True))


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        _run(args)
    except (StageError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exit_code_for(exc)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
