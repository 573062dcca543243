"""Command-line entry point: one subcommand per pipeline stage."""
from __future__ import annotations

import argparse
import json
import logging
import sys

from . import pipeline
from .config import load_config
from .errors import ConfigError

log = logging.getLogger("scorerec")

# subcommand -> (stage function, config key that --out overrides, help)
COMMANDS = {
    "ingest": (pipeline.run_ingest, "corpus_dir", "parse raw TSV files into a normalized corpus"),
    "split": (pipeline.run_split, "split_dir", "temporal train/val/test split"),
    "train-crm": (pipeline.run_train_crm, "crm_path", "train the BPR-MF collaborative model"),
    "train-car": (pipeline.run_train_car, "car_path", "train the collaborative retriever adapter"),
    "index": (pipeline.run_index, "index_path", "embed every user behavior into the retrieval index"),
    "assess": (pipeline.run_assess, "assessments_path", "generate LLM self-assessments"),
    "train-sare": (pipeline.run_train_sare, "sare_path", "train the self-assessing reranker adapter"),
    "predict": (pipeline.run_predict, "predictions_path", "score test pairs through the LLM judge"),
    "evaluate": (pipeline.run_evaluate, "report_path", "compute AUC/UAUC over predictions"),
    "run-all": (pipeline.run_all, "report_path", "run every stage in order"),
    "data-report": (pipeline.dataset_report, None, "print corpus/split counts next to published MovieLens-1M counts"),
}


def _kv(text: str) -> tuple[str, str]:
    if "=" not in text:
        raise argparse.ArgumentTypeError(f"expected KEY=VALUE, got {text!r}")
    k, v = text.split("=", 1)
    return k.strip(), v.strip()


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="TOML config file")
    common.add_argument("--seed", type=int, help="override the config seed")
    common.add_argument("--out", help="output path for this subcommand's artifact")
    common.add_argument("--set", dest="overrides", action="append", type=_kv, default=[], metavar="KEY=VALUE",
                        help="override any config key (repeatable)")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="scorerec", description=__doc__)
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", required=True)
    for name, (_, _, help_) in COMMANDS.items():
        sub.add_parser(name, parents=[common], help=help_, description=help_)
    return parser


def run_command(argv: list[str]) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    fn, out_key, _ = COMMANDS[args.command]
    overrides = dict(args.overrides)
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.out and out_key:
        overrides[out_key] = args.out
    try:
        cfg = load_config(args.config, overrides)
        result = fn(cfg)
    except ConfigError as e:
        field = f" [{e.field}]" if e.field else ""
        print(f"error: invalid config{field}: {e}", file=sys.stderr)
        return 1
    except FileNotFoundError as e:
        print(f"error: missing input file: {e.filename}", file=sys.stderr)
        return 1
    except (ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    if args.command in ("evaluate", "run-all"):
        print(result.to_json(), end="")
    elif args.command == "data-report":
        print(json.dumps(result, indent=2))
    return 0


def main() -> None:
    sys.exit(run_command(sys.argv[1:]))


if __name__ == "__main__":
    main()
