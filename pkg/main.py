"""
Command-line entry point for the CVSS scoring bench.

Subcommands: ingest, score, predict, evaluate, analyze, meta and report.
Exit codes: 0 success, 2 input error, 3 provider failure, 4 internal
invariant violation.
"""

import argparse
import asyncio
import sys
from typing import Callable, List, Mapping, Optional, TextIO

from src.cli.commands import BenchCommands
from src.cli.messages import ConsoleMessages
from src.data.llm_client import ChatTransport
from src.models.data_models import ALLOWED_SHOTS
from src.models.errors import BenchError, InvariantViolation
from src.utils.config import RUN_MODES, AppConfig, load_config
from src.utils.logger import get_logger, setup_logging


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", help="Output directory")
    common.add_argument("--dataset", help="Dataset JSONL path")
    common.add_argument("--predictions", help="Prediction CSV path")
    common.add_argument("--seed", type=int, help="Seed for splits and meta models")
    common.add_argument("--log-level", help="DEBUG, INFO, WARNING, ERROR or CRITICAL")

    parser = argparse.ArgumentParser(
        prog="cvssbench",
        description="Benchmark CVSS v3.1 base-metric prediction from CVE descriptions.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    ingest = sub.add_parser("ingest", parents=[common], help="Build the dataset from CVE record files")
    ingest.add_argument("input_dir", nargs="?", help="Directory (or file) of CVE records")
    ingest.add_argument("--strict", action="store_true", help="Abort on the first malformed record")

    score = sub.add_parser("score", parents=[common], help="Score a vector string or a dataset file")
    score.add_argument("target", help="CVSS:3.1 vector string or dataset path")

    predict = sub.add_parser("predict", parents=[common], help="Collect model predictions")
    predict.add_argument("--mode", choices=RUN_MODES, help="live, replay or record")
    predict.add_argument("--shots", type=int, choices=ALLOWED_SHOTS, help="Worked examples per prompt")
    predict.add_argument("--batch-size", type=int, help="Descriptions per prompt")
    predict.add_argument("--cache", help="Replay cache path")
    predict.add_argument("--providers", help="Provider configuration JSON")

    for name, text in (
        ("evaluate", "Per-metric evaluation report"),
        ("analyze", "Distributions, association and description analysis"),
        ("report", "evaluate + analyze + meta"),
    ):
        command = sub.add_parser(name, parents=[common], help=text)
        command.add_argument("--plots", action="store_true", help="Also render SVG figures")

    sub.add_parser("meta", parents=[common], help="Meta-classification over model predictions")
    return parser


def resolve_config(args: argparse.Namespace, base: Optional[AppConfig] = None) -> AppConfig:
    """Apply command-line overrides to the environment configuration."""
    base = base or load_config()
    return base.with_overrides(
        out_dir=args.out,
        dataset_path=args.dataset,
        predictions_path=args.predictions,
        seed=args.seed,
        log_level=args.log_level,
        mode=getattr(args, "mode", None),
        shots=getattr(args, "shots", None),
        batch_size=getattr(args, "batch_size", None),
        cache_path=getattr(args, "cache", None),
        providers_file=getattr(args, "providers", None),
    )


def run(
    argv: Optional[List[str]] = None,
    stdout: Optional[TextIO] = None,
    stderr: Optional[TextIO] = None,
    transport: Optional[ChatTransport] = None,
    environ: Optional[Mapping[str, str]] = None,
    sleep: Callable = asyncio.sleep,
    base_config: Optional[AppConfig] = None
) -> int:
    """
    Parse arguments, run one subcommand and return its exit code.

    Args:
        argv: Arguments without the program name (sys.argv[1:] when None)
        stdout: Command output stream
        stderr: Error message stream
        transport: HTTP transport override for predict
        environ: Credential lookup override for predict
        sleep: Backoff sleep override for predict
        base_config: Configuration to apply overrides to (environment when None)
    """
    stderr = stderr or sys.stderr
    args = build_parser().parse_args(argv)

    try:
        config = resolve_config(args, base_config)
    except BenchError as e:
        print(ConsoleMessages.error(str(e)), file=stderr)
        return e.exit_code

    setup_logging(config.log_level, config.log_file)
    logger = get_logger(__name__)
    logger.info("Running command", command=args.command, out_dir=config.out_dir, seed=config.seed)

    commands = BenchCommands(
        config,
        stdout=stdout,
        transport=transport,
        environ=environ,
        sleep=sleep,
        plots=getattr(args, "plots", False),
        strict=getattr(args, "strict", False),
    )

    try:
        if args.command == "ingest":
            return commands.cmd_ingest(args.input_dir)
        if args.command == "score":
            return commands.cmd_score(args.target)
        if args.command == "predict":
            return asyncio.run(commands.cmd_predict())
        if args.command == "evaluate":
            return commands.cmd_evaluate()
        if args.command == "analyze":
            return commands.cmd_analyze()
        if args.command == "meta":
            return commands.cmd_meta()
        return commands.cmd_report()
    except BenchError as e:
        logger.error("Command failed", command=args.command, error=str(e), error_type=type(e).__name__)
        print(ConsoleMessages.error(str(e)), file=stderr)
        return e.exit_code
    except Exception as e:
        logger.exception("Unexpected error", command=args.command, error=str(e))
        print(ConsoleMessages.error(f"internal error: {e}"), file=stderr)
        return InvariantViolation.exit_code


def main() -> None:
    try:
        sys.exit(run())
    except KeyboardInterrupt:
        print("\nInterrupted", file=sys.stderr)
        sys.exit(130)


if __name__ == "__main__":
    main()
