"""Command-line entry point for mirgan-desk."""

import argparse
import logging
import sys
from collections.abc import Callable, Sequence

from src.commands import (
    cmd_ablate,
    cmd_diagnose,
    cmd_eval,
    cmd_gen_data,
    cmd_gradcheck,
    cmd_train,
)
from src.config import settings
from src.exceptions import CheckpointError, DimensionError, DivergenceError, MirGanError
from src.models.metrics import ErrorReport
from src.models.run_config import AblationMode, Modality
from src.services.gradcheck_suite import SCOPES

logging.basicConfig(
    level=settings.log_level.upper(),
    format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    stream=sys.stderr,
)
logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DIVERGED = 3
EXIT_INCOMPATIBLE = 4

Handler = Callable[[argparse.Namespace], int]


def exit_code_for(error: MirGanError) -> int:
    """Process exit code of an error."""
    if isinstance(error, DivergenceError):
        return EXIT_DIVERGED
    if isinstance(error, CheckpointError | DimensionError):
        return EXIT_INCOMPATIBLE
    return EXIT_USAGE


def _common() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="RunConfig JSON file (defaults for every missing field)")
    common.add_argument("--seed", type=int, help="Seed override (corpus seed for gen-data)")
    common.add_argument("--out", help="Output directory")
    common.add_argument("--force", action="store_true", help="Overwrite a non-empty output directory")
    common.add_argument(
        "--set",
        action="append",
        metavar="SECTION.FIELD=VALUE",
        help="Override one configuration field (repeatable; values parsed as JSON)",
    )
    return common


def build_parser() -> argparse.ArgumentParser:
    """Argument parser with one subcommand per handler."""
    parser = argparse.ArgumentParser(
        prog="mirgan",
        description="Desk-scale modality-invariant representation GAN harness",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    common = _common()

    def command(name: str, handler: Handler, help_text: str) -> argparse.ArgumentParser:
        p = sub.add_parser(name, parents=[common], help=help_text)
        p.set_defaults(handler=handler)
        return p

    def corpus_flag(p: argparse.ArgumentParser) -> None:
        p.add_argument("--corpus", help="Corpus directory written by gen-data")

    def split_flag(p: argparse.ArgumentParser, default: str) -> None:
        p.add_argument("--split", choices=("train", "val", "all"), default=default)

    command("gen-data", cmd_gen_data, "Generate the synthetic paired corpus")

    train = command("train", cmd_train, "Train a model")
    corpus_flag(train)
    train.add_argument("--steps", type=int, help="Stop after this step (schedule length unchanged)")
    train.add_argument("--ablation", choices=[m.value for m in AblationMode])
    train.add_argument("--modality", choices=[m.value for m in Modality])
    train.add_argument("--checkpoint", help="Resume from this checkpoint")

    evaluate = command("eval", cmd_eval, "Evaluate a checkpoint")
    corpus_flag(evaluate)
    split_flag(evaluate, "val")
    evaluate.add_argument("--checkpoint", required=True)
    evaluate.add_argument("--modality", choices=[m.value for m in Modality])
    evaluate.add_argument(
        "--snr",
        help='Comma-separated SNR levels in dB, e.g. --snr=-10,0,10; --snr="" for clean only',
    )

    gradcheck = command("gradcheck", cmd_gradcheck, "Run finite-difference gradient checks")
    gradcheck.add_argument("--scope", choices=SCOPES, default="ops")

    diagnose = command("diagnose", cmd_diagnose, "Export alignment and embedding diagnostics")
    corpus_flag(diagnose)
    split_flag(diagnose, "val")
    diagnose.add_argument("--checkpoint", required=True)

    ablate = command("ablate", cmd_ablate, "Train and compare every ablation mode")
    corpus_flag(ablate)
    ablate.add_argument("--seeds", help="Comma-separated training seeds")
    ablate.add_argument("--include-base", action="store_true", help="Also run the base model")
    ablate.add_argument("--steps", type=int, help="Stop each run after this step")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    """Run one command and return its exit code."""
    args = build_parser().parse_args(argv)
    try:
        code: int = args.handler(args)
    except MirGanError as e:
        logger.error("%s failed: %s", args.command, e)
        print(ErrorReport.from_exception(e, e.code).model_dump_json(), file=sys.stderr)
        return exit_code_for(e)
    return code


if __name__ == "__main__":
    sys.exit(main())
