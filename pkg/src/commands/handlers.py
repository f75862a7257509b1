"""Command handlers behind the `mirgan` command line.

Each handler takes the parsed arguments, does its work through the service
layer and returns a process exit code. Errors propagate as `MirGanError`
subclasses; `src.main` maps them to exit codes.
"""

import argparse
import json
import logging
import shutil
from pathlib import Path
from typing import Any

from src.exceptions import ConfigurationError, DivergenceError, RefusalError, UsageError
from src.models.corpus import Utterance
from src.models.metrics import ErrorReport
from src.models.run_config import Modality, RunConfig, load_run_config
from src.services.ablation import AblationRunner
from src.services.checkpoint import TrainState, load_checkpoint
from src.services.corpus_store import CorpusStore, load_corpus, read_manifest, save_corpus
from src.services.diagnostics import run_diagnostics, write_diagnostics
from src.services.evaluation import evaluate
from src.services.gradcheck_suite import run_gradcheck
from src.services.network.params import InputDims
from src.services.synthdata import generate_corpus
from src.services.trainer import Trainer
from src.utils.corpus_validator import validate_corpus
from src.utils.run_logger import get_run_logger

logger = logging.getLogger(__name__)

CONFIG_FILE = "config.json"
DIVERGENCE_FILE = "divergence.json"
EVAL_REPORT_FILE = "eval_report.json"


def _parse_value(raw: str) -> Any:
    try:
        return json.loads(raw)
    except json.JSONDecodeError:
        return raw


def parse_overrides(pairs: list[str] | None) -> dict[str, Any]:
    """Turn ["train.lambda_mim=0", ...] into {"train.lambda_mim": 0, ...}."""
    updates: dict[str, Any] = {}
    for pair in pairs or []:
        key, sep, raw = pair.partition("=")
        if not sep or not key.strip():
            raise ConfigurationError(f"--set expects section.field=value, got '{pair}'")
        updates[key.strip()] = _parse_value(raw)
    return updates


def parse_snr_list(raw: str | None) -> list[float] | None:
    """Comma-separated SNR levels; an empty string means clean only, None the configured levels."""
    if raw is None:
        return None
    try:
        return [float(x) for x in raw.split(",") if x.strip()]
    except ValueError as e:
        raise UsageError(f"--snr expects comma-separated numbers, got '{raw}'") from e


def parse_seed_list(raw: str | None) -> list[int] | None:
    if raw is None:
        return None
    try:
        seeds = [int(x) for x in raw.split(",") if x.strip()]
    except ValueError as e:
        raise UsageError(f"--seeds expects comma-separated integers, got '{raw}'") from e
    if not seeds:
        raise UsageError("--seeds needs at least one seed")
    return seeds


def resolve_config(args: argparse.Namespace, seed_field: str = "train.seed") -> RunConfig:
    """Configuration file, then --set overrides, then --seed, --out and command flags."""
    config = load_run_config(args.config)
    updates = parse_overrides(args.set)
    if args.seed is not None:
        updates[seed_field] = args.seed
    if args.out is not None:
        updates["paths.out_dir"] = str(args.out)
    if getattr(args, "corpus", None) is not None:
        updates["paths.corpus_dir"] = str(args.corpus)
    if getattr(args, "ablation", None) is not None:
        updates["train.ablation"] = args.ablation
    if getattr(args, "modality", None) is not None and args.command == "train":
        updates["train.modality"] = args.modality
    return config.with_updates(updates) if updates else config


def _required_path(value: str | None, what: str) -> Path:
    if value is None:
        raise UsageError(f"no {what} given (use the flag or the paths section of the config)")
    return Path(value)


def prepare_out_dir(path: Path, force: bool) -> Path:
    """Create an output directory, refusing to touch a non-empty one unless forced."""
    if path.exists() and any(path.iterdir()):
        if not force:
            raise RefusalError(f"output directory {path} is not empty (use --force to overwrite)")
        logger.warning("Removing existing contents of %s", path)
        shutil.rmtree(path)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _print_json(payload: dict[str, Any]) -> None:
    print(json.dumps(payload, indent=2, sort_keys=True))


class CorpusData:
    """A loaded corpus with its train/validation split."""

    def __init__(self, path: Path, config: RunConfig) -> None:
        manifest = read_manifest(path)
        self.path = path
        self.dims = InputDims(manifest.d_visual, manifest.d_audio, manifest.vocab_size)
        self.store = CorpusStore(load_corpus(path))
        self.resplit(config)

    def resplit(self, config: RunConfig) -> None:
        """Recompute the train/validation split from a configuration."""
        self.train, self.val = self.store.split(config.train.val_fraction, config.corpus.seed)

    def subset(self, name: str) -> list[Utterance]:
        match name:
            case "train":
                return self.train
            case "val":
                return self.val
            case "all":
                return self.store.get_all()
        raise UsageError(f"unknown split '{name}'")


def _load_corpus(config: RunConfig) -> CorpusData:
    return CorpusData(_required_path(config.paths.corpus_dir, "corpus directory"), config)


def _load_state(args: argparse.Namespace, config: RunConfig, dims: InputDims) -> TrainState:
    path = _required_path(args.checkpoint, "checkpoint")
    return load_checkpoint(path, expected_config=config, expected_dims=dims)


def cmd_gen_data(args: argparse.Namespace) -> int:
    """Generate the synthetic corpus and write it to the output directory."""
    config = resolve_config(args, seed_field="corpus.seed")
    out = prepare_out_dir(
        _required_path(config.paths.out_dir or config.paths.corpus_dir, "output directory"),
        args.force,
    )
    utterances = generate_corpus(config.corpus)
    report = validate_corpus(utterances, config.corpus)
    logger.info("Corpus validation:\n%s", report.summary())
    save_corpus(utterances, out, config.corpus)
    _print_json(
        {"path": str(out), "utterances": len(utterances), "frames": report.total_frames}
    )
    return 0


def cmd_train(args: argparse.Namespace) -> int:
    """Train a model, resuming from --checkpoint when given."""
    config = resolve_config(args)
    corpus = _load_corpus(config)
    out = _required_path(config.paths.out_dir, "output directory")
    run_id = out.name
    run_log = get_run_logger()

    if args.checkpoint is not None:
        state = _load_state(args, config, corpus.dims)
        logger.info("Resuming from %s at step %d", args.checkpoint, state.step)
        saved = state.config
        if (config.train.val_fraction, config.corpus.seed) != (
            saved.train.val_fraction,
            saved.corpus.seed,
        ):
            logger.warning("Split settings differ from the checkpoint; using the checkpoint's")
        config = state.config
        corpus.resplit(config)
        out.mkdir(parents=True, exist_ok=True)
    else:
        prepare_out_dir(out, args.force)
    (out / CONFIG_FILE).write_text(
        json.dumps(config.model_dump(mode="json"), indent=2, sort_keys=True) + "\n",
        encoding="utf-8",
    )

    trainer = Trainer(config, corpus.train, corpus.dims, corpus.val, run_id=run_id)
    if args.checkpoint is None:
        state = trainer.init_state()
    else:
        trainer.check_resumable(state)
    run_log.log_run_start(run_id, "train", config.model_dump(mode="json"))
    try:
        state = trainer.fit(state, out, args.steps)
    except DivergenceError as e:
        report = ErrorReport.from_exception(e, e.code)
        (out / DIVERGENCE_FILE).write_text(report.model_dump_json(indent=2) + "\n", encoding="utf-8")
        run_log.log_run_end(run_id, "diverged", step=e.step)
        raise
    best = state.best_val.model_dump() if state.best_val else None
    run_log.log_run_end(run_id, "ok", step=state.step)
    _print_json({"out_dir": str(out), "step": state.step, "best_val": best})
    return 0


def cmd_eval(args: argparse.Namespace) -> int:
    """Score a checkpoint on clean and noisy copies of a corpus split."""
    config = resolve_config(args)
    corpus = _load_corpus(config)
    state = _load_state(args, config, corpus.dims)
    modality = Modality(args.modality) if args.modality else None
    eval_config = state.config.model_copy(update={"eval": config.eval})
    report = evaluate(
        state.params,
        eval_config,
        corpus.subset(args.split),
        snr_levels=parse_snr_list(args.snr),
        modality=modality,
    )
    report = report.model_copy(update={"checkpoint_step": state.step})
    payload = report.model_dump(mode="json")
    if config.paths.out_dir is not None:
        out = Path(config.paths.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / EVAL_REPORT_FILE).write_text(
            json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )
    _print_json(payload)
    return 0


def cmd_gradcheck(args: argparse.Namespace) -> int:
    """Run the gradient-check suite; exit 1 if any check fails."""
    report = run_gradcheck(args.scope)
    print(report.table())
    return 0 if report.passed else 1


def cmd_diagnose(args: argparse.Namespace) -> int:
    """Export alignment, discriminator and embedding diagnostics for a checkpoint."""
    config = resolve_config(args)
    corpus = _load_corpus(config)
    state = _load_state(args, config, corpus.dims)
    out = prepare_out_dir(_required_path(config.paths.out_dir, "output directory"), args.force)
    diag_config = state.config.model_copy(update={"diagnose": config.diagnose})
    result = run_diagnostics(state.params, diag_config, corpus.subset(args.split))
    write_diagnostics(result, out, diag_config)
    _print_json(result.summary.model_dump(mode="json"))
    return 0


def cmd_ablate(args: argparse.Namespace) -> int:
    """Train every ablation mode under shared seeds and write summary.csv."""
    config = resolve_config(args)
    corpus = _load_corpus(config)
    out = prepare_out_dir(_required_path(config.paths.out_dir, "output directory"), args.force)
    seeds = parse_seed_list(args.seeds) or list(config.ablation.seeds)
    include_base = args.include_base or config.ablation.include_base
    runner = AblationRunner(config, corpus.train, corpus.val, corpus.dims, until=args.steps)
    rows = runner.run(out, seeds, include_base)
    _print_json({"out_dir": str(out), "rows": [r.model_dump(mode="json") for r in rows]})
    return 0
