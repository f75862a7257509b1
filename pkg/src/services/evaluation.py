"""Deterministic clean and noisy evaluation."""

import logging
import zlib
from collections.abc import Sequence
from concurrent.futures import ThreadPoolExecutor

import numpy as np
import numpy.typing as npt

from src.autodiff.tensor import Array
from src.config import settings
from src.models.corpus import Utterance
from src.models.metrics import EvalReport
from src.models.run_config import Modality, NoiseType, RunConfig
from src.services.network.model import forward, utterance_inputs
from src.services.network.params import ModelParams
from src.services.network.pipeline import pipeline_for
from src.services.network.recognition import batch_token_error_rate
from src.services.synthdata import corrupt

logger = logging.getLogger(__name__)


def snr_key(level: float) -> str:
    """Report key of an SNR level ("-10", "0", "2.5")."""
    return f"{level:g}"


def level_rng(seed: int, level: float) -> np.random.Generator:
    """Noise stream of one SNR level, independent of which other levels are evaluated."""
    return np.random.default_rng([seed, zlib.crc32(snr_key(level).encode())])


def predict(
    params: ModelParams,
    config: RunConfig,
    utterances: Sequence[Utterance],
    modality: Modality | None = None,
) -> list[Array]:
    """Class logits per utterance, without a tape or dropout.

    Args:
        params: Model parameters (read only).
        config: Run configuration (model dims and ablation).
        utterances: Utterances to score.
        modality: Input modality; defaults to the training modality.

    Returns:
        T×C logits per utterance.
    """
    view = params.bind(None)
    pipeline = pipeline_for(config.train)
    mode = modality or config.train.modality
    dtype = next(iter(params.arrays.values())).dtype
    logits: list[Array] = []
    for u in utterances:
        x_v, x_a = utterance_inputs(u, dtype)
        reps = forward(view, config.model, pipeline, mode, x_v, x_a)
        assert reps.logits is not None
        logits.append(reps.logits.data)
    return logits


def _ter(
    params: ModelParams,
    config: RunConfig,
    utterances: Sequence[Utterance],
    modality: Modality,
) -> float:
    logits = predict(params, config, utterances, modality)
    return batch_token_error_rate(logits, [u.labels for u in utterances])


def noisy_copies(
    utterances: Sequence[Utterance],
    level: float,
    noise_type: NoiseType,
    seed: int,
    pool: Sequence[npt.NDArray[np.float32]] = (),
) -> list[Utterance]:
    """Every utterance with noise at one SNR level, from the level's fixed stream."""
    rng = level_rng(seed, level)
    return [corrupt(u, level, noise_type, rng, pool) for u in utterances]


def evaluate(
    params: ModelParams,
    config: RunConfig,
    utterances: Sequence[Utterance],
    snr_levels: Sequence[float] | None = None,
    modality: Modality | None = None,
    noise_type: NoiseType | None = None,
) -> EvalReport:
    """Clean TER, TER per SNR level and their mean.

    Each level draws noise from its own fixed stream, so repeated evaluations
    of the same parameters give identical reports. Levels are scored in
    parallel up to the configured thread count.

    Args:
        params: Model parameters (read only).
        config: Run configuration.
        utterances: Evaluation utterances.
        snr_levels: SNR levels in dB; defaults to the configured levels. An
            empty sequence gives a clean-only report.
        modality: Input modality; defaults to the training modality.
        noise_type: Noise type; defaults to the configured type.

    Returns:
        EvalReport; `noisy` is the arithmetic mean of the per-level TERs.
    """
    levels = list(config.eval.snr_levels if snr_levels is None else snr_levels)
    mode = modality or config.train.modality
    kind = noise_type or config.eval.noise_type
    pool = [u.audio for u in utterances] if kind is NoiseType.BABBLE else []

    def score(level: float | None) -> float:
        if level is None:
            return _ter(params, config, utterances, mode)
        noisy = noisy_copies(utterances, level, kind, config.eval.seed, pool)
        return _ter(params, config, noisy, mode)

    conditions: list[float | None] = [None, *levels]
    workers = settings.worker_count(len(conditions))
    if workers == 1:
        results = [score(c) for c in conditions]
    else:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(score, conditions))

    clean, per_level = results[0], results[1:]
    per_snr = {snr_key(level): ter for level, ter in zip(levels, per_level, strict=True)}
    noisy = sum(per_level) / len(per_level) if per_level else None

    if len(levels) >= 2:
        lo, hi = min(levels), max(levels)
        if per_snr[snr_key(lo)] < per_snr[snr_key(hi)]:
            logger.warning(
                "TER at %s dB (%.4f) is below TER at %s dB (%.4f)",
                snr_key(lo),
                per_snr[snr_key(lo)],
                snr_key(hi),
                per_snr[snr_key(hi)],
            )

    return EvalReport(
        modality=mode.value,
        noise_type=kind.value,
        clean_ter=clean,
        per_snr=per_snr,
        noisy=noisy,
        frames=sum(u.frames for u in utterances),
        utterances=len(utterances),
    )
