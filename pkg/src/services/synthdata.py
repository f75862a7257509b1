"""Synthetic paired-modality corpus and the audio noise-augmentation protocol."""

import logging
import math
from collections.abc import Sequence
from concurrent.futures import ThreadPoolExecutor

import numpy as np
import numpy.typing as npt

from src.config import settings
from src.exceptions import DimensionError, InputError
from src.models.corpus import CorpusSpec, Utterance
from src.models.run_config import NoiseType

logger = logging.getLogger(__name__)

# Clean-condition sentinel accepted by add_noise.
CLEAN_SNR = math.inf

# Utterances mixed into one babble noise track.
BABBLE_TALKERS = 3

FloatArray = npt.NDArray[np.float32]


class _MixingModel:
    """Per-corpus draws shared by every utterance: symbol embeddings and modality maps."""

    def __init__(self, spec: CorpusSpec) -> None:
        rng = np.random.default_rng([spec.seed, 0])
        latent = spec.latent_dim
        self.embedding = rng.standard_normal((spec.vocab_size, latent))
        gain = spec.mixing_scale / math.sqrt(latent)
        self.visual_map = rng.standard_normal((latent, spec.d_visual_raw)) * gain
        self.audio_map = rng.standard_normal((latent, spec.d_audio_raw)) * gain


def _utterance(spec: CorpusSpec, mixing: _MixingModel, index: int) -> Utterance:
    rng = np.random.default_rng([spec.seed, 1, index])
    frames = int(rng.integers(spec.t_min, spec.t_max + 1))
    labels = rng.integers(0, spec.vocab_size, size=frames).astype(np.int64)
    latent = mixing.embedding[labels]
    visual = latent @ mixing.visual_map + spec.noise_std_visual * rng.standard_normal(
        (frames, spec.d_visual_raw)
    )
    audio = latent @ mixing.audio_map + spec.noise_std_audio * rng.standard_normal(
        (frames, spec.d_audio_raw)
    )
    return Utterance(
        id=f"utt{index:05d}",
        visual=visual.astype(np.float32),
        audio=audio.astype(np.float32),
        labels=labels,
    )


def generate_corpus(spec: CorpusSpec) -> list[Utterance]:
    """Generate the synthetic corpus described by a spec.

    Every symbol owns a fixed latent embedding; each modality observes it
    through its own random linear map plus Gaussian noise. Each utterance
    draws from its own RNG stream derived from (seed, index), so generation
    can run in parallel and the result is a pure function of the corpus spec.

    Args:
        spec: Corpus parameters.

    Returns:
        Utterances in index order.
    """
    mixing = _MixingModel(spec)
    workers = settings.worker_count(spec.n_utterances)
    logger.info(
        "Generating %d utterances (seed=%d, C=%d, workers=%d)",
        spec.n_utterances,
        spec.seed,
        spec.vocab_size,
        workers,
    )
    if workers == 1:
        return [_utterance(spec, mixing, i) for i in range(spec.n_utterances)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda i: _utterance(spec, mixing, i), range(spec.n_utterances)))


def _signal_power(audio: npt.NDArray[np.floating]) -> float:
    return float(np.mean(np.square(audio, dtype=np.float64)))


def scale_to_snr(
    signal: npt.NDArray[np.floating], noise: npt.NDArray[np.floating], snr_db: float
) -> npt.NDArray[np.float64]:
    """Rescale noise so power(signal) / power(noise) = 10^(snr_db/10).

    Returns the rescaled noise in 64-bit; an all-zero noise is returned unchanged.
    """
    noise64 = np.asarray(noise, dtype=np.float64)
    noise_power = _signal_power(noise64)
    if noise_power == 0.0:
        return noise64
    target = _signal_power(signal) / (10.0 ** (snr_db / 10.0))
    return noise64 * math.sqrt(target / noise_power)


def _prepare(audio: npt.NDArray[np.floating], snr_db: float) -> bool:
    """Validate input; False when no noise should be added."""
    if audio.ndim != 2 or audio.size == 0:
        raise InputError(f"noise needs non-empty T×D audio, got shape {audio.shape}")
    if math.isinf(snr_db) and snr_db > 0:
        return False
    if math.isnan(snr_db):
        raise InputError("snr_db must not be NaN")
    if _signal_power(audio) == 0.0:
        logger.warning("All-zero audio; skipping noise at %.1f dB", snr_db)
        return False
    return True


def add_noise(audio: FloatArray, snr_db: float, rng: np.random.Generator) -> FloatArray:
    """Add Gaussian noise at a given signal-to-noise ratio.

    Args:
        audio: T×D audio frames.
        snr_db: Target SNR in dB; +inf leaves the audio clean.
        rng: Noise source.

    Returns:
        Noisy copy of the audio, in the input dtype.

    Raises:
        InputError: If the audio is empty.
    """
    if not _prepare(audio, snr_db):
        return audio.copy()
    noise = scale_to_snr(audio, rng.standard_normal(audio.shape), snr_db)
    return (audio + noise).astype(audio.dtype)


def babble_track(
    frames: int,
    width: int,
    pool: Sequence[FloatArray],
    rng: np.random.Generator,
) -> npt.NDArray[np.float64]:
    """Sum of randomly chosen pool utterances, each tiled or cropped to `frames`."""
    if not pool:
        raise InputError("babble noise needs a non-empty utterance pool")
    track = np.zeros((frames, width), dtype=np.float64)
    picks = rng.choice(len(pool), size=min(BABBLE_TALKERS, len(pool)), replace=False)
    for idx in picks:
        talker = pool[int(idx)]
        if talker.ndim != 2 or talker.shape[1] != width:
            raise DimensionError(f"babble pool entry has width {talker.shape}, expected {width}")
        start = int(rng.integers(0, talker.shape[0]))
        rows = (start + np.arange(frames)) % talker.shape[0]
        track += talker[rows]
    return track


def add_babble(
    audio: FloatArray,
    pool: Sequence[FloatArray],
    snr_db: float,
    rng: np.random.Generator,
) -> FloatArray:
    """Add speech-like noise mixed from other utterances' audio.

    Uses the same SNR scaling as `add_noise`.

    Args:
        audio: T×D audio frames.
        pool: Audio of other utterances to mix from.
        snr_db: Target SNR in dB; +inf leaves the audio clean.
        rng: Selection source.

    Returns:
        Noisy copy of the audio.
    """
    if not _prepare(audio, snr_db):
        return audio.copy()
    track = babble_track(audio.shape[0], audio.shape[1], pool, rng)
    if _signal_power(track) == 0.0:
        logger.warning("Babble track is silent; falling back to Gaussian noise")
        track = rng.standard_normal(audio.shape)
    return (audio + scale_to_snr(audio, track, snr_db)).astype(audio.dtype)


def corrupt(
    utterance: Utterance,
    snr_db: float,
    noise_type: NoiseType,
    rng: np.random.Generator,
    pool: Sequence[FloatArray] = (),
) -> Utterance:
    """Return a copy of an utterance with noisy audio at snr_db."""
    if noise_type is NoiseType.BABBLE:
        others = [a for a in pool if a is not utterance.audio]
        audio = add_babble(utterance.audio, others, snr_db, rng)
    else:
        audio = add_noise(utterance.audio, snr_db, rng)
    return utterance.with_audio(audio, None if math.isinf(snr_db) else snr_db)
