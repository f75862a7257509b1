"""Synthetic corpus specification and the paired utterance record."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

import numpy as np
import numpy.typing as npt
from pydantic import BaseModel, ConfigDict, Field, model_validator

from src.exceptions import InputError

DEFAULT_AUDIO_DIM = 26


class CorpusSpec(BaseModel):
    """Parameters of the synthetic paired-modality corpus.

    Attributes:
        seed: Master seed; the corpus is a pure function of the corpus spec.
        n_utterances: Number of utterances.
        t_min: Shortest utterance in frames.
        t_max: Longest utterance in frames.
        vocab_size: Number of frame symbols C.
        d_visual_raw: Raw visual frame width.
        d_audio_raw: Raw audio frame width (filter-bank width).
        latent_dim: Width of the shared per-symbol latent embedding.
        mixing_scale: Scale of the per-modality random linear maps.
        noise_std_visual: Std of Gaussian noise added to visual frames.
        noise_std_audio: Std of Gaussian noise added to audio frames.
    """

    model_config = ConfigDict(extra="forbid", frozen=True)

    seed: int = Field(default=0, ge=0)
    n_utterances: int = Field(default=2000, ge=1)
    t_min: int = Field(default=8, ge=2)
    t_max: int = Field(default=24, ge=2)
    vocab_size: int = Field(default=16, ge=2)
    d_visual_raw: int = Field(default=32, ge=1)
    d_audio_raw: int = Field(default=DEFAULT_AUDIO_DIM, ge=1)
    latent_dim: int = Field(default=32, ge=1)
    mixing_scale: float = Field(default=1.0, gt=0)
    noise_std_visual: float = Field(default=1.0, ge=0)
    noise_std_audio: float = Field(default=0.5, ge=0)

    @model_validator(mode="after")
    def _check_lengths(self) -> CorpusSpec:
        if self.t_max < self.t_min:
            raise ValueError(f"t_max ({self.t_max}) must be >= t_min ({self.t_min})")
        return self


@dataclass
class Utterance:
    """One synthetic paired sample.

    Attributes:
        id: Utterance identifier.
        visual: Visual frames, T×D_v_raw, float32.
        audio: Audio frames, T×D_a_raw, float32.
        labels: T symbol ids.
        snr_db: Noise level applied to the audio, None when clean.
    """

    id: str
    visual: npt.NDArray[np.float32]
    audio: npt.NDArray[np.float32]
    labels: npt.NDArray[np.int64]
    snr_db: float | None = None
    meta: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.visual.ndim != 2 or self.audio.ndim != 2 or self.labels.ndim != 1:
            raise InputError(f"utterance {self.id}: visual/audio must be 2-D and labels 1-D")
        frames = self.labels.shape[0]
        if self.visual.shape[0] != frames or self.audio.shape[0] != frames:
            raise InputError(
                f"utterance {self.id}: visual {self.visual.shape[0]}, audio "
                f"{self.audio.shape[0]} and labels {frames} must share length"
            )
        if frames and self.labels.min() < 0:
            raise InputError(f"utterance {self.id}: negative label")

    @property
    def frames(self) -> int:
        return int(self.labels.shape[0])

    def with_audio(self, audio: npt.NDArray[np.float32], snr_db: float | None) -> Utterance:
        """Copy of this utterance with replaced audio."""
        return Utterance(
            id=self.id,
            visual=self.visual,
            audio=audio,
            labels=self.labels,
            snr_db=snr_db,
            meta=dict(self.meta),
        )

    def check_vocab(self, vocab_size: int) -> None:
        """Raise InputError if any label falls outside [0, vocab_size)."""
        if self.frames and int(self.labels.max()) >= vocab_size:
            raise InputError(f"utterance {self.id}: label outside [0, {vocab_size})")
