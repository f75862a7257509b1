"""Run configuration: model dimensions, training, evaluation and diagnostics.

A `RunConfig` is a single JSON document; every field has a default, unknown
keys are rejected, and CLI flags override file values.
"""

from __future__ import annotations

import json
from enum import StrEnum
from pathlib import Path
from typing import Any, Literal

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from src.exceptions import ConfigurationError
from src.models.corpus import CorpusSpec


class AblationMode(StrEnum):
    """Which part of the full system is removed."""

    FULL = "full"
    NO_INVARIANT = "no_invariant"
    NO_SPECIFIC = "no_specific"
    NO_ENCODERS = "no_encoders"
    NO_GENERATOR = "no_generator"
    NO_DISCRIMINATOR = "no_discriminator"
    NO_ADVERSARIAL = "no_adversarial"
    NO_MIM = "no_mim"
    BASE = "base"


# Row order of the ablation summary table.
ABLATION_TABLE: tuple[AblationMode, ...] = (
    AblationMode.FULL,
    AblationMode.NO_INVARIANT,
    AblationMode.NO_SPECIFIC,
    AblationMode.NO_ENCODERS,
    AblationMode.NO_GENERATOR,
    AblationMode.NO_DISCRIMINATOR,
    AblationMode.NO_ADVERSARIAL,
    AblationMode.NO_MIM,
)


class Modality(StrEnum):
    """Input modalities fed to the model; the missing one is zeroed."""

    AV = "AV"
    A = "A"
    V = "V"


class NoiseType(StrEnum):
    GAUSSIAN = "gaussian"
    BABBLE = "babble"


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class ModelConfig(_Section):
    """Network dimensions.

    Attributes:
        d_model: Representation width D.
        heads: Attention heads H.
        ffn_dim: Feed-forward hidden width.
        n_encoder_layers: Encoder layers per modality.
        n_generator_layers: Hybrid-modal attention blocks in the generator.
        n_recognizer_layers: Self-attention layers in the recognizer.
        disc_hidden: Discriminator hidden width; D/2 when unset.
        disc_hidden_activation: PReLU between the two discriminator layers.
        dropout: Dropout after attention and feed-forward sublayers.
        positional_encoding: Add sinusoidal positions to front-end outputs.
        encoder_cross_source: Other stream's state used as encoder cross-attention memory.
        layer_norm_eps: Variance guard of every layer norm.
    """

    d_model: int = Field(default=32, ge=2)
    heads: int = Field(default=4, ge=1)
    ffn_dim: int = Field(default=64, ge=1)
    n_encoder_layers: int = Field(default=3, ge=1)
    n_generator_layers: int = Field(default=3, ge=1)
    n_recognizer_layers: int = Field(default=2, ge=0)
    disc_hidden: int | None = Field(default=None, ge=1)
    disc_hidden_activation: bool = True
    dropout: float = Field(default=0.1, ge=0.0, lt=1.0)
    positional_encoding: bool = False
    encoder_cross_source: Literal["post_self", "pre_self"] = "post_self"
    layer_norm_eps: float = Field(default=1e-5, gt=0)

    @model_validator(mode="after")
    def _check_heads(self) -> ModelConfig:
        if self.d_model % self.heads != 0:
            raise ValueError(f"d_model ({self.d_model}) must be divisible by heads ({self.heads})")
        return self

    @property
    def disc_hidden_dim(self) -> int:
        return self.disc_hidden if self.disc_hidden is not None else max(1, self.d_model // 2)


class TrainConfig(_Section):
    """Optimisation hyperparameters.

    Attributes:
        lambda_gan: Weight of the generator adversarial term.
        lambda_mim: Weight of the contrastive alignment term.
        temperature: Contrastive temperature τ.
        learning_rate: Peak learning rate.
        warmup_steps: Linear warmup length.
        total_steps: Steps in a run; the rate decays linearly to zero here.
        batch_size: Utterances per step.
        seed: Seed for initialisation, batching, dropout and augmentation.
        noise_prob: Probability an utterance's audio is noised during training.
        train_snr_db: SNR of training noise.
        ablation: Ablation mode.
        modality: Input modality for training and evaluation.
        grad_clip: Global gradient-norm clip applied in each phase.
        precision: Floating-point precision of parameters and activations.
        val_fraction: Held-out fraction of the corpus.
        eval_interval: Steps between validation evaluations (0 disables).
        checkpoint_interval: Steps between checkpoints (0 keeps only the final one).
        bucket_pool: Batches per length-sorting pool.
    """

    lambda_gan: float = Field(default=0.01, ge=0)
    lambda_mim: float = Field(default=0.005, ge=0)
    temperature: float = Field(default=0.1, gt=0)
    learning_rate: float = Field(default=1e-3, gt=0)
    warmup_steps: int = Field(default=200, ge=0)
    total_steps: int = Field(default=2000, ge=1)
    adam_beta1: float = Field(default=0.9, ge=0, lt=1)
    adam_beta2: float = Field(default=0.999, ge=0, lt=1)
    adam_eps: float = Field(default=1e-8, gt=0)
    batch_size: int = Field(default=8, ge=1)
    seed: int = Field(default=0, ge=0)
    noise_prob: float = Field(default=0.25, ge=0, le=1)
    train_snr_db: float = 0.0
    noise_type: NoiseType = NoiseType.GAUSSIAN
    ablation: AblationMode = AblationMode.FULL
    modality: Modality = Modality.AV
    grad_clip: float = Field(default=5.0, gt=0)
    precision: Literal["float32", "float64"] = "float32"
    val_fraction: float = Field(default=0.1, ge=0, lt=1)
    eval_interval: int = Field(default=200, ge=0)
    checkpoint_interval: int = Field(default=500, ge=0)
    bucket_pool: int = Field(default=8, ge=1)


class EvalConfig(_Section):
    """Evaluation protocol.

    Attributes:
        snr_levels: SNR levels (dB) whose TERs are averaged into the noisy score.
        seed: Base seed of the per-level noise streams.
        noise_type: Noise added at evaluation.
    """

    snr_levels: tuple[float, ...] = (-10.0, -5.0, 0.0, 5.0, 10.0)
    seed: int = Field(default=1234, ge=0)
    noise_type: NoiseType = NoiseType.GAUSSIAN


class DiagnoseConfig(_Section):
    """Diagnostic export settings.

    Attributes:
        max_similarity_utterances: Utterances whose similarity matrices are written.
        histogram_bins: Bins of the discriminator-output histogram over [0, 1].
    """

    max_similarity_utterances: int = Field(default=8, ge=0)
    histogram_bins: int = Field(default=10, ge=1)


class AblationConfig(_Section):
    """Ablation sweep settings.

    Attributes:
        seeds: Training seeds per mode.
        include_base: Add the base-model row after the eight ablation rows.
    """

    seeds: tuple[int, ...] = (0, 1, 2)
    include_base: bool = False


class PathsConfig(_Section):
    corpus_dir: str | None = None
    out_dir: str | None = None


class RunConfig(_Section):
    """Complete configuration of a command invocation."""

    corpus: CorpusSpec = Field(default_factory=CorpusSpec)
    model: ModelConfig = Field(default_factory=ModelConfig)
    train: TrainConfig = Field(default_factory=TrainConfig)
    eval: EvalConfig = Field(default_factory=EvalConfig)
    diagnose: DiagnoseConfig = Field(default_factory=DiagnoseConfig)
    ablation: AblationConfig = Field(default_factory=AblationConfig)
    paths: PathsConfig = Field(default_factory=PathsConfig)

    def to_json(self) -> str:
        """Canonical JSON (sorted keys) used in checkpoints and reports."""
        return json.dumps(self.model_dump(mode="json"), sort_keys=True, separators=(",", ":"))

    def with_updates(self, updates: dict[str, Any]) -> RunConfig:
        """Apply dotted-path overrides ("train.lambda_mim": 0.0) and re-validate."""
        data = self.model_dump(mode="json")
        for dotted, value in updates.items():
            section, _, key = dotted.partition(".")
            if not key or section not in data or not isinstance(data[section], dict):
                raise ConfigurationError(f"unknown configuration key '{dotted}'")
            if key not in data[section]:
                raise ConfigurationError(f"unknown configuration key '{dotted}'")
            data[section][key] = value
        return parse_run_config(data)


def parse_run_config(data: dict[str, Any]) -> RunConfig:
    """Validate a configuration mapping.

    Raises:
        ConfigurationError: Listing every invalid or unknown field.
    """
    try:
        return RunConfig.model_validate(data)
    except ValidationError as e:
        problems = "; ".join(
            f"{'.'.join(str(p) for p in err['loc'])}: {err['msg']}" for err in e.errors()
        )
        raise ConfigurationError(f"invalid configuration: {problems}") from e


def load_run_config(path: str | Path | None) -> RunConfig:
    """Load a RunConfig from a JSON file, or defaults when path is None."""
    if path is None:
        return RunConfig()
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as e:
        raise ConfigurationError(f"cannot read configuration {path}: {e}") from e
    if not isinstance(data, dict):
        raise ConfigurationError(f"configuration {path} must be a JSON object")
    return parse_run_config(data)
