"""Shared test fixtures for mirgan-desk tests."""

from pathlib import Path

import numpy as np
import pytest

from src.models.corpus import CorpusSpec, Utterance
from src.models.run_config import (
    EvalConfig,
    ModelConfig,
    PathsConfig,
    RunConfig,
    TrainConfig,
)
from src.services.corpus_store import save_corpus
from src.services.network.params import InputDims
from src.services.synthdata import generate_corpus


@pytest.fixture
def tiny_spec() -> CorpusSpec:
    """A corpus small enough to train on in a test."""
    return CorpusSpec(
        seed=3,
        n_utterances=12,
        t_min=3,
        t_max=6,
        vocab_size=4,
        d_visual_raw=6,
        d_audio_raw=5,
        latent_dim=4,
    )


@pytest.fixture
def tiny_corpus(tiny_spec: CorpusSpec) -> list[Utterance]:
    """Generated utterances of the tiny spec."""
    return generate_corpus(tiny_spec)


@pytest.fixture
def tiny_dims(tiny_spec: CorpusSpec) -> InputDims:
    return InputDims(tiny_spec.d_visual_raw, tiny_spec.d_audio_raw, tiny_spec.vocab_size)


@pytest.fixture
def tiny_model() -> ModelConfig:
    return ModelConfig(
        d_model=8,
        heads=2,
        ffn_dim=16,
        n_encoder_layers=1,
        n_generator_layers=1,
        n_recognizer_layers=1,
        dropout=0.1,
    )


@pytest.fixture
def tiny_config(tiny_spec: CorpusSpec, tiny_model: ModelConfig) -> RunConfig:
    """Six-step run with evaluation and checkpoints every three steps."""
    return RunConfig(
        corpus=tiny_spec,
        model=tiny_model,
        train=TrainConfig(
            learning_rate=1e-2,
            warmup_steps=2,
            total_steps=6,
            batch_size=2,
            bucket_pool=2,
            noise_prob=0.5,
            val_fraction=0.25,
            eval_interval=3,
            checkpoint_interval=3,
        ),
        eval=EvalConfig(snr_levels=(-5.0, 5.0)),
    )


@pytest.fixture
def corpus_dir(tmp_path: Path, tiny_corpus: list[Utterance], tiny_spec: CorpusSpec) -> Path:
    """Tiny corpus written to disk."""
    path = tmp_path / "corpus"
    save_corpus(tiny_corpus, path, tiny_spec)
    return path


@pytest.fixture
def config_file(tmp_path: Path, tiny_config: RunConfig, corpus_dir: Path) -> Path:
    """Tiny configuration as a JSON file pointing at the tiny corpus."""
    config = tiny_config.model_copy(update={"paths": PathsConfig(corpus_dir=str(corpus_dir))})
    path = tmp_path / "config.json"
    path.write_text(config.model_dump_json(indent=2), encoding="utf-8")
    return path


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(0)
