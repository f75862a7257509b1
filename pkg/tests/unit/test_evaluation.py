"""Unit tests for clean and noisy evaluation."""

import numpy as np
import pytest

from src.models.corpus import Utterance
from src.models.run_config import Modality, NoiseType, RunConfig
from src.services.evaluation import evaluate, level_rng, noisy_copies, predict, snr_key
from src.services.network.params import InputDims, ModelParams, init_params
from src.services.network.pipeline import pipeline_for


@pytest.fixture
def params(tiny_config: RunConfig, tiny_dims: InputDims) -> ModelParams:
    return init_params(tiny_config.model, tiny_dims, pipeline_for(tiny_config.train), seed=0)


class TestSnrKeys:
    """Tests for level keys and streams."""

    def test_key_format(self) -> None:
        """Test compact level formatting."""
        assert [snr_key(x) for x in (-10.0, 0.0, 2.5)] == ["-10", "0", "2.5"]

    def test_level_stream_is_fixed(self) -> None:
        """Test that a level's stream depends only on seed and level."""
        a = level_rng(1, 5.0).standard_normal(3)
        b = level_rng(1, 5.0).standard_normal(3)
        np.testing.assert_array_equal(a, b)
        assert not np.array_equal(a, level_rng(1, -5.0).standard_normal(3))

    def test_noisy_copies_independent_of_other_levels(
        self, tiny_corpus: list[Utterance]
    ) -> None:
        """Test that the noise at one level is reproducible on its own."""
        first = noisy_copies(tiny_corpus[:2], 0.0, NoiseType.GAUSSIAN, seed=4)
        noisy_copies(tiny_corpus[:2], 10.0, NoiseType.GAUSSIAN, seed=4)
        again = noisy_copies(tiny_corpus[:2], 0.0, NoiseType.GAUSSIAN, seed=4)
        np.testing.assert_array_equal(first[1].audio, again[1].audio)


class TestEvaluate:
    """Tests for evaluate."""

    def test_noisy_is_mean_of_levels(
        self, params: ModelParams, tiny_config: RunConfig, tiny_corpus: list[Utterance]
    ) -> None:
        """Test the report structure and the noisy mean."""
        report = evaluate(params, tiny_config, tiny_corpus)
        assert set(report.per_snr) == {"-5", "5"}
        assert report.noisy == pytest.approx(sum(report.per_snr.values()) / 2)
        assert 0.0 <= report.clean_ter <= 1.0
        assert report.frames == sum(u.frames for u in tiny_corpus)
        assert report.utterances == len(tiny_corpus)

    def test_clean_only(
        self, params: ModelParams, tiny_config: RunConfig, tiny_corpus: list[Utterance]
    ) -> None:
        """Test that no levels gives a clean-only report."""
        report = evaluate(params, tiny_config, tiny_corpus, snr_levels=[])
        assert report.per_snr == {}
        assert report.noisy is None

    def test_repeatable(
        self, params: ModelParams, tiny_config: RunConfig, tiny_corpus: list[Utterance]
    ) -> None:
        """Test that two evaluations of the same parameters agree exactly."""
        assert evaluate(params, tiny_config, tiny_corpus) == evaluate(
            params, tiny_config, tiny_corpus
        )

    def test_modality_and_noise_recorded(
        self, params: ModelParams, tiny_config: RunConfig, tiny_corpus: list[Utterance]
    ) -> None:
        """Test that overrides appear in the report."""
        report = evaluate(
            params,
            tiny_config,
            tiny_corpus,
            snr_levels=[0.0],
            modality=Modality.V,
            noise_type=NoiseType.BABBLE,
        )
        assert report.modality == "V"
        assert report.noise_type == "babble"

    def test_visual_only_ignores_audio_noise(
        self, params: ModelParams, tiny_config: RunConfig, tiny_corpus: list[Utterance]
    ) -> None:
        """Test that V-only TER is the same at every SNR level."""
        report = evaluate(params, tiny_config, tiny_corpus, modality=Modality.V)
        assert set(report.per_snr.values()) == {report.clean_ter}

    def test_predict_shapes(
        self, params: ModelParams, tiny_config: RunConfig, tiny_corpus: list[Utterance]
    ) -> None:
        """Test that predict returns T×C logits per utterance."""
        logits = predict(params, tiny_config, tiny_corpus[:3])
        assert [lg.shape for lg in logits] == [(u.frames, 4) for u in tiny_corpus[:3]]
