"""Unit tests for corpus validation utilities."""

import numpy as np

from src.models.corpus import CorpusSpec, Utterance
from src.utils.corpus_validator import (
    CorpusValidationReport,
    validate_corpus,
    validate_labels,
    validate_lengths,
    validate_unique_ids,
)


def _utterance(utt_id: str, frames: int, label: int = 0) -> Utterance:
    return Utterance(
        id=utt_id,
        visual=np.zeros((frames, 6), dtype=np.float32),
        audio=np.zeros((frames, 5), dtype=np.float32),
        labels=np.full(frames, label, dtype=np.int64),
    )


class TestCorpusValidationReport:
    """Tests for CorpusValidationReport."""

    def test_summary_generates_readable_output(self) -> None:
        """Test that summary() produces human-readable validation results."""
        report = CorpusValidationReport(
            count_pass=True,
            actual_count=12,
            expected_count=12,
            length_range=(3, 6),
            lengths_pass=True,
            labels_pass=False,
            shapes_pass=True,
            unique_ids=True,
            total_frames=54,
            overall_pass=False,
        )

        summary = report.summary()

        assert "Utterances: ✅ (12/12)" in summary
        assert "T in [3, 6]" in summary
        assert "Labels: ❌" in summary
        assert "Overall: ❌ FAIL" in summary


class TestValidators:
    """Tests for the individual checks."""

    def test_generated_corpus_passes(
        self, tiny_corpus: list[Utterance], tiny_spec: CorpusSpec
    ) -> None:
        """Test that a freshly generated corpus passes every check."""
        report = validate_corpus(tiny_corpus, tiny_spec)
        assert report.overall_pass is True
        assert report.total_frames == sum(u.frames for u in tiny_corpus)

    def test_duplicate_ids(self) -> None:
        """Test that a repeated id fails uniqueness."""
        assert validate_unique_ids([_utterance("a", 3), _utterance("a", 4)]) is False

    def test_length_out_of_range(self, tiny_spec: CorpusSpec) -> None:
        """Test that a too-long utterance fails the length check."""
        assert validate_lengths([_utterance("a", tiny_spec.t_max + 1)], tiny_spec) is False

    def test_label_out_of_vocab(self) -> None:
        """Test that a label equal to C fails."""
        assert validate_labels([_utterance("a", 3, label=4)], 4) is False
        assert validate_labels([_utterance("a", 3, label=3)], 4) is True

    def test_count_mismatch_fails_overall(
        self, tiny_corpus: list[Utterance], tiny_spec: CorpusSpec
    ) -> None:
        """Test that a missing utterance fails the report."""
        report = validate_corpus(tiny_corpus[:-1], tiny_spec)
        assert report.count_pass is False
        assert report.overall_pass is False
