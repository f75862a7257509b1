"""Corpus validation utilities for integrity checks."""

from collections import Counter

from pydantic import BaseModel

from src.models.corpus import CorpusSpec, Utterance


class CorpusValidationReport(BaseModel):
    """Structured validation results for corpus integrity checks.

    Attributes:
        count_pass: Whether the utterance count matches the corpus spec.
        actual_count: Actual number of utterances.
        expected_count: Expected number of utterances.
        length_range: (min T, max T) observed.
        lengths_pass: Whether every T lies in [t_min, t_max].
        labels_pass: Whether every label lies in [0, C).
        shapes_pass: Whether every utterance has the corpus spec's frame widths.
        unique_ids: Whether all ids are unique.
        total_frames: Frames across the corpus.
        overall_pass: Combined pass/fail status.
    """

    count_pass: bool
    actual_count: int
    expected_count: int
    length_range: tuple[int, int]
    lengths_pass: bool
    labels_pass: bool
    shapes_pass: bool
    unique_ids: bool
    total_frames: int
    overall_pass: bool

    def summary(self) -> str:
        """Generate human-readable summary of validation results.

        Returns:
            Multi-line string with formatted validation results.
        """
        lo, hi = self.length_range
        lines = [
            f"Utterances: {'✅' if self.count_pass else '❌'} "
            f"({self.actual_count}/{self.expected_count})",
            f"Lengths: {'✅' if self.lengths_pass else '❌'} (T in [{lo}, {hi}])",
            f"Labels: {'✅' if self.labels_pass else '❌'}",
            f"Shapes: {'✅' if self.shapes_pass else '❌'}",
            f"Unique IDs: {'✅' if self.unique_ids else '❌'}",
            f"Total frames: {self.total_frames}",
            f"\nOverall: {'✅ PASS' if self.overall_pass else '❌ FAIL'}",
        ]
        return "\n".join(lines)


def validate_unique_ids(utterances: list[Utterance]) -> bool:
    """Check all utterance ids are unique."""
    counts = Counter(u.id for u in utterances)
    return all(c == 1 for c in counts.values())


def validate_lengths(utterances: list[Utterance], spec: CorpusSpec) -> bool:
    return all(spec.t_min <= u.frames <= spec.t_max for u in utterances)


def validate_labels(utterances: list[Utterance], vocab_size: int) -> bool:
    """Check every label lies in [0, vocab_size)."""
    return all(
        u.frames == 0 or (int(u.labels.min()) >= 0 and int(u.labels.max()) < vocab_size)
        for u in utterances
    )


def validate_shapes(utterances: list[Utterance], spec: CorpusSpec) -> bool:
    return all(
        u.visual.shape == (u.frames, spec.d_visual_raw)
        and u.audio.shape == (u.frames, spec.d_audio_raw)
        for u in utterances
    )


def validate_corpus(utterances: list[Utterance], spec: CorpusSpec) -> CorpusValidationReport:
    """Run all validation checks against the generating spec.

    Args:
        utterances: Corpus to validate.
        spec: Spec the corpus should satisfy.

    Returns:
        CorpusValidationReport with all check results aggregated.
    """
    lengths = [u.frames for u in utterances]
    count_pass = len(utterances) == spec.n_utterances
    lengths_pass = validate_lengths(utterances, spec)
    labels_pass = validate_labels(utterances, spec.vocab_size)
    shapes_pass = validate_shapes(utterances, spec)
    unique_ids = validate_unique_ids(utterances)

    return CorpusValidationReport(
        count_pass=count_pass,
        actual_count=len(utterances),
        expected_count=spec.n_utterances,
        length_range=(min(lengths), max(lengths)) if lengths else (0, 0),
        lengths_pass=lengths_pass,
        labels_pass=labels_pass,
        shapes_pass=shapes_pass,
        unique_ids=unique_ids,
        total_frames=sum(lengths),
        overall_pass=all([count_pass, lengths_pass, labels_pass, shapes_pass, unique_ids]),
    )
