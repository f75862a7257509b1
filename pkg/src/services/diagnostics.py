"""Alignment, discriminator and embedding diagnostics of a trained model.

Alignment is summarised by a diagonality score per modality: the mean cosine
similarity between invariant and specific frames at the same time step minus
the mean at different time steps. Discriminator statistics describe how D
scores each representation type. Embeddings are exported for external
projection.
"""

import logging
from collections.abc import Iterator, Sequence
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from src.autodiff import ops
from src.autodiff.tensor import Array, constant
from src.exceptions import InputError, UsageError
from src.models.corpus import Utterance
from src.models.metrics import DiagnosticsSummary, RepresentationStats
from src.models.run_config import RunConfig
from src.services.network.adversary import discriminate
from src.services.network.model import Representations, forward, utterance_inputs
from src.services.network.params import ModelParams
from src.services.network.pipeline import A_SPE, INV, V_SPE, pipeline_for
from src.utils.csv_io import write_matrix, write_rows

logger = logging.getLogger(__name__)

REPRESENTATIONS = (V_SPE, A_SPE, INV)
SIMILARITY_DIR = "similarity"
DISCRIMINATOR_FILE = "discriminator_stats.csv"
EMBEDDINGS_FILE = "embeddings.csv"
SUMMARY_FILE = "summary.json"


def similarity_matrix(inv: Array, specific: Array) -> Array:
    """S_ij = cos(inv_i, specific_j)."""
    return ops.cosine_rows(constant(inv), constant(specific)).data


def diag_score(similarity: Array) -> float:
    """Mean diagonal entry minus mean off-diagonal entry of a square matrix."""
    n = similarity.shape[0]
    if similarity.ndim != 2 or similarity.shape[1] != n:
        raise InputError(f"diag_score needs a square matrix, got {similarity.shape}")
    if n < 2:
        raise InputError("diag_score needs at least 2 frames")
    diagonal = float(np.trace(similarity, dtype=np.float64)) / n
    off = (float(np.sum(similarity, dtype=np.float64)) - diagonal * n) / (n * n - n)
    return diagonal - off


def representation_stats(name: str, probs: Array, bins: int) -> RepresentationStats:
    histogram, _ = np.histogram(probs, bins=bins, range=(0.0, 1.0))
    return RepresentationStats(
        representation=name,
        mean=float(np.mean(probs, dtype=np.float64)),
        std=float(np.std(probs, dtype=np.float64)),
        histogram=[int(c) for c in histogram],
    )


@dataclass
class DiagnosticsResult:
    """Everything a diagnose run produces, before it is written out."""

    summary: DiagnosticsSummary
    similarity: dict[str, dict[str, Array]] = field(default_factory=dict)
    representations: dict[str, Representations] = field(default_factory=dict)


def run_diagnostics(
    params: ModelParams,
    config: RunConfig,
    utterances: Sequence[Utterance],
) -> DiagnosticsResult:
    """Score alignment and discriminator behaviour on a set of utterances.

    Args:
        params: Trained parameters.
        config: Run configuration of the checkpoint.
        utterances: Held-out utterances.

    Returns:
        DiagnosticsResult; similarity matrices are kept for the first
        `diagnose.max_similarity_utterances` utterances.

    Raises:
        UsageError: If the model has no invariant representation.
    """
    if not utterances:
        raise InputError("no utterances to diagnose")
    pipeline = pipeline_for(config.train)
    if not pipeline.use_fusion:
        raise UsageError(f"mode {pipeline.mode.value} has no invariant representation")
    view = params.bind(None)
    dtype = next(iter(params.arrays.values())).dtype
    keep = config.diagnose.max_similarity_utterances

    result_reps: dict[str, Representations] = {}
    similarity: dict[str, dict[str, Array]] = {}
    scores: dict[str, list[float]] = {"v": [], "a": []}
    for index, u in enumerate(utterances):
        x_v, x_a = utterance_inputs(u, dtype)
        reps = forward(
            view,
            config.model,
            pipeline,
            config.train.modality,
            x_v,
            x_a,
            with_recognizer=False,
            collect_masks=True,
        )
        assert reps.inv is not None
        matrices = {
            "v": similarity_matrix(reps.inv.data, reps.v_spe.data),
            "a": similarity_matrix(reps.inv.data, reps.a_spe.data),
        }
        for m, s in matrices.items():
            scores[m].append(diag_score(s))
        if index < keep:
            similarity[u.id] = matrices
        result_reps[u.id] = reps

    stats: list[RepresentationStats] = []
    accuracy = None
    if pipeline.use_discriminator:
        bins = config.diagnose.histogram_bins
        probs = {}
        for name in REPRESENTATIONS:
            stacked = np.concatenate(
                [getattr(r, name).data for r in result_reps.values()], axis=0
            )
            p, _ = discriminate(view, config.model, constant(stacked))
            probs[name] = p.data.reshape(-1)
            stats.append(representation_stats(name, probs[name], bins))
        correct = np.count_nonzero(probs[A_SPE] > 0.5) + np.count_nonzero(probs[V_SPE] < 0.5)
        accuracy = correct / (probs[A_SPE].size + probs[V_SPE].size)

    def mean_mask(m: str) -> float | None:
        arrays = [a for r in result_reps.values() for a in r.masks.get(m, [])]
        if not arrays:
            return None
        return float(np.mean(np.concatenate([a.reshape(-1) for a in arrays]), dtype=np.float64))

    summary = DiagnosticsSummary(
        diag_score_visual=float(np.mean(scores["v"])),
        diag_score_audio=float(np.mean(scores["a"])),
        discriminator=stats,
        discriminator_accuracy=accuracy,
        mean_mask_visual=mean_mask("v"),
        mean_mask_audio=mean_mask("a"),
        utterances=len(utterances),
        frames=sum(u.frames for u in utterances),
    )
    logger.info(
        "diag_score visual=%.4f audio=%.4f over %d utterances",
        summary.diag_score_visual,
        summary.diag_score_audio,
        summary.utterances,
    )
    return DiagnosticsResult(summary=summary, similarity=similarity, representations=result_reps)


def _embedding_rows(reps: dict[str, Representations]) -> Iterator[list[Any]]:
    for utt, r in reps.items():
        for name in REPRESENTATIONS:
            data = getattr(r, name).data
            for frame, row in enumerate(data):
                yield [name, utt, frame, *row.tolist()]


def write_diagnostics(result: DiagnosticsResult, out_dir: Path, config: RunConfig) -> None:
    """Write similarity matrices, discriminator stats, embeddings and summary.json."""
    out_dir.mkdir(parents=True, exist_ok=True)
    sim_dir = out_dir / SIMILARITY_DIR
    sim_dir.mkdir(exist_ok=True)
    for utt, matrices in result.similarity.items():
        for m, s in matrices.items():
            write_matrix(sim_dir / f"{utt}_{m}.csv", s)

    bins = config.diagnose.histogram_bins
    write_rows(
        out_dir / DISCRIMINATOR_FILE,
        ["representation", "mean", "std", *(f"bin_{i}" for i in range(bins))],
        ([s.representation, s.mean, s.std, *s.histogram] for s in result.summary.discriminator),
    )

    width = config.model.d_model
    write_rows(
        out_dir / EMBEDDINGS_FILE,
        ["type", "utt", "frame", *(f"d_{i}" for i in range(width))],
        _embedding_rows(result.representations),
    )
    (out_dir / SUMMARY_FILE).write_text(
        result.summary.model_dump_json(indent=2) + "\n", encoding="utf-8"
    )
