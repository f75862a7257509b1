"""Frame-indexed contrastive loss aligning the invariant stream with both specific streams."""

import logging
from collections.abc import Sequence
from typing import Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from src.autodiff import ops
from src.autodiff.tensor import Tensor, constant
from src.exceptions import DimensionError

logger = logging.getLogger(__name__)


class MimConfig(BaseModel):
    """Contrastive-loss settings.

    Attributes:
        temperature: Softmax temperature τ applied to cosine similarities.
        negative_scope: Where negatives come from; only the other frames of
            the same utterance are supported.
    """

    model_config = ConfigDict(extra="forbid", frozen=True)

    temperature: float = Field(default=0.1, gt=0)
    negative_scope: Literal["utterance"] = "utterance"


def _direction(inv: Tensor, spe: Tensor, cfg: MimConfig) -> Tensor:
    frames = inv.shape[0]
    logits = ops.scale(ops.cosine_rows(inv, spe), 1.0 / cfg.temperature)
    # cross_entropy averages over frames; the loss sums them.
    return ops.scale(ops.cross_entropy(logits, np.arange(frames)), float(frames))


def mim_loss(f_va_inv: Tensor, f_v_spe: Tensor, f_a_spe: Tensor, cfg: MimConfig) -> Tensor:
    """Contrastive loss of one utterance.

    For each frame i, the same-index frame of a specific stream is the
    positive and every other frame of that stream a negative; the negative
    log-probabilities are summed over frames and over both modalities.

    Args:
        f_va_inv: Invariant stream, T×D.
        f_v_spe: Visual specific stream, T×D.
        f_a_spe: Audio specific stream, T×D.
        cfg: Temperature and negative scope.

    Returns:
        Non-negative scalar tensor; a constant 0 when T < 2.
    """
    if not f_va_inv.shape == f_v_spe.shape == f_a_spe.shape:
        raise DimensionError(
            f"mim_loss: shapes differ {f_va_inv.shape}, {f_v_spe.shape}, {f_a_spe.shape}"
        )
    if f_va_inv.shape[0] < 2:
        logger.info("Utterance with %d frame(s) contributes no contrastive loss", f_va_inv.shape[0])
        return constant(np.zeros((), dtype=f_va_inv.dtype))
    return ops.add(_direction(f_va_inv, f_v_spe, cfg), _direction(f_va_inv, f_a_spe, cfg))


def mim_batch_loss(
    f_va_inv: Sequence[Tensor],
    f_v_spe: Sequence[Tensor],
    f_a_spe: Sequence[Tensor],
    cfg: MimConfig,
) -> Tensor:
    """Mean over utterances of the per-utterance contrastive loss."""
    if not len(f_va_inv) == len(f_v_spe) == len(f_a_spe) or not f_va_inv:
        raise DimensionError("mim_batch_loss: need equally many (≥1) utterances per stream")
    total = mim_loss(f_va_inv[0], f_v_spe[0], f_a_spe[0], cfg)
    for inv, v, a in zip(f_va_inv[1:], f_v_spe[1:], f_a_spe[1:], strict=True):
        total = ops.add(total, mim_loss(inv, v, a, cfg))
    return ops.scale(total, 1.0 / len(f_va_inv))
