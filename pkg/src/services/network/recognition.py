"""Per-frame recognizer, token error rate and single-modality masking."""

from collections.abc import Sequence

import numpy as np
import numpy.typing as npt

from src.autodiff import ops
from src.autodiff.tensor import Tensor, constant
from src.exceptions import DimensionError, InputError
from src.models.run_config import Modality, ModelConfig
from src.services.network.params import ParamView
from src.services.network.towers import feed_forward_block, self_attention_block


def recognize(
    p: ParamView,
    cfg: ModelConfig,
    parts: Sequence[Tensor],
    rng: np.random.Generator | None = None,
) -> Tensor:
    """Class logits per frame.

    The parts (f_v^spe, f_a^spe, f_va^inv for the full model) are concatenated,
    projected to D, passed through self-attention layers and mapped to C logits.

    Args:
        p: Parameters (uses rec.*).
        cfg: Model dimensions.
        parts: T×D representations, in the pipeline's recognizer order.
        rng: Dropout source; None disables dropout.

    Returns:
        T×C logits.

    Raises:
        DimensionError: If the parts disagree in length or the fused width
            does not match rec.fuse.
    """
    x = ops.concat_features(list(parts))
    expected = p["rec.fuse.weight"].shape[0]
    if x.shape[1] != expected:
        raise DimensionError(f"recognize: fused width {x.shape[1]} != {expected}")
    h = p.linear("rec.fuse", x)
    for i in range(cfg.n_recognizer_layers):
        prefix = f"rec.layer{i}"
        h = self_attention_block(p, prefix, cfg, h, rng)
        h = feed_forward_block(p, prefix, cfg, h, rng)
    return p.linear("rec.out", h)


def frame_errors(logits: Tensor | npt.NDArray[np.floating], labels: npt.ArrayLike) -> int:
    """Number of frames whose argmax differs from the label."""
    scores = logits.data if isinstance(logits, Tensor) else np.asarray(logits)
    ids = np.asarray(labels).reshape(-1)
    if scores.ndim != 2 or scores.shape[0] != ids.shape[0]:
        raise InputError(f"token_error_rate: {ids.shape[0]} labels for logits {scores.shape}")
    return int(np.count_nonzero(np.argmax(scores, axis=1) != ids))


def token_error_rate(logits: Tensor | npt.NDArray[np.floating], labels: npt.ArrayLike) -> float:
    """Fraction of frames where argmax(logits) ≠ label, in [0, 1]."""
    frames = int(np.asarray(labels).size)
    if frames == 0:
        return 0.0
    return frame_errors(logits, labels) / frames


def batch_token_error_rate(
    logits: Sequence[Tensor | npt.NDArray[np.floating]],
    labels: Sequence[npt.ArrayLike],
) -> float:
    """Frame-weighted TER over a batch."""
    errors = sum(frame_errors(lg, lb) for lg, lb in zip(logits, labels, strict=True))
    frames = sum(int(np.asarray(lb).size) for lb in labels)
    return errors / frames if frames else 0.0


def single_modality_mask(
    mode: Modality | str, f_v: Tensor, f_a: Tensor
) -> tuple[Tensor, Tensor]:
    """Replace the missing modality's front-end output with zeros.

    Args:
        mode: AV keeps both, A zeroes the visual stream, V zeroes the audio stream.
        f_v: Visual front-end output.
        f_a: Audio front-end output.

    Returns:
        (f_v', f_a').
    """
    match Modality(mode):
        case Modality.AV:
            return f_v, f_a
        case Modality.A:
            return constant(np.zeros(f_v.shape, dtype=f_v.dtype)), f_a
        case Modality.V:
            return f_v, constant(np.zeros(f_a.shape, dtype=f_a.dtype))
