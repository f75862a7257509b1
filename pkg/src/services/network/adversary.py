"""Modality discriminator and the adversarial objective, evaluated in logit space.

The discriminator labels audio frames 1 and visual frames 0. Expectations are
taken uniformly over every frame of every utterance passed in.
"""

from collections.abc import Sequence

from src.autodiff import ops
from src.autodiff.tensor import Tensor
from src.models.run_config import ModelConfig
from src.services.network.params import ParamView

Frames = Tensor | Sequence[Tensor]


def _rows(f: Frames) -> Tensor:
    return f if isinstance(f, Tensor) else ops.concat_rows(list(f))


def discriminate(p: ParamView, cfg: ModelConfig, f: Tensor) -> tuple[Tensor, Tensor]:
    """Per-frame probability that a representation comes from audio.

    Args:
        p: Parameters (uses D.*).
        cfg: Model dimensions (decides the hidden activation).
        f: Representation, T×D.

    Returns:
        (probs, logits), both T×1; probs lie strictly in (0, 1).
    """
    h = p.linear("D.hidden", f)
    if cfg.disc_hidden_activation:
        h = p.prelu("D.act", h)
    logits = p.linear("D.out", h)
    return ops.sigmoid(logits), logits


def modality_terms(p: ParamView, cfg: ModelConfig, f_a_spe: Frames, f_v_spe: Frames) -> Tensor:
    """E[log D(f_a^spe)] + E[log(1 − D(f_v^spe))]; always ≤ 0."""
    _, audio_logits = discriminate(p, cfg, _rows(f_a_spe))
    _, visual_logits = discriminate(p, cfg, _rows(f_v_spe))
    audio_term = ops.mean_all(ops.log_sigmoid(audio_logits))
    visual_term = ops.mean_all(ops.log_sigmoid(ops.negate(visual_logits)))
    return ops.add(audio_term, visual_term)


def loss_g(p: ParamView, cfg: ModelConfig, f_va_inv: Frames) -> Tensor:
    """E[−log D(f_va^inv) − log(1 − D(f_va^inv))]; at least 2 ln 2, reached at D = 0.5.

    Args:
        p: Parameters (uses D.*).
        cfg: Model dimensions.
        f_va_inv: Invariant representation of one utterance or a batch of them.

    Returns:
        Scalar tensor.
    """
    _, logits = discriminate(p, cfg, _rows(f_va_inv))
    toward_audio = ops.mean_all(ops.log_sigmoid(logits))
    toward_visual = ops.mean_all(ops.log_sigmoid(ops.negate(logits)))
    return ops.negate(ops.add(toward_audio, toward_visual))


def loss_d(
    p: ParamView,
    cfg: ModelConfig,
    f_a_spe: Frames,
    f_v_spe: Frames,
    f_va_inv: Frames,
) -> Tensor:
    """Adversarial objective L_GAN maximised by the discriminator.

    L_GAN = E[log D(f_a^spe) + log(1 − D(f_v^spe))] + E[−log D(f_va^inv) − log(1 − D(f_va^inv))]

    Args:
        p: Parameters (uses D.*).
        cfg: Model dimensions.
        f_a_spe: Audio specific representation(s).
        f_v_spe: Visual specific representation(s).
        f_va_inv: Invariant representation(s).

    Returns:
        Scalar tensor.
    """
    return ops.add(modality_terms(p, cfg, f_a_spe, f_v_spe), loss_g(p, cfg, f_va_inv))
