"""Modality front-ends and the paired modality-specific encoders."""

import math

import numpy as np

from src.autodiff import ops
from src.autodiff.attention import multi_head_attention
from src.autodiff.tensor import Tensor, constant
from src.exceptions import DimensionError
from src.models.run_config import ModelConfig
from src.services.network.params import ParamView


def sinusoidal_positions(frames: int, width: int, dtype: np.dtype[np.floating]) -> Tensor:
    """Fixed sinusoidal position table (T×D) as a constant."""
    positions = np.arange(frames)[:, None]
    rates = np.exp(-math.log(10000.0) * (np.arange(0, width, 2) / width))
    table = np.zeros((frames, width))
    table[:, 0::2] = np.sin(positions * rates)
    table[:, 1::2] = np.cos(positions * rates[: width // 2])
    return constant(table.astype(dtype))


def _with_positions(x: Tensor, cfg: ModelConfig) -> Tensor:
    if not cfg.positional_encoding:
        return x
    return ops.add(x, sinusoidal_positions(x.shape[0], x.shape[1], x.dtype))


def audio_frontend(p: ParamView, cfg: ModelConfig, x_a: Tensor) -> Tensor:
    """Affine projection to D followed by layer norm.

    Args:
        p: Parameters (uses af.*).
        cfg: Model dimensions.
        x_a: Raw audio frames, T×D_a_raw.

    Returns:
        f_a, T×D.
    """
    weight = p["af.proj.weight"]
    if x_a.data.ndim != 2 or x_a.shape[1] != weight.shape[0]:
        raise DimensionError(f"audio front-end expects T×{weight.shape[0]}, got {x_a.shape}")
    f_a = p.layer_norm("af.norm", p.linear("af.proj", x_a), cfg.layer_norm_eps)
    return _with_positions(f_a, cfg)


def visual_frontend(p: ParamView, cfg: ModelConfig, x_v: Tensor) -> Tensor:
    """Two affine layers with a PReLU between, then layer norm.

    Args:
        p: Parameters (uses vf.*).
        cfg: Model dimensions.
        x_v: Raw visual frames, T×D_v_raw.

    Returns:
        f_v, T×D.
    """
    weight = p["vf.proj1.weight"]
    if x_v.data.ndim != 2 or x_v.shape[1] != weight.shape[0]:
        raise DimensionError(f"visual front-end expects T×{weight.shape[0]}, got {x_v.shape}")
    h = p.prelu("vf.act", p.linear("vf.proj1", x_v))
    f_v = p.layer_norm("vf.norm", p.linear("vf.proj2", h), cfg.layer_norm_eps)
    return _with_positions(f_v, cfg)


def self_attention_block(
    p: ParamView, prefix: str, cfg: ModelConfig, x: Tensor, rng: np.random.Generator | None
) -> Tensor:
    h = multi_head_attention(x, x, x, cfg.heads, p.attention(f"{prefix}.self_attn"))
    residual = ops.add(x, ops.dropout(h, cfg.dropout, rng))
    return p.layer_norm(f"{prefix}.norm1", residual, cfg.layer_norm_eps)


def cross_attention_block(
    p: ParamView,
    prefix: str,
    cfg: ModelConfig,
    x: Tensor,
    memory: Tensor,
    rng: np.random.Generator | None,
) -> Tensor:
    h = multi_head_attention(x, memory, memory, cfg.heads, p.attention(f"{prefix}.cross_attn"))
    residual = ops.add(x, ops.dropout(h, cfg.dropout, rng))
    return p.layer_norm(f"{prefix}.norm2", residual, cfg.layer_norm_eps)


def feed_forward_block(
    p: ParamView, prefix: str, cfg: ModelConfig, x: Tensor, rng: np.random.Generator | None
) -> Tensor:
    h = p.linear(f"{prefix}.ffn2", p.prelu(f"{prefix}.ffn_act", p.linear(f"{prefix}.ffn1", x)))
    residual = ops.add(x, ops.dropout(h, cfg.dropout, rng))
    return p.layer_norm(f"{prefix}.norm3", residual, cfg.layer_norm_eps)


def encode(
    p: ParamView,
    cfg: ModelConfig,
    f_v: Tensor,
    f_a: Tensor,
    rng: np.random.Generator | None = None,
) -> tuple[Tensor, Tensor]:
    """Run the paired encoders.

    Each layer applies, per stream, self-attention, then cross-attention into
    the other stream, then a feed-forward sublayer; every sublayer is
    residual followed by layer norm. Both streams update simultaneously: the
    cross-attention memory is the other stream's post-self-attention state of
    the same layer, or its layer input when `encoder_cross_source` is
    "pre_self".

    Args:
        p: Parameters (uses vae.*).
        cfg: Model dimensions.
        f_v: Visual front-end output, T×D.
        f_a: Audio front-end output, T×D.
        rng: Dropout source; None disables dropout.

    Returns:
        (f_v^spe, f_a^spe), both T×D.

    Raises:
        DimensionError: If the streams differ in length or width.
    """
    if f_v.shape != f_a.shape:
        raise DimensionError(f"encode: stream shapes differ {f_v.shape} vs {f_a.shape}")
    v, a = f_v, f_a
    for i in range(cfg.n_encoder_layers):
        pv, pa = f"vae.v.layer{i}", f"vae.a.layer{i}"
        v_self = self_attention_block(p, pv, cfg, v, rng)
        a_self = self_attention_block(p, pa, cfg, a, rng)
        v_mem, a_mem = (a_self, v_self) if cfg.encoder_cross_source == "post_self" else (a, v)
        v_cross = cross_attention_block(p, pv, cfg, v_self, v_mem, rng)
        a_cross = cross_attention_block(p, pa, cfg, a_self, a_mem, rng)
        v = feed_forward_block(p, pv, cfg, v_cross, rng)
        a = feed_forward_block(p, pa, cfg, a_cross, rng)
    return v, a
