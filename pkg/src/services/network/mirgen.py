"""Invariant-representation generator: fused query plus Hybrid-Modal Attention blocks."""

import numpy as np

from src.autodiff import ops
from src.autodiff.attention import multi_head_attention
from src.autodiff.tensor import Array, Tensor
from src.exceptions import DimensionError
from src.models.run_config import ModelConfig
from src.services.network.params import ParamView

MODALITIES = ("v", "a")


def fuse_query(p: ParamView, f_v: Tensor, f_a: Tensor) -> Tensor:
    """Concatenate the two front-end streams (T×2D) and project to T×D."""
    if f_v.shape[0] != f_a.shape[0]:
        raise DimensionError(f"fuse_query: frame counts differ {f_v.shape[0]} vs {f_a.shape[0]}")
    return p.linear("G.fuse", ops.concat_features([f_v, f_a]))


def hma_with_mask(
    p: ParamView, prefix: str, cfg: ModelConfig, f_m_spe: Tensor, f_va: Tensor
) -> tuple[Tensor, Tensor]:
    """Hybrid-Modal Attention, also returning the sigmoid mask.

    The fused query attends into one modality's specific stream; a mask
    computed per frame from [f_m^spe ∥ f_va] gates the attended features.

    Args:
        p: Parameters (uses `{prefix}.attn` and `{prefix}.mask`).
        prefix: Block and modality prefix, e.g. "G.block0.v".
        cfg: Model dimensions.
        f_m_spe: Modality-specific stream, T×D.
        f_va: Fused query, T×D.

    Returns:
        (s_m, mask), both T×D; mask entries lie in (0, 1).
    """
    if f_m_spe.shape != f_va.shape:
        raise DimensionError(f"hma: shapes differ {f_m_spe.shape} vs {f_va.shape}")
    shared = multi_head_attention(f_va, f_m_spe, f_m_spe, cfg.heads, p.attention(f"{prefix}.attn"))
    mask = ops.sigmoid(p.linear(f"{prefix}.mask", ops.concat_features([f_m_spe, f_va])))
    return ops.mul(shared, mask), mask


def hma(p: ParamView, prefix: str, cfg: ModelConfig, f_m_spe: Tensor, f_va: Tensor) -> Tensor:
    s_m, _ = hma_with_mask(p, prefix, cfg, f_m_spe, f_va)
    return s_m


def generate(
    p: ParamView,
    cfg: ModelConfig,
    f_v_spe: Tensor,
    f_a_spe: Tensor,
    f_va: Tensor,
    rng: np.random.Generator | None = None,
    masks: dict[str, list[Array]] | None = None,
) -> Tensor:
    """Refine the fused query into the modality-invariant representation.

    Each block computes f_va ← Norm(f_va + Σ_m PReLU(Conv(s_m))) with s_m from
    its own HMA parameters; the specific streams stay fixed across blocks.

    Args:
        p: Parameters (uses G.block*).
        cfg: Model dimensions.
        f_v_spe: Visual specific stream, T×D.
        f_a_spe: Audio specific stream, T×D.
        f_va: Fused query, T×D.
        rng: Dropout source for the branch sum; None disables dropout.
        masks: If given, HMA masks are appended per modality ("v", "a").

    Returns:
        f_va^inv, T×D.
    """
    specific = {"v": f_v_spe, "a": f_a_spe}
    for i in range(cfg.n_generator_layers):
        branches: list[Tensor] = []
        for m in MODALITIES:
            prefix = f"G.block{i}.{m}"
            s_m, mask = hma_with_mask(p, prefix, cfg, specific[m], f_va)
            if masks is not None:
                masks.setdefault(m, []).append(mask.data)
            branches.append(p.prelu(f"{prefix}.conv", p.linear(f"{prefix}.conv", s_m)))
        branch = ops.dropout(ops.add(branches[0], branches[1]), cfg.dropout, rng)
        f_va = p.layer_norm(f"G.block{i}.norm", ops.add(f_va, branch), cfg.layer_norm_eps)
    return f_va
