"""Multi-head scaled dot-product attention built from tape primitives."""

from __future__ import annotations

import math
from typing import NamedTuple

from src.autodiff import ops
from src.autodiff.tensor import Array, Tensor
from src.exceptions import ConfigurationError, DimensionError


class AttentionParams(NamedTuple):
    """Projection weights (D×D) and biases (D,) of one attention module."""

    q_weight: Tensor
    q_bias: Tensor
    k_weight: Tensor
    k_bias: Tensor
    v_weight: Tensor
    v_bias: Tensor
    o_weight: Tensor
    o_bias: Tensor


def multi_head_attention(
    q: Tensor,
    k: Tensor,
    v: Tensor,
    heads: int,
    params: AttentionParams,
) -> Tensor:
    """Attend from the rows of q to the rows of k/v.

    Each head works on a D/H slice of the projected queries, keys and values,
    scores are scaled by 1/sqrt(D/H), the head outputs are concatenated and
    passed through the output projection. Self-attention is q = k = v.

    Args:
        q: Queries, T_q×D.
        k: Keys, T_k×D.
        v: Values, T_k×D.
        heads: Number of heads H; D must be divisible by H.
        params: Projection parameters.

    Returns:
        T_q×D output.

    Raises:
        ConfigurationError: If D is not divisible by H.
        DimensionError: If k and v disagree or widths differ.
    """
    out, _ = attention_with_weights(q, k, v, heads, params)
    return out


def attention_with_weights(
    q: Tensor,
    k: Tensor,
    v: Tensor,
    heads: int,
    params: AttentionParams,
) -> tuple[Tensor, list[Array]]:
    """Same as `multi_head_attention`, also returning per-head T_q×T_k weights."""
    width = q.shape[1]
    if heads < 1 or width % heads != 0:
        raise ConfigurationError(f"model width {width} is not divisible by {heads} heads")
    if k.shape != v.shape:
        raise DimensionError(f"attention: key shape {k.shape} != value shape {v.shape}")
    if k.shape[1] != width:
        raise DimensionError(f"attention: key width {k.shape[1]} != query width {width}")
    head_dim = width // heads
    inv_scale = 1.0 / math.sqrt(head_dim)

    queries = ops.linear(q, params.q_weight, params.q_bias)
    keys = ops.linear(k, params.k_weight, params.k_bias)
    values = ops.linear(v, params.v_weight, params.v_bias)

    head_outputs: list[Tensor] = []
    weights: list[Array] = []
    for h in range(heads):
        if heads > 1:
            lo, hi = h * head_dim, (h + 1) * head_dim
            q_h = ops.slice_columns(queries, lo, hi)
            k_h = ops.slice_columns(keys, lo, hi)
            v_h = ops.slice_columns(values, lo, hi)
        else:
            q_h, k_h, v_h = queries, keys, values
        attn = ops.softmax_rows(ops.scale(ops.matmul(q_h, ops.transpose(k_h)), inv_scale))
        weights.append(attn.data)
        head_outputs.append(ops.matmul(attn, v_h))

    out = ops.linear(ops.concat_features(head_outputs), params.o_weight, params.o_bias)
    return out, weights
