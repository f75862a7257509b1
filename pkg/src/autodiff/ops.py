"""Differentiable primitives over dense tensors.

Shapes are explicit everywhere: binary ops need identical shapes, the only
broadcasts are the per-column parameter vectors of `linear`, `layer_norm` and
`prelu`, each documented at the op.
"""

from __future__ import annotations

import logging
from collections.abc import Iterator, Sequence
from contextlib import contextmanager
from contextvars import ContextVar
from typing import Literal

import numpy as np
import numpy.typing as npt

from src.autodiff.tensor import Array, BackwardRule, Tensor, active_tape, constant
from src.config import settings
from src.exceptions import DimensionError, DomainError, InputError, NonFiniteError, UsageError

logger = logging.getLogger(__name__)

COSINE_NORM_FLOOR = 1e-8
LAYER_NORM_EPS = 1e-5

ElementwiseKind = Literal[
    "add", "sub", "mul", "sigmoid", "prelu", "exp", "log", "negate", "scale"
]


_FINITE_CHECKS: ContextVar[bool | None] = ContextVar("mirgan_finite_checks", default=None)


@contextmanager
def finite_checks(enabled: bool) -> Iterator[None]:
    """Override settings.check_finite for ops run inside the block."""
    token = _FINITE_CHECKS.set(enabled)
    try:
        yield
    finally:
        _FINITE_CHECKS.reset(token)


def _checking_finite() -> bool:
    override = _FINITE_CHECKS.get()
    return settings.check_finite if override is None else override


def _apply(op: str, inputs: Sequence[Tensor], out: Array, backward: BackwardRule) -> Tensor:
    if _checking_finite() and not np.all(np.isfinite(out)):
        raise NonFiniteError(op)
    tape = active_tape()
    if tape is None:
        return Tensor(out)
    return tape.record(op, inputs, out, backward)


def _require_2d(op: str, *tensors: Tensor) -> None:
    for t in tensors:
        if t.data.ndim != 2:
            raise DimensionError(f"{op}: expected a 2-D tensor, got shape {t.shape}")


def _require_same_shape(op: str, a: Tensor, b: Tensor) -> None:
    if a.shape != b.shape:
        raise DimensionError(f"{op}: shape mismatch {a.shape} vs {b.shape}")


def _stable_sigmoid(x: Array) -> Array:
    return 0.5 * (1.0 + np.tanh(0.5 * x))


# ---------------------------------------------------------------------------
# Linear algebra
# ---------------------------------------------------------------------------


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix product of an m×k and a k×n tensor."""
    _require_2d("matmul", a, b)
    if a.shape[1] != b.shape[0]:
        raise DimensionError(f"matmul: inner dimensions differ {a.shape} x {b.shape}")
    a_data, b_data = a.data, b.data

    def backward(g: Array) -> tuple[Array, Array]:
        return g @ b_data.T, a_data.T @ g

    return _apply("matmul", (a, b), a_data @ b_data, backward)


def linear(x: Tensor, weight: Tensor, bias: Tensor) -> Tensor:
    """Affine map x·W + b, with b (length O) added to every row.

    Args:
        x: Input of shape T×I.
        weight: Weight of shape I×O.
        bias: Bias of shape (O,).

    Returns:
        Tensor of shape T×O.
    """
    _require_2d("linear", x, weight)
    if x.shape[1] != weight.shape[0]:
        raise DimensionError(f"linear: input width {x.shape[1]} != weight rows {weight.shape[0]}")
    if bias.shape != (weight.shape[1],):
        raise DimensionError(f"linear: bias shape {bias.shape} != ({weight.shape[1]},)")
    x_data, w_data = x.data, weight.data

    def backward(g: Array) -> tuple[Array, Array, Array]:
        return g @ w_data.T, x_data.T @ g, g.sum(axis=0)

    return _apply("linear", (x, weight, bias), x_data @ w_data + bias.data, backward)


def transpose(a: Tensor) -> Tensor:
    """Swap the two axes of a 2-D tensor."""
    _require_2d("transpose", a)

    def backward(g: Array) -> tuple[Array]:
        return (g.T,)

    return _apply("transpose", (a,), a.data.T.copy(), backward)


# ---------------------------------------------------------------------------
# Elementwise
# ---------------------------------------------------------------------------


def add(a: Tensor, b: Tensor) -> Tensor:
    _require_same_shape("add", a, b)

    def backward(g: Array) -> tuple[Array, Array]:
        return g, g

    return _apply("add", (a, b), a.data + b.data, backward)


def sub(a: Tensor, b: Tensor) -> Tensor:
    _require_same_shape("sub", a, b)

    def backward(g: Array) -> tuple[Array, Array]:
        return g, -g

    return _apply("sub", (a, b), a.data - b.data, backward)


def mul(a: Tensor, b: Tensor) -> Tensor:
    _require_same_shape("mul", a, b)
    a_data, b_data = a.data, b.data

    def backward(g: Array) -> tuple[Array, Array]:
        return g * b_data, g * a_data

    return _apply("mul", (a, b), a_data * b_data, backward)


def sigmoid(a: Tensor) -> Tensor:
    out = _stable_sigmoid(a.data)

    def backward(g: Array) -> tuple[Array]:
        return (g * out * (1.0 - out),)

    return _apply("sigmoid", (a,), out, backward)


def prelu(a: Tensor, alpha: Tensor) -> Tensor:
    """Parametric ReLU with one learnable negative slope per column.

    Args:
        a: Input of shape T×D.
        alpha: Slopes of shape (D,), applied to negative entries of each column.
    """
    _require_2d("prelu", a)
    if alpha.shape != (a.shape[1],):
        raise DimensionError(f"prelu: alpha shape {alpha.shape} != ({a.shape[1]},)")
    a_data, alpha_data = a.data, alpha.data
    positive = a_data >= 0
    out = np.where(positive, a_data, a_data * alpha_data)

    def backward(g: Array) -> tuple[Array, Array]:
        grad_a = np.where(positive, g, g * alpha_data)
        grad_alpha = np.where(positive, 0.0, g * a_data).sum(axis=0).astype(alpha_data.dtype)
        return grad_a, grad_alpha

    return _apply("prelu", (a, alpha), out, backward)


def exp(a: Tensor) -> Tensor:
    out = np.exp(a.data)

    def backward(g: Array) -> tuple[Array]:
        return (g * out,)

    return _apply("exp", (a,), out, backward)


def log(a: Tensor) -> Tensor:
    if np.any(a.data <= 0):
        raise DomainError("log: input has non-positive entries")
    a_data = a.data

    def backward(g: Array) -> tuple[Array]:
        return (g / a_data,)

    return _apply("log", (a,), np.log(a_data), backward)


def negate(a: Tensor) -> Tensor:
    def backward(g: Array) -> tuple[Array]:
        return (-g,)

    return _apply("negate", (a,), -a.data, backward)


def scale(a: Tensor, c: float) -> Tensor:
    """Multiply every entry by the scalar c."""

    def backward(g: Array) -> tuple[Array]:
        return (g * c,)

    return _apply("scale", (a,), a.data * c, backward)


def log_sigmoid(a: Tensor) -> Tensor:
    """log σ(a) = −softplus(−a), finite for any finite input."""
    a_data = a.data
    out = -(np.maximum(-a_data, 0.0) + np.log1p(np.exp(-np.abs(a_data))))

    def backward(g: Array) -> tuple[Array]:
        return (g * _stable_sigmoid(-a_data),)

    return _apply("log_sigmoid", (a,), out, backward)


def elementwise(
    kind: ElementwiseKind,
    a: Tensor,
    b: Tensor | None = None,
    *,
    c: float | None = None,
) -> Tensor:
    """Dispatch to a pointwise primitive by name.

    Args:
        kind: One of add, sub, mul, sigmoid, prelu, exp, log, negate, scale.
        a: First operand.
        b: Second operand for binary kinds; the slope vector for prelu.
        c: Scalar factor for scale.

    Returns:
        Pointwise result.
    """
    binary = {"add": add, "sub": sub, "mul": mul, "prelu": prelu}
    unary = {"sigmoid": sigmoid, "exp": exp, "log": log, "negate": negate}
    if kind in binary:
        if b is None:
            raise UsageError(f"elementwise '{kind}' needs a second operand")
        return binary[kind](a, b)
    if kind in unary:
        return unary[kind](a)
    if kind == "scale":
        if c is None:
            raise UsageError("elementwise 'scale' needs c")
        return scale(a, c)
    raise UsageError(f"unknown elementwise kind '{kind}'")


def dropout(a: Tensor, p: float, rng: np.random.Generator | None) -> Tensor:
    """Inverted dropout; identity when rng is None or p == 0."""
    if rng is None or p <= 0.0:
        return a
    keep = (rng.random(a.shape) >= p).astype(a.dtype) / (1.0 - p)
    return mul(a, constant(keep))


# ---------------------------------------------------------------------------
# Structural
# ---------------------------------------------------------------------------


def concat_features(parts: Sequence[Tensor]) -> Tensor:
    """Concatenate T×D_i tensors along the feature axis."""
    if not parts:
        raise UsageError("concat_features: no parts")
    _require_2d("concat_features", *parts)
    rows = parts[0].shape[0]
    for p in parts:
        if p.shape[0] != rows:
            raise DimensionError(f"concat_features: frame counts differ {rows} vs {p.shape[0]}")
    if len(parts) == 1:
        return parts[0]
    bounds = np.cumsum([p.shape[1] for p in parts])[:-1]

    def backward(g: Array) -> list[Array]:
        return np.split(g, bounds, axis=1)

    return _apply("concat_features", parts, np.concatenate([p.data for p in parts], axis=1), backward)


def concat_rows(parts: Sequence[Tensor]) -> Tensor:
    """Stack T_i×D tensors along the frame axis."""
    if not parts:
        raise UsageError("concat_rows: no parts")
    _require_2d("concat_rows", *parts)
    width = parts[0].shape[1]
    for p in parts:
        if p.shape[1] != width:
            raise DimensionError(f"concat_rows: widths differ {width} vs {p.shape[1]}")
    if len(parts) == 1:
        return parts[0]
    bounds = np.cumsum([p.shape[0] for p in parts])[:-1]

    def backward(g: Array) -> list[Array]:
        return np.split(g, bounds, axis=0)

    return _apply("concat_rows", parts, np.concatenate([p.data for p in parts], axis=0), backward)


def slice_columns(a: Tensor, start: int, stop: int) -> Tensor:
    """Columns [start, stop) of a 2-D tensor."""
    _require_2d("slice_columns", a)
    if not 0 <= start < stop <= a.shape[1]:
        raise DimensionError(f"slice_columns: [{start}, {stop}) outside width {a.shape[1]}")
    shape, dtype = a.shape, a.dtype

    def backward(g: Array) -> tuple[Array]:
        full = np.zeros(shape, dtype=dtype)
        full[:, start:stop] = g
        return (full,)

    return _apply("slice_columns", (a,), a.data[:, start:stop].copy(), backward)


def sum_all(a: Tensor) -> Tensor:
    """Sum of all entries, as a scalar tensor."""
    shape = a.shape

    def backward(g: Array) -> tuple[Array]:
        return (np.broadcast_to(g, shape).copy(),)

    return _apply("sum_all", (a,), np.asarray(a.data.sum()), backward)


def mean_all(a: Tensor) -> Tensor:
    """Mean of all entries, as a scalar tensor."""
    return scale(sum_all(a), 1.0 / a.data.size)


# ---------------------------------------------------------------------------
# Normalisation and probabilities
# ---------------------------------------------------------------------------


def softmax_rows(a: Tensor) -> Tensor:
    """Row-wise softmax with per-row max subtraction."""
    _require_2d("softmax_rows", a)
    shifted = a.data - a.data.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    out = e / e.sum(axis=1, keepdims=True)

    def backward(g: Array) -> tuple[Array]:
        return (out * (g - (g * out).sum(axis=1, keepdims=True)),)

    return _apply("softmax_rows", (a,), out, backward)


def log_softmax_rows(a: Tensor) -> Tensor:
    """Row-wise log-softmax via log-sum-exp."""
    _require_2d("log_softmax_rows", a)
    shifted = a.data - a.data.max(axis=1, keepdims=True)
    out = shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    probs = np.exp(out)

    def backward(g: Array) -> tuple[Array]:
        return (g - probs * g.sum(axis=1, keepdims=True),)

    return _apply("log_softmax_rows", (a,), out, backward)


def layer_norm(a: Tensor, gamma: Tensor, beta: Tensor, eps: float = LAYER_NORM_EPS) -> Tensor:
    """Normalise each frame over the feature axis, then apply γ and β per column.

    Args:
        a: Input of shape T×D, D ≥ 2.
        gamma: Scale of shape (D,).
        beta: Shift of shape (D,).
        eps: Variance guard.
    """
    _require_2d("layer_norm", a)
    width = a.shape[1]
    if width < 2:
        raise DimensionError("layer_norm: needs at least 2 features")
    if gamma.shape != (width,) or beta.shape != (width,):
        raise DimensionError(f"layer_norm: gamma/beta must have shape ({width},)")
    centered = a.data - a.data.mean(axis=1, keepdims=True)
    inv_std = 1.0 / np.sqrt((centered**2).mean(axis=1, keepdims=True) + eps)
    normed = centered * inv_std
    gamma_data = gamma.data

    def backward(g: Array) -> tuple[Array, Array, Array]:
        g_normed = g * gamma_data
        grad_a = inv_std * (
            g_normed
            - g_normed.mean(axis=1, keepdims=True)
            - normed * (g_normed * normed).mean(axis=1, keepdims=True)
        )
        return grad_a, (g * normed).sum(axis=0), g.sum(axis=0)

    return _apply("layer_norm", (a, gamma, beta), normed * gamma_data + beta.data, backward)


def _unit_rows(x: Array) -> tuple[Array, Array, Array]:
    norms = np.sqrt((x**2).sum(axis=1, keepdims=True))
    floored = np.maximum(norms, COSINE_NORM_FLOOR)
    return x / floored, floored, norms > COSINE_NORM_FLOOR


def _unit_rows_backward(g_unit: Array, unit: Array, norm: Array, above_floor: Array) -> Array:
    projected = g_unit - unit * (g_unit * unit).sum(axis=1, keepdims=True)
    return np.where(above_floor, projected, g_unit) / norm


def cosine_rows(a: Tensor, b: Tensor) -> Tensor:
    """Pairwise cosine similarity between rows of a (T×D) and rows of b (T'×D).

    Row norms are floored at 1e-8, so zero rows give similarity 0.
    """
    _require_2d("cosine_rows", a, b)
    if a.shape[1] != b.shape[1]:
        raise DimensionError(f"cosine_rows: widths differ {a.shape[1]} vs {b.shape[1]}")
    a_unit, a_norm, a_live = _unit_rows(a.data)
    b_unit, b_norm, b_live = _unit_rows(b.data)

    def backward(g: Array) -> tuple[Array, Array]:
        grad_a = _unit_rows_backward(g @ b_unit, a_unit, a_norm, a_live)
        grad_b = _unit_rows_backward(g.T @ a_unit, b_unit, b_norm, b_live)
        return grad_a, grad_b

    return _apply("cosine_rows", (a, b), a_unit @ b_unit.T, backward)


def cross_entropy(logits: Tensor, labels: npt.ArrayLike) -> Tensor:
    """Mean over frames of −log softmax(logits)[label].

    Args:
        logits: Class scores of shape T×C.
        labels: T integer class ids in [0, C).

    Returns:
        Scalar tensor.
    """
    _require_2d("cross_entropy", logits)
    frames, classes = logits.shape
    ids = np.asarray(labels, dtype=np.int64).reshape(-1)
    if ids.shape[0] != frames:
        raise InputError(f"cross_entropy: {ids.shape[0]} labels for {frames} frames")
    if ids.size and (ids.min() < 0 or ids.max() >= classes):
        raise InputError(f"cross_entropy: labels must lie in [0, {classes})")
    shifted = logits.data - logits.data.max(axis=1, keepdims=True)
    log_z = np.log(np.exp(shifted).sum(axis=1))
    rows = np.arange(frames)
    loss = np.asarray((log_z - shifted[rows, ids]).mean())

    def backward(g: Array) -> tuple[Array]:
        probs = np.exp(shifted - log_z[:, None])
        probs[rows, ids] -= 1.0
        return (probs * (g / frames),)

    return _apply("cross_entropy", (logits,), loss, backward)


def zeros(shape: tuple[int, ...], dtype: npt.DTypeLike = np.float64) -> Tensor:
    """Constant zero tensor."""
    return constant(np.zeros(shape, dtype=dtype))
