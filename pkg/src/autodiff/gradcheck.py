"""Central finite-difference gradient checker."""

from __future__ import annotations

from collections.abc import Callable, Sequence
from dataclasses import dataclass

import numpy as np
import numpy.typing as npt

from src.autodiff.tensor import Tape, Tensor, constant

DEFAULT_EPS = 1e-5
GRADCHECK_TOLERANCE = 1e-4

TensorFunction = Callable[..., Tensor]


@dataclass(frozen=True)
class GradCheckReport:
    """Outcome of one gradient check.

    Attributes:
        max_rel_error: Largest relative error over all inputs.
        per_input: Relative error per input, in argument order.
        coordinates: Number of perturbed coordinates per input.
    """

    max_rel_error: float
    per_input: tuple[float, ...]
    coordinates: tuple[int, ...]

    def passed(self, tolerance: float = GRADCHECK_TOLERANCE) -> bool:
        return self.max_rel_error < tolerance


def _relative_error(analytic: npt.NDArray[np.float64], numeric: npt.NDArray[np.float64]) -> float:
    if analytic.size == 0:
        return 0.0
    diff = float(np.max(np.abs(analytic - numeric)))
    denom = float(np.max(np.abs(analytic))) + float(np.max(np.abs(numeric)))
    return diff / max(1e-8, denom)


def grad_check_report(
    f: TensorFunction,
    inputs: Sequence[npt.ArrayLike],
    eps: float = DEFAULT_EPS,
    sample: int | None = None,
    seed: int = 0,
) -> GradCheckReport:
    """Compare tape gradients of a scalar function with central differences.

    Args:
        f: Function of len(inputs) tensors returning a scalar tensor.
        inputs: Input values; copied and promoted to 64-bit.
        eps: Finite-difference step.
        sample: If set, perturb at most this many coordinates per input,
            chosen deterministically from `seed`.
        seed: Seed for coordinate sampling.

    Returns:
        GradCheckReport with per-input relative errors.
    """
    arrays = [np.array(x, dtype=np.float64, copy=True) for x in inputs]

    with Tape() as tape:
        leaves = [tape.leaf(a) for a in arrays]
        grads = tape.backward(f(*leaves))
    analytic = []
    for leaf, array in zip(leaves, arrays, strict=True):
        assert leaf.node_id is not None
        g = grads.get(leaf.node_id)
        analytic.append(np.zeros_like(array) if g is None else np.asarray(g, dtype=np.float64))

    def value() -> float:
        return f(*[constant(a) for a in arrays]).item()

    rng = np.random.default_rng(seed)
    errors: list[float] = []
    counts: list[int] = []
    for array, grad in zip(arrays, analytic, strict=True):
        flat = array.reshape(-1)
        if sample is not None and sample < flat.size:
            coords = np.sort(rng.choice(flat.size, size=sample, replace=False))
        else:
            coords = np.arange(flat.size)
        numeric = np.empty(coords.size, dtype=np.float64)
        for i, c in enumerate(coords):
            original = flat[c]
            flat[c] = original + eps
            f_plus = value()
            flat[c] = original - eps
            f_minus = value()
            flat[c] = original
            numeric[i] = (f_plus - f_minus) / (2.0 * eps)
        errors.append(_relative_error(grad.reshape(-1)[coords], numeric))
        counts.append(int(coords.size))

    return GradCheckReport(
        max_rel_error=max(errors) if errors else 0.0,
        per_input=tuple(errors),
        coordinates=tuple(counts),
    )


def grad_check(
    f: TensorFunction,
    inputs: Sequence[npt.ArrayLike],
    eps: float = DEFAULT_EPS,
    sample: int | None = None,
) -> float:
    """Maximum relative error between tape and finite-difference gradients.

    The relative error of an input is max|g_ad − g_fd| / max(1e-8, max|g_ad| + max|g_fd|);
    the result is the largest over inputs.
    """
    return grad_check_report(f, inputs, eps=eps, sample=sample).max_rel_error
