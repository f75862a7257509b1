"""Dense tensors and the differentiation tape.

A `Tape` records every operation whose inputs require gradients, in execution
order, so the recording is topological by construction. Tapes are activated
with a `with` block; the active tape is held in a context variable, which makes
each thread's tape independent. Outside any tape, operations compute values
without recording (evaluation mode).
"""

from __future__ import annotations

from collections.abc import Callable, Sequence
from contextvars import ContextVar, Token
from dataclasses import dataclass
from typing import Any

import numpy as np
import numpy.typing as npt

from src.exceptions import UsageError

Array = npt.NDArray[np.floating[Any]]
BackwardRule = Callable[[Array], Sequence[Array | None]]

_ACTIVE_TAPE: ContextVar[Tape | None] = ContextVar("mirgan_active_tape", default=None)


class Tensor:
    """Dense row-major array participating in a differentiation tape.

    Attributes:
        data: Backing numpy array (float32 or float64).
        requires_grad: Whether gradients flow into this tensor.
        node_id: Node identifier on the owning tape, None for constants.
    """

    __slots__ = ("data", "requires_grad", "node_id", "_tape")

    def __init__(
        self,
        data: npt.ArrayLike,
        requires_grad: bool = False,
        node_id: int | None = None,
        tape: Tape | None = None,
    ) -> None:
        array = np.asarray(data)
        if not np.issubdtype(array.dtype, np.floating):
            array = array.astype(np.float64)
        self.data: Array = array
        self.requires_grad = requires_grad
        self.node_id = node_id
        self._tape = tape

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(self.data.shape)

    @property
    def dtype(self) -> np.dtype[Any]:
        return self.data.dtype

    @property
    def tape(self) -> Tape | None:
        return self._tape

    def item(self) -> float:
        """Return the value of a one-element tensor as a Python float."""
        if self.data.size != 1:
            raise UsageError(f"item() needs a one-element tensor, got shape {self.shape}")
        return float(self.data.reshape(()))

    def numpy(self) -> Array:
        """Return a copy of the underlying array."""
        return self.data.copy()

    def detach(self) -> Tensor:
        """Return a constant view of this tensor; no gradient crosses it."""
        return Tensor(self.data, requires_grad=False)

    def __repr__(self) -> str:
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}, dtype={self.dtype}{flag})"


def constant(data: npt.ArrayLike, dtype: npt.DTypeLike | None = None) -> Tensor:
    """Wrap an array as a constant tensor.

    Args:
        data: Array-like values.
        dtype: Optional dtype to cast to.

    Returns:
        Tensor with requires_grad=False.
    """
    array = np.asarray(data, dtype=dtype) if dtype is not None else np.asarray(data)
    return Tensor(array)


def detach(tensor: Tensor) -> Tensor:
    """Functional form of `Tensor.detach`."""
    return tensor.detach()


@dataclass(frozen=True)
class TapeEntry:
    """One recorded operation.

    Attributes:
        op: Operation name (used in diagnostics).
        inputs: Node ids of the inputs; None where the input is a constant.
        output: Node id of the result.
        backward: Maps the output gradient to one gradient per input.
    """

    op: str
    inputs: tuple[int | None, ...]
    output: int
    backward: BackwardRule


class Tape:
    """Ordered record of differentiable operations."""

    def __init__(self) -> None:
        self.entries: list[TapeEntry] = []
        self._next_id = 0
        self._leaves: dict[str, Tensor] = {}
        self._token: Token[Tape | None] | None = None

    def __enter__(self) -> Tape:
        self._token = _ACTIVE_TAPE.set(self)
        return self

    def __exit__(self, *exc: object) -> None:
        if self._token is not None:
            _ACTIVE_TAPE.reset(self._token)
            self._token = None

    def _new_id(self) -> int:
        node = self._next_id
        self._next_id += 1
        return node

    def leaf(self, data: npt.ArrayLike, name: str | None = None) -> Tensor:
        """Create a gradient-requiring input on this tape.

        Args:
            data: Leaf values (used as-is, not copied).
            name: Optional name; named leaves are reported by `grads_by_name`.

        Returns:
            Leaf tensor owned by this tape.
        """
        tensor = Tensor(data, requires_grad=True, node_id=self._new_id(), tape=self)
        if name is not None:
            if name in self._leaves:
                raise UsageError(f"leaf '{name}' already registered on this tape")
            self._leaves[name] = tensor
        return tensor

    @property
    def leaves(self) -> dict[str, Tensor]:
        return dict(self._leaves)

    def record(
        self,
        op: str,
        inputs: Sequence[Tensor],
        out: Array,
        backward: BackwardRule,
    ) -> Tensor:
        """Record an operation if any input requires a gradient.

        Args:
            op: Operation name.
            inputs: Operand tensors.
            out: Computed output values.
            backward: Rule mapping output gradient to input gradients.

        Returns:
            Output tensor (constant when no input requires a gradient).
        """
        tracked = [t for t in inputs if t.requires_grad]
        if not tracked:
            return Tensor(out)
        for t in tracked:
            if t.tape is not self:
                raise UsageError(f"{op}: input belongs to a different tape")
        node = self._new_id()
        ids = tuple(t.node_id if t.requires_grad else None for t in inputs)
        self.entries.append(TapeEntry(op=op, inputs=ids, output=node, backward=backward))
        return Tensor(out, requires_grad=True, node_id=node, tape=self)

    def backward(self, loss: Tensor) -> dict[int, Array]:
        """Reverse-mode accumulation from a scalar loss.

        Args:
            loss: Scalar tensor recorded on this tape.

        Returns:
            Gradient per node id reachable from the loss.

        Raises:
            UsageError: If the loss is not a scalar.
        """
        if loss.data.size != 1 or loss.data.ndim != 0:
            raise UsageError(f"backward needs a scalar loss, got shape {loss.shape}")
        if not loss.requires_grad or loss.node_id is None:
            return {}
        if loss.tape is not self:
            raise UsageError("loss was not recorded on this tape")
        grads: dict[int, Array] = {loss.node_id: np.ones_like(loss.data)}
        for entry in reversed(self.entries):
            upstream = grads.get(entry.output)
            if upstream is None:
                continue
            for node, grad in zip(entry.inputs, entry.backward(upstream), strict=True):
                if node is None or grad is None:
                    continue
                if node in grads:
                    grads[node] = grads[node] + grad
                else:
                    grads[node] = grad
        return grads

    def grads_by_name(self, grads: dict[int, Array]) -> dict[str, Array]:
        """Map node-id gradients onto named leaves (zeros where unreachable)."""
        named: dict[str, Array] = {}
        for name, leaf in self._leaves.items():
            assert leaf.node_id is not None
            grad = grads.get(leaf.node_id)
            named[name] = grad if grad is not None else np.zeros_like(leaf.data)
        return named


def active_tape() -> Tape | None:
    """Return the tape active in the current context, if any."""
    return _ACTIVE_TAPE.get()


def backward(loss: Tensor) -> dict[int, Array]:
    """Back-propagate a scalar loss on the tape that recorded it.

    Args:
        loss: Scalar tensor.

    Returns:
        Gradient per node id; empty when the loss does not depend on any leaf.

    Raises:
        UsageError: If the loss is not a scalar.
    """
    if loss.data.size != 1 or loss.data.ndim != 0:
        raise UsageError(f"backward needs a scalar loss, got shape {loss.shape}")
    if loss.tape is None:
        return {}
    return loss.tape.backward(loss)
