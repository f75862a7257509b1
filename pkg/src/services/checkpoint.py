"""Training state and its single-file binary checkpoint.

Layout (little-endian):

    magic "MIRC" | version u32 | header length u32 | header JSON (utf-8) |
    for each manifest entry: parameter, Adam m, Adam v  (f4 or f8, row-major)

The header holds the run configuration, step, RNG derivation keys, best
validation record, tensor dtype, input widths and the manifest (name, shape
and Adam update count per parameter). Keys are sorted, so saving the same
state twice gives identical bytes.
"""

from __future__ import annotations

import json
import logging
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import numpy as np
from pydantic import BaseModel, ValidationError

from src.exceptions import CheckpointError, ConfigurationError, FormatError
from src.models.run_config import RunConfig, parse_run_config
from src.services.network.params import InputDims, ModelParams
from src.services.optimizer import AdamState

logger = logging.getLogger(__name__)

CHECKPOINT_MAGIC = b"MIRC"
CHECKPOINT_VERSION = 1
_DTYPES = {"float32": "<f4", "float64": "<f8"}

# Model fields that change parameter shapes or the forward graph.
_ARCHITECTURE_FIELDS = (
    "d_model",
    "heads",
    "ffn_dim",
    "n_encoder_layers",
    "n_generator_layers",
    "n_recognizer_layers",
    "disc_hidden",
    "disc_hidden_activation",
)


class BestRecord(BaseModel):
    """Best validation result seen so far."""

    step: int
    ter_clean: float
    ter_noisy: float | None = None


@dataclass
class TrainState:
    """Everything needed to continue a run.

    Attributes:
        step: Completed optimisation steps.
        params: Model parameters.
        adam: Adam moments and update counts.
        config: Run configuration.
        dims: Corpus widths and vocabulary size.
        best_val: Best validation record, if any evaluation has run.

    Random draws are derived from (config.train.seed, step), so the RNG state
    is fully described by those two values.
    """

    step: int
    params: ModelParams
    adam: AdamState
    config: RunConfig
    dims: InputDims
    best_val: BestRecord | None = None

    @property
    def rng_state(self) -> dict[str, int]:
        return {"seed": self.config.train.seed, "next_step": self.step + 1}

    def copy(self) -> TrainState:
        return TrainState(
            step=self.step,
            params=self.params.copy(),
            adam=self.adam.copy(),
            config=self.config,
            dims=self.dims,
            best_val=self.best_val,
        )


def _dtype_name(params: ModelParams) -> str:
    kinds = {a.dtype for a in params.arrays.values()}
    if kinds == {np.dtype(np.float64)}:
        return "float64"
    if kinds <= {np.dtype(np.float32)}:
        return "float32"
    raise CheckpointError(f"parameters mix dtypes {sorted(str(k) for k in kinds)}", "dtype")


def encode_checkpoint(state: TrainState) -> bytes:
    """Serialise a state to checkpoint bytes."""
    dtype = _dtype_name(state.params)
    header: dict[str, Any] = {
        "config": state.config.model_dump(mode="json"),
        "step": state.step,
        "rng": state.rng_state,
        "best_val": state.best_val.model_dump(mode="json") if state.best_val else None,
        "dtype": dtype,
        "input_dims": {
            "d_visual": state.dims.d_visual,
            "d_audio": state.dims.d_audio,
            "vocab_size": state.dims.vocab_size,
        },
        "manifest": [
            {"name": name, "shape": list(array.shape), "adam_t": state.adam.t[name]}
            for name, array in state.params.arrays.items()
        ],
    }
    header_bytes = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    le = _DTYPES[dtype]
    chunks = [
        CHECKPOINT_MAGIC,
        np.array([CHECKPOINT_VERSION, len(header_bytes)], dtype="<u4").tobytes(),
        header_bytes,
    ]
    for name, array in state.params.arrays.items():
        for tensor in (array, state.adam.m[name], state.adam.v[name]):
            chunks.append(np.ascontiguousarray(tensor, dtype=le).tobytes())
    return b"".join(chunks)


def save_checkpoint(state: TrainState, path: str | Path) -> Path:
    """Write a checkpoint atomically (temporary file, then rename)."""
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    tmp = target.with_suffix(target.suffix + ".tmp")
    tmp.write_bytes(encode_checkpoint(state))
    os.replace(tmp, target)
    logger.debug("Checkpoint step %d written to %s", state.step, target)
    return target


def _check_config(saved: RunConfig, expected: RunConfig | None) -> None:
    if expected is None:
        return
    for field in _ARCHITECTURE_FIELDS:
        have = getattr(saved.model, field)
        want = getattr(expected.model, field)
        if have != want:
            raise CheckpointError(
                f"checkpoint has model.{field}={have!r}, configuration expects {want!r}",
                f"model.{field}",
            )


def _check_dims(saved: InputDims, expected: InputDims | None) -> None:
    if expected is None:
        return
    for field in ("d_visual", "d_audio", "vocab_size"):
        have, want = getattr(saved, field), getattr(expected, field)
        if have != want:
            raise CheckpointError(
                f"checkpoint was trained with {field}={have}, corpus has {want}", field
            )


def decode_checkpoint(
    buf: bytes,
    expected_config: RunConfig | None = None,
    expected_dims: InputDims | None = None,
) -> TrainState:
    """Parse checkpoint bytes.

    Args:
        buf: File contents.
        expected_config: If given, architecture fields must match.
        expected_dims: If given, corpus widths and vocabulary must match.

    Raises:
        CheckpointError: On bad magic, unsupported version or incompatible
            configuration, naming the field.
        FormatError: On truncation or a malformed header.
    """
    if buf[:4] != CHECKPOINT_MAGIC:
        raise CheckpointError("not a checkpoint (bad magic)", "magic")
    if len(buf) < 12:
        raise FormatError("truncated preamble", "preamble", 4)
    version, header_len = (int(x) for x in np.frombuffer(buf, dtype="<u4", count=2, offset=4))
    if version != CHECKPOINT_VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}", "version")
    offset = 12
    if offset + header_len > len(buf):
        raise FormatError("truncated header", "header", offset)
    try:
        header = json.loads(buf[offset : offset + header_len].decode("utf-8"))
        config = parse_run_config(header["config"])
        dims = InputDims(**header["input_dims"])
        best = BestRecord.model_validate(header["best_val"]) if header["best_val"] else None
        manifest = header["manifest"]
        dtype = header["dtype"]
        step = int(header["step"])
    except (
        UnicodeDecodeError,
        json.JSONDecodeError,
        KeyError,
        TypeError,
        ValidationError,
        ConfigurationError,
    ) as e:
        raise FormatError(f"malformed header: {e}", "header", offset) from e
    if dtype not in _DTYPES:
        raise CheckpointError(f"unsupported tensor dtype {dtype}", "dtype")
    _check_config(config, expected_config)
    _check_dims(dims, expected_dims)
    offset += header_len

    le = np.dtype(_DTYPES[dtype])
    arrays: dict[str, np.ndarray[Any, Any]] = {}
    adam = AdamState()
    for entry in manifest:
        name, shape = entry["name"], tuple(entry["shape"])
        count = int(np.prod(shape, dtype=np.int64))
        loaded = []
        for part in ("param", "m", "v"):
            size = count * le.itemsize
            if offset + size > len(buf):
                raise FormatError(f"truncated tensor {name} ({part})", "tensors", offset)
            data = np.frombuffer(buf, dtype=le, count=count, offset=offset)
            loaded.append(data.reshape(shape).astype(dtype))
            offset += size
        arrays[name], adam.m[name], adam.v[name] = loaded
        adam.t[name] = int(entry["adam_t"])
    if offset != len(buf):
        raise FormatError(f"{len(buf) - offset} trailing bytes", "tensors", offset)

    return TrainState(
        step=step,
        params=ModelParams(arrays),
        adam=adam,
        config=config,
        dims=dims,
        best_val=best,
    )


def load_checkpoint(
    path: str | Path,
    expected_config: RunConfig | None = None,
    expected_dims: InputDims | None = None,
) -> TrainState:
    """Read a checkpoint file; see `decode_checkpoint`."""
    try:
        buf = Path(path).read_bytes()
    except OSError as e:
        raise CheckpointError(f"cannot read checkpoint {path}: {e}", "path") from e
    return decode_checkpoint(buf, expected_config, expected_dims)
