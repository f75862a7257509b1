"""Partitioned parameter store and its binding to a differentiation tape.

Parameter names are dotted paths whose first component is the partition:
`vf` (visual front-end), `af` (audio front-end), `vae` (paired encoders),
`G` (generator), `D` (discriminator) and `rec` (recognizer).
"""

from __future__ import annotations

import logging
import math
import zlib
from collections.abc import Collection, Iterator, Mapping
from dataclasses import dataclass

import numpy as np
import numpy.typing as npt

from src.autodiff import ops
from src.autodiff.attention import AttentionParams
from src.autodiff.tensor import Array, Tape, Tensor, constant
from src.exceptions import DimensionError, UsageError
from src.models.run_config import ModelConfig
from src.services.network.pipeline import Pipeline

logger = logging.getLogger(__name__)

PRELU_INIT = 0.25
PARTITIONS = ("vf", "af", "vae", "G", "D", "rec")


def partition_of(name: str) -> str:
    return name.split(".", 1)[0]


class ModelParams:
    """Ordered mapping of parameter name to array (θ = θ_vf ∪ θ_af ∪ θ_vae ∪ θ_G ∪ θ_D ∪ θ_rec)."""

    def __init__(self, arrays: Mapping[str, Array] | None = None) -> None:
        self.arrays: dict[str, Array] = dict(arrays or {})

    def __contains__(self, name: object) -> bool:
        return name in self.arrays

    def __iter__(self) -> Iterator[str]:
        return iter(self.arrays)

    def __len__(self) -> int:
        return len(self.arrays)

    def __getitem__(self, name: str) -> Array:
        return self.arrays[name]

    def names(self, partitions: Collection[str] | None = None) -> list[str]:
        """Parameter names, optionally restricted to some partitions."""
        if partitions is None:
            return list(self.arrays)
        return [n for n in self.arrays if partition_of(n) in partitions]

    def partitions(self) -> list[str]:
        return [p for p in PARTITIONS if any(partition_of(n) == p for n in self.arrays)]

    def shapes(self) -> dict[str, tuple[int, ...]]:
        return {n: tuple(a.shape) for n, a in self.arrays.items()}

    def copy(self) -> ModelParams:
        return ModelParams({n: a.copy() for n, a in self.arrays.items()})

    def size(self, partitions: Collection[str] | None = None) -> int:
        """Total number of scalars."""
        return sum(self.arrays[n].size for n in self.names(partitions))

    def bind(self, tape: Tape | None, trainable: Collection[str] = ()) -> ParamView:
        """Expose parameters as tensors.

        Args:
            tape: Tape to register leaves on; None binds everything as constants.
            trainable: Partitions whose parameters become named gradient leaves.

        Returns:
            ParamView over this store.
        """
        tensors: dict[str, Tensor] = {}
        for name, array in self.arrays.items():
            if tape is not None and partition_of(name) in trainable:
                tensors[name] = tape.leaf(array, name)
            else:
                tensors[name] = constant(array)
        return ParamView(tensors)


class ParamView:
    """Read-only tensor view of a parameter set, with helpers for common layers."""

    def __init__(self, tensors: Mapping[str, Tensor]) -> None:
        self._tensors = dict(tensors)

    @classmethod
    def from_tensors(cls, tensors: Mapping[str, Tensor]) -> ParamView:
        return cls(tensors)

    def __contains__(self, name: object) -> bool:
        return name in self._tensors

    def __getitem__(self, name: str) -> Tensor:
        try:
            return self._tensors[name]
        except KeyError:
            raise UsageError(f"parameter '{name}' is not part of this model") from None

    def has_partition(self, partition: str) -> bool:
        return any(partition_of(n) == partition for n in self._tensors)

    def linear(self, prefix: str, x: Tensor) -> Tensor:
        return ops.linear(x, self[f"{prefix}.weight"], self[f"{prefix}.bias"])

    def layer_norm(self, prefix: str, x: Tensor, eps: float) -> Tensor:
        return ops.layer_norm(x, self[f"{prefix}.gamma"], self[f"{prefix}.beta"], eps)

    def prelu(self, prefix: str, x: Tensor) -> Tensor:
        return ops.prelu(x, self[f"{prefix}.alpha"])

    def attention(self, prefix: str) -> AttentionParams:
        return AttentionParams(
            q_weight=self[f"{prefix}.q.weight"],
            q_bias=self[f"{prefix}.q.bias"],
            k_weight=self[f"{prefix}.k.weight"],
            k_bias=self[f"{prefix}.k.bias"],
            v_weight=self[f"{prefix}.v.weight"],
            v_bias=self[f"{prefix}.v.bias"],
            o_weight=self[f"{prefix}.o.weight"],
            o_bias=self[f"{prefix}.o.bias"],
        )


@dataclass(frozen=True)
class InputDims:
    """Widths fixed by the corpus."""

    d_visual: int
    d_audio: int
    vocab_size: int


class ParamBuilder:
    """Draws initial parameters, one RNG stream per partition.

    Weights use Glorot-uniform draws, biases start at zero, layer norms at
    γ=1/β=0 and PReLU slopes at 0.25. Because each partition has its own
    stream, leaving a partition out does not change any other's values.
    """

    def __init__(self, seed: int, dtype: npt.DTypeLike = np.float32) -> None:
        self.seed = seed
        self.dtype = np.dtype(dtype)
        self.arrays: dict[str, Array] = {}
        self._rngs: dict[str, np.random.Generator] = {}

    def _rng(self, name: str) -> np.random.Generator:
        part = partition_of(name)
        if part not in self._rngs:
            self._rngs[part] = np.random.default_rng([self.seed, zlib.crc32(part.encode())])
        return self._rngs[part]

    def _put(self, name: str, array: npt.NDArray[np.floating]) -> None:
        if name in self.arrays:
            raise UsageError(f"parameter '{name}' defined twice")
        self.arrays[name] = np.ascontiguousarray(array, dtype=self.dtype)

    def linear(self, prefix: str, fan_in: int, fan_out: int, zero: bool = False) -> None:
        limit = math.sqrt(6.0 / (fan_in + fan_out))
        weight = (
            np.zeros((fan_in, fan_out))
            if zero
            else self._rng(prefix).uniform(-limit, limit, size=(fan_in, fan_out))
        )
        self._put(f"{prefix}.weight", weight)
        self._put(f"{prefix}.bias", np.zeros(fan_out))

    def layer_norm(self, prefix: str, width: int) -> None:
        self._put(f"{prefix}.gamma", np.ones(width))
        self._put(f"{prefix}.beta", np.zeros(width))

    def prelu(self, prefix: str, width: int) -> None:
        self._put(f"{prefix}.alpha", np.full(width, PRELU_INIT))

    def attention(self, prefix: str, width: int) -> None:
        for proj in ("q", "k", "v", "o"):
            self.linear(f"{prefix}.{proj}", width, width)

    def build(self) -> ModelParams:
        return ModelParams(self.arrays)


def _encoder_layer(b: ParamBuilder, prefix: str, cfg: ModelConfig, cross: bool) -> None:
    d = cfg.d_model
    b.attention(f"{prefix}.self_attn", d)
    b.layer_norm(f"{prefix}.norm1", d)
    if cross:
        b.attention(f"{prefix}.cross_attn", d)
        b.layer_norm(f"{prefix}.norm2", d)
    b.linear(f"{prefix}.ffn1", d, cfg.ffn_dim)
    b.prelu(f"{prefix}.ffn_act", cfg.ffn_dim)
    b.linear(f"{prefix}.ffn2", cfg.ffn_dim, d)
    b.layer_norm(f"{prefix}.norm3", d)


def init_params(
    cfg: ModelConfig,
    dims: InputDims,
    pipeline: Pipeline,
    seed: int,
    dtype: npt.DTypeLike = np.float32,
) -> ModelParams:
    """Initialise every parameter the pipeline uses.

    Args:
        cfg: Network dimensions.
        dims: Corpus widths and vocabulary size.
        pipeline: Active pipeline; decides which partitions exist.
        seed: Initialisation seed.
        dtype: Parameter precision.

    Returns:
        Fresh ModelParams. The discriminator output layer starts at zero, so an
        untrained discriminator outputs 0.5 on every frame.
    """
    d = cfg.d_model
    b = ParamBuilder(seed, dtype)

    b.linear("vf.proj1", dims.d_visual, d)
    b.prelu("vf.act", d)
    b.linear("vf.proj2", d, d)
    b.layer_norm("vf.norm", d)

    b.linear("af.proj", dims.d_audio, d)
    b.layer_norm("af.norm", d)

    if pipeline.use_encoders:
        for i in range(cfg.n_encoder_layers):
            for stream in ("v", "a"):
                _encoder_layer(b, f"vae.{stream}.layer{i}", cfg, cross=True)

    if pipeline.use_fusion:
        b.linear("G.fuse", 2 * d, d)
        if pipeline.use_generator:
            for i in range(cfg.n_generator_layers):
                for m in ("v", "a"):
                    b.attention(f"G.block{i}.{m}.attn", d)
                    b.linear(f"G.block{i}.{m}.mask", 2 * d, d)
                    b.linear(f"G.block{i}.{m}.conv", d, d)
                    b.prelu(f"G.block{i}.{m}.conv", d)
                b.layer_norm(f"G.block{i}.norm", d)

    if pipeline.use_discriminator:
        hidden = cfg.disc_hidden_dim
        b.linear("D.hidden", d, hidden)
        if cfg.disc_hidden_activation:
            b.prelu("D.act", hidden)
        b.linear("D.out", hidden, 1, zero=True)

    b.linear("rec.fuse", len(pipeline.rec_inputs) * d, d)
    for i in range(cfg.n_recognizer_layers):
        _encoder_layer(b, f"rec.layer{i}", cfg, cross=False)
    b.linear("rec.out", d, dims.vocab_size)

    params = b.build()
    logger.debug(
        "Initialised %d tensors (%d scalars) for mode %s",
        len(params),
        params.size(),
        pipeline.mode.value,
    )
    return params


def check_compatible(params: ModelParams, expected: ModelParams) -> None:
    """Raise DimensionError naming the first parameter whose shape differs."""
    for name, shape in expected.shapes().items():
        if name not in params:
            raise DimensionError(f"parameter '{name}' is missing")
        if params[name].shape != shape:
            raise DimensionError(f"parameter '{name}' has shape {params[name].shape}, expected {shape}")
    extra = set(params.names()) - set(expected.names())
    if extra:
        raise DimensionError(f"unexpected parameters: {sorted(extra)}")
