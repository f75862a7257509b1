"""Finite-difference checks of every primitive, every network module and the full objective.

All checks run at 64-bit on tiny shapes with dropout off. Module checks use
randomised parameters (including a non-zero discriminator output layer) so
that no input sits at a point with vanishing gradient.
"""

import logging
from collections.abc import Callable, Sequence
from dataclasses import dataclass
from typing import Literal

import numpy as np

from src.autodiff import ops
from src.autodiff.attention import AttentionParams, multi_head_attention
from src.autodiff.gradcheck import GRADCHECK_TOLERANCE, TensorFunction, grad_check_report
from src.autodiff.tensor import Array, Tensor, constant
from src.exceptions import UsageError
from src.models.metrics import GradcheckReport, GradcheckResult
from src.models.run_config import Modality, ModelConfig
from src.services.network import adversary, mirgen, towers
from src.services.network.mim import MimConfig, mim_batch_loss, mim_loss
from src.services.network.model import Representations, forward
from src.services.network.params import InputDims, ModelParams, ParamView, init_params
from src.services.network.pipeline import Pipeline
from src.services.network.recognition import recognize

logger = logging.getLogger(__name__)

Scope = Literal["ops", "modules", "full"]
SCOPES: tuple[Scope, ...] = ("ops", "modules", "full")

FRAMES = 4
WIDTH = 8
TINY_MODEL = ModelConfig(
    d_model=WIDTH,
    heads=2,
    ffn_dim=12,
    n_encoder_layers=1,
    n_generator_layers=1,
    n_recognizer_layers=1,
    dropout=0.0,
)
TINY_DIMS = InputDims(d_visual=6, d_audio=5, vocab_size=4)
FULL_SAMPLE = 3


@dataclass(frozen=True)
class CheckCase:
    """One gradient check: a scalar function and the inputs it is differentiated by."""

    scope: Scope
    name: str
    fn: TensorFunction
    inputs: tuple[Array, ...]
    sample: int | None = None


def _readout(fn: Callable[..., Tensor], seed: int) -> TensorFunction:
    """Reduce a tensor-valued function to a scalar with fixed random weights."""

    def scalar(*xs: Tensor) -> Tensor:
        out = fn(*xs)
        weights = np.random.default_rng(seed).standard_normal(out.shape)
        return ops.sum_all(ops.mul(out, constant(weights)))

    return scalar


def _away_from_zero(rng: np.random.Generator, shape: tuple[int, ...]) -> Array:
    signs = np.where(rng.random(shape) < 0.5, -1.0, 1.0)
    return signs * (0.2 + rng.random(shape))


def _attention_inputs(rng: np.random.Generator, width: int) -> list[Array]:
    arrays: list[Array] = []
    for _ in range(4):
        arrays.append(rng.standard_normal((width, width)) * 0.5)
        arrays.append(rng.standard_normal(width) * 0.1)
    return arrays


# (rows, columns, other) per variant; variants 1 to 3 hold the single-row,
# single-column and single-other-row edges.
OP_SHAPES: tuple[tuple[int, int, int], ...] = (
    (3, 4, 5),
    (1, 4, 2),
    (3, 1, 2),
    (2, 5, 1),
    (4, 2, 3),
)
# Row-normalising ops need this many columns for a non-degenerate gradient.
_MIN_NORM_WIDTH = 3

_OpCase = tuple[str, Callable[..., Tensor], tuple[Array, ...]]


def _op_variant(rng: np.random.Generator, rows: int, cols: int, other: int) -> list[_OpCase]:
    def n(*shape: int) -> Array:
        return rng.standard_normal(shape)

    width = max(cols, _MIN_NORM_WIDTH)
    heads = 2 if width % 2 == 0 else 1
    labels = rng.integers(0, width, size=rows)
    split = cols // 2
    return [
        ("matmul", ops.matmul, (n(rows, cols), n(cols, other))),
        ("linear", ops.linear, (n(rows, cols), n(cols, other), n(other))),
        ("transpose", ops.transpose, (n(rows, cols),)),
        ("add", ops.add, (n(rows, cols), n(rows, cols))),
        ("sub", ops.sub, (n(rows, cols), n(rows, cols))),
        ("mul", ops.mul, (n(rows, cols), n(rows, cols))),
        ("sigmoid", ops.sigmoid, (n(rows, cols),)),
        ("prelu", ops.prelu, (_away_from_zero(rng, (rows, cols)), rng.random(cols))),
        ("exp", ops.exp, (n(rows, cols),)),
        ("log", ops.log, (0.5 + rng.random((rows, cols)),)),
        ("negate", ops.negate, (n(rows, cols),)),
        ("scale", lambda a: ops.scale(a, -2.5), (n(rows, cols),)),
        ("log_sigmoid", ops.log_sigmoid, (n(rows, cols) * 3.0,)),
        (
            "dropout",
            lambda a: ops.dropout(a, 0.5, np.random.default_rng(7)),
            (n(rows, cols),),
        ),
        (
            "concat_features",
            lambda a, b: ops.concat_features([a, b]),
            (n(rows, cols), n(rows, other)),
        ),
        ("concat_rows", lambda a, b: ops.concat_rows([a, b]), (n(rows, cols), n(other, cols))),
        ("slice_columns", lambda a: ops.slice_columns(a, split, cols), (n(rows, cols),)),
        ("sum_all", ops.sum_all, (n(rows, cols),)),
        ("mean_all", ops.mean_all, (n(rows, cols),)),
        ("softmax_rows", ops.softmax_rows, (n(rows, width),)),
        ("log_softmax_rows", ops.log_softmax_rows, (n(rows, width),)),
        (
            "layer_norm",
            ops.layer_norm,
            (n(rows, width), 1.0 + n(width) * 0.1, n(width) * 0.1),
        ),
        ("cosine_rows", ops.cosine_rows, (n(rows, width), n(other, width))),
        (
            "multi_head_attention",
            lambda q, kv, *p: multi_head_attention(q, kv, kv, heads, AttentionParams(*p)),
            (n(rows, width), n(other, width), *_attention_inputs(rng, width)),
        ),
        (
            "cross_entropy",
            lambda z: ops.cross_entropy(z, labels),
            (n(rows, width) * 2.0,),
        ),
    ]


def op_cases() -> list[CheckCase]:
    """Every differentiable primitive on each of the OP_SHAPES variants.

    Variant i draws its inputs from seed i; cases are named `op[i]`.
    """
    out: list[CheckCase] = []
    for i, shape in enumerate(OP_SHAPES):
        for j, (name, fn, inputs) in enumerate(_op_variant(np.random.default_rng(i), *shape)):
            scalar = fn if name == "cross_entropy" else _readout(fn, 100 * i + j)
            out.append(CheckCase("ops", f"{name}[{i}]", scalar, inputs))
    return out


def randomized_params(pipeline: Pipeline, seed: int = 0, spread: float = 0.3) -> ModelParams:
    """Tiny 64-bit parameters with every entry perturbed away from its initial value."""
    params = init_params(TINY_MODEL, TINY_DIMS, pipeline, seed, np.float64)
    rng = np.random.default_rng([seed, 99])
    return ModelParams(
        {name: a + spread * rng.standard_normal(a.shape) for name, a in params.arrays.items()}
    )


def _bind(params: ModelParams, names: Sequence[str], tensors: Sequence[Tensor]) -> ParamView:
    merged = {n: constant(a) for n, a in params.arrays.items()}
    merged.update(zip(names, tensors, strict=True))
    return ParamView.from_tensors(merged)


def _module_case(
    name: str,
    params: ModelParams,
    partition: str,
    body: Callable[..., Tensor],
    inputs: Sequence[Array],
    sample: int | None = None,
) -> CheckCase:
    """Check a module with respect to its inputs and every parameter of its partition."""
    names = params.names([partition])
    k = len(inputs)

    def fn(*xs: Tensor) -> Tensor:
        return body(_bind(params, names, xs[k:]), *xs[:k])

    arrays = (*inputs, *(params[n] for n in names))
    return CheckCase("modules", name, fn, tuple(arrays), sample)


def module_cases() -> list[CheckCase]:
    """Front-ends, encoders, generator, discriminator losses, contrastive loss and recognizer."""
    params = randomized_params(Pipeline())
    rng = np.random.default_rng(1)
    cfg = TINY_MODEL

    def rep() -> Array:
        return rng.standard_normal((FRAMES, WIDTH))

    labels = np.array([0, 3, 1, 2])
    mim_cfg = MimConfig(temperature=0.1)
    return [
        _module_case(
            "visual_frontend",
            params,
            "vf",
            _readout(lambda p, x: towers.visual_frontend(p, cfg, x), 101),
            [rng.standard_normal((FRAMES, TINY_DIMS.d_visual))],
        ),
        _module_case(
            "audio_frontend",
            params,
            "af",
            _readout(lambda p, x: towers.audio_frontend(p, cfg, x), 102),
            [rng.standard_normal((FRAMES, TINY_DIMS.d_audio))],
        ),
        _module_case(
            "encode",
            params,
            "vae",
            _readout(lambda p, v, a: ops.concat_features(list(towers.encode(p, cfg, v, a))), 103),
            [rep(), rep()],
            sample=6,
        ),
        _module_case(
            "generate",
            params,
            "G",
            _readout(lambda p, v, a, q: mirgen.generate(p, cfg, v, a, q), 104),
            [rep(), rep(), rep()],
            sample=6,
        ),
        _module_case(
            "loss_g",
            params,
            "D",
            lambda p, inv: adversary.loss_g(p, cfg, inv),
            [rep()],
        ),
        _module_case(
            "loss_d",
            params,
            "D",
            lambda p, a, v, inv: adversary.loss_d(p, cfg, a, v, inv),
            [rep(), rep(), rep()],
        ),
        CheckCase(
            "modules",
            "mim_loss",
            lambda inv, v, a: mim_loss(inv, v, a, mim_cfg),
            (rep(), rep(), rep()),
        ),
        _module_case(
            "recognize",
            params,
            "rec",
            lambda p, v, a, inv: ops.cross_entropy(recognize(p, cfg, [v, a, inv]), labels),
            [rep(), rep(), rep()],
            sample=6,
        ),
    ]


def full_cases(lambda_gan: float = 0.5, lambda_mim: float = 0.1) -> list[CheckCase]:
    """Phase-B objective and L_GAN of a 2-utterance batch, by every parameter tensor.

    The weights are larger than the training defaults so that the adversarial
    and contrastive terms contribute measurably to the checked gradient.
    """
    pipeline = Pipeline(lambda_gan=lambda_gan, lambda_mim=lambda_mim)
    params = randomized_params(pipeline, seed=2)
    rng = np.random.default_rng(3)
    batch = [
        (
            constant(rng.standard_normal((frames, TINY_DIMS.d_visual))),
            constant(rng.standard_normal((frames, TINY_DIMS.d_audio))),
            rng.integers(0, TINY_DIMS.vocab_size, size=frames),
        )
        for frames in (FRAMES, FRAMES - 1)
    ]
    names = params.names()
    mim_cfg = MimConfig(temperature=0.1)

    def run(tensors: Sequence[Tensor]) -> tuple[ParamView, list[Representations]]:
        view = ParamView.from_tensors(dict(zip(names, tensors, strict=True)))
        reps = [
            forward(view, TINY_MODEL, pipeline, Modality.AV, x_v, x_a) for x_v, x_a, _ in batch
        ]
        return view, reps

    def objective(*tensors: Tensor) -> Tensor:
        view, reps = run(tensors)
        logits = ops.concat_rows([r.logits for r in reps if r.logits is not None])
        labels = np.concatenate([y for _, _, y in batch])
        total = ops.cross_entropy(logits, labels)
        inv = [r.inv for r in reps if r.inv is not None]
        total = ops.add(total, ops.scale(adversary.loss_g(view, TINY_MODEL, inv), lambda_gan))
        mim = mim_batch_loss(inv, [r.v_spe for r in reps], [r.a_spe for r in reps], mim_cfg)
        return ops.add(total, ops.scale(mim, lambda_mim))

    def gan(*tensors: Tensor) -> Tensor:
        view, reps = run(tensors)
        return adversary.loss_d(
            view,
            TINY_MODEL,
            [r.a_spe for r in reps],
            [r.v_spe for r in reps],
            [r.inv for r in reps if r.inv is not None],
        )

    arrays = tuple(params[n] for n in names)
    return [
        CheckCase("full", "total_objective", objective, arrays, FULL_SAMPLE),
        CheckCase("full", "adversarial_objective", gan, arrays, FULL_SAMPLE),
    ]


def build_cases(scope: Scope) -> list[CheckCase]:
    match scope:
        case "ops":
            return op_cases()
        case "modules":
            return module_cases()
        case "full":
            return full_cases()
    raise UsageError(f"unknown gradcheck scope '{scope}'")


def run_cases(cases: Sequence[CheckCase], tolerance: float = GRADCHECK_TOLERANCE) -> GradcheckReport:
    results = []
    for case in cases:
        report = grad_check_report(case.fn, case.inputs, sample=case.sample)
        passed = report.passed(tolerance)
        if not passed:
            logger.warning(
                "gradient check %s/%s failed: %.3e", case.scope, case.name, report.max_rel_error
            )
        results.append(
            GradcheckResult(
                scope=case.scope,
                name=case.name,
                max_rel_error=report.max_rel_error,
                coordinates=sum(report.coordinates),
                passed=passed,
            )
        )
    return GradcheckReport(tolerance=tolerance, results=results)


def run_gradcheck(scope: Scope, tolerance: float = GRADCHECK_TOLERANCE) -> GradcheckReport:
    """Run every check of a scope ("ops", "modules" or "full")."""
    return run_cases(build_cases(scope), tolerance)
