"""Composed forward pass over one utterance."""

from dataclasses import dataclass, field

import numpy as np

from src.autodiff.tensor import Array, Tensor, constant
from src.models.corpus import Utterance
from src.models.run_config import Modality, ModelConfig
from src.services.network import mirgen, towers
from src.services.network.params import ParamView
from src.services.network.pipeline import A_SPE, INV, V_SPE, Pipeline
from src.services.network.recognition import recognize, single_modality_mask


@dataclass
class Representations:
    """Intermediate streams of one forward pass.

    Attributes:
        f_v: Visual front-end output (after modality masking).
        f_a: Audio front-end output (after modality masking).
        v_spe: Visual specific stream.
        a_spe: Audio specific stream.
        inv: Invariant stream; None when the pipeline has no fusion.
        logits: Recognizer output; None when recognition was skipped.
        masks: HMA masks per modality, when collected.
    """

    f_v: Tensor
    f_a: Tensor
    v_spe: Tensor
    a_spe: Tensor
    inv: Tensor | None = None
    logits: Tensor | None = None
    masks: dict[str, list[Array]] = field(default_factory=dict)


def utterance_inputs(utterance: Utterance, dtype: np.dtype[np.floating]) -> tuple[Tensor, Tensor]:
    """Raw visual and audio frames as constants at the given precision."""
    return constant(utterance.visual.astype(dtype)), constant(utterance.audio.astype(dtype))


def forward(
    p: ParamView,
    cfg: ModelConfig,
    pipeline: Pipeline,
    modality: Modality,
    x_v: Tensor,
    x_a: Tensor,
    rng: np.random.Generator | None = None,
    with_recognizer: bool = True,
    collect_masks: bool = False,
) -> Representations:
    """Front-ends, encoders, generator and recognizer as the pipeline selects.

    Args:
        p: Bound parameters.
        cfg: Model dimensions.
        pipeline: Active pipeline.
        modality: Input modality; the missing one is zeroed after its front-end.
        x_v: Raw visual frames, T×D_v_raw.
        x_a: Raw audio frames, T×D_a_raw.
        rng: Dropout source; None for evaluation.
        with_recognizer: Also compute class logits.
        collect_masks: Record HMA masks.

    Returns:
        Representations of the utterance.
    """
    f_v = towers.visual_frontend(p, cfg, x_v)
    f_a = towers.audio_frontend(p, cfg, x_a)
    f_v, f_a = single_modality_mask(modality, f_v, f_a)

    if pipeline.use_encoders:
        v_spe, a_spe = towers.encode(p, cfg, f_v, f_a, rng)
    else:
        v_spe, a_spe = f_v, f_a
    reps = Representations(f_v=f_v, f_a=f_a, v_spe=v_spe, a_spe=a_spe)

    if pipeline.use_fusion:
        f_va = mirgen.fuse_query(p, f_v, f_a)
        if pipeline.use_generator:
            masks: dict[str, list[Array]] | None = {} if collect_masks else None
            reps.inv = mirgen.generate(p, cfg, v_spe, a_spe, f_va, rng, masks)
            reps.masks = masks or {}
        else:
            reps.inv = f_va

    if with_recognizer:
        streams = {V_SPE: v_spe, A_SPE: a_spe, INV: reps.inv}
        parts = []
        for name in pipeline.rec_inputs:
            stream = streams[name]
            assert stream is not None, f"pipeline feeds {name} but computes no fusion"
            parts.append(stream)
        reps.logits = recognize(p, cfg, parts, rng)
    return reps
