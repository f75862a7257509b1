"""Forward-pipeline switches and the ablation modes that toggle them."""

import dataclasses
from dataclasses import dataclass

from src.exceptions import ConfigurationError
from src.models.run_config import AblationMode, TrainConfig

# Names of the representations the recognizer can consume.
V_SPE = "v_spe"
A_SPE = "a_spe"
INV = "inv"


@dataclass(frozen=True)
class Pipeline:
    """Which modules run and which losses are optimised.

    Attributes:
        mode: Ablation mode the pipeline was derived from.
        use_encoders: Run the paired encoders; otherwise front-end outputs are f^spe.
        use_generator: Run the HMA blocks; otherwise f_va^inv is the fused query.
        use_fusion: Compute the fused query and the invariant stream at all.
        use_discriminator: θ_D exists.
        adversarial: Run the discriminator update (Phase A).
        use_mim: Compute and report the contrastive term.
        rec_inputs: Representations concatenated into the recognizer, in order.
        lambda_gan: Weight of L_G in the Phase-B objective.
        lambda_mim: Weight of L_MIM in the Phase-B objective.
    """

    mode: AblationMode = AblationMode.FULL
    use_encoders: bool = True
    use_generator: bool = True
    use_fusion: bool = True
    use_discriminator: bool = True
    adversarial: bool = True
    use_mim: bool = True
    rec_inputs: tuple[str, ...] = (V_SPE, A_SPE, INV)
    lambda_gan: float = 0.01
    lambda_mim: float = 0.005

    @property
    def partitions(self) -> tuple[str, ...]:
        """Parameter partitions present under this pipeline."""
        parts = ["vf", "af"]
        if self.use_encoders:
            parts.append("vae")
        if self.use_fusion:
            parts.append("G")
        if self.use_discriminator:
            parts.append("D")
        parts.append("rec")
        return tuple(parts)


def apply_ablation(mode: AblationMode | str, pipeline: Pipeline) -> Pipeline:
    """Return the pipeline with one part of the system removed.

    Args:
        mode: Ablation mode (enum or its string value).
        pipeline: Full pipeline to modify.

    Returns:
        Modified copy; `full` returns an equal copy.

    Raises:
        ConfigurationError: If the mode is unknown.
    """
    try:
        mode = AblationMode(mode)
    except ValueError as e:
        raise ConfigurationError(f"unknown ablation mode '{mode}'") from e

    replace = dataclasses.replace
    match mode:
        case AblationMode.FULL:
            return replace(pipeline, mode=mode)
        case AblationMode.NO_INVARIANT:
            return replace(pipeline, mode=mode, rec_inputs=(V_SPE, A_SPE))
        case AblationMode.NO_SPECIFIC:
            return replace(pipeline, mode=mode, rec_inputs=(INV,))
        case AblationMode.NO_ENCODERS:
            return replace(pipeline, mode=mode, use_encoders=False)
        case AblationMode.NO_GENERATOR:
            return replace(pipeline, mode=mode, use_generator=False)
        case AblationMode.NO_DISCRIMINATOR:
            return replace(
                pipeline, mode=mode, use_discriminator=False, adversarial=False, lambda_gan=0.0
            )
        case AblationMode.NO_ADVERSARIAL:
            return replace(pipeline, mode=mode, adversarial=False, lambda_gan=0.0)
        case AblationMode.NO_MIM:
            return replace(pipeline, mode=mode, use_mim=False, lambda_mim=0.0)
        case AblationMode.BASE:
            return replace(
                pipeline,
                mode=mode,
                use_encoders=False,
                use_generator=False,
                use_fusion=False,
                use_discriminator=False,
                adversarial=False,
                use_mim=False,
                rec_inputs=(V_SPE, A_SPE),
                lambda_gan=0.0,
                lambda_mim=0.0,
            )
    raise ConfigurationError(f"unhandled ablation mode '{mode}'")


def pipeline_for(train: TrainConfig) -> Pipeline:
    """Pipeline for a training configuration (weights from the config, then the ablation)."""
    full = Pipeline(lambda_gan=train.lambda_gan, lambda_mim=train.lambda_mim)
    return apply_ablation(train.ablation, full)
