"""Network modules: front-ends and encoders, generator, discriminator, contrastive loss, recognizer."""

from src.services.network.adversary import discriminate, loss_d, loss_g, modality_terms
from src.services.network.mim import MimConfig, mim_batch_loss, mim_loss
from src.services.network.mirgen import fuse_query, generate, hma, hma_with_mask
from src.services.network.model import Representations, forward, utterance_inputs
from src.services.network.params import (
    InputDims,
    ModelParams,
    ParamBuilder,
    ParamView,
    check_compatible,
    init_params,
    partition_of,
)
from src.services.network.pipeline import Pipeline, apply_ablation, pipeline_for
from src.services.network.recognition import (
    batch_token_error_rate,
    recognize,
    single_modality_mask,
    token_error_rate,
)
from src.services.network.towers import audio_frontend, encode, visual_frontend

__all__ = [
    "InputDims",
    "MimConfig",
    "ModelParams",
    "ParamBuilder",
    "ParamView",
    "Pipeline",
    "Representations",
    "apply_ablation",
    "audio_frontend",
    "batch_token_error_rate",
    "check_compatible",
    "discriminate",
    "encode",
    "forward",
    "fuse_query",
    "generate",
    "hma",
    "hma_with_mask",
    "init_params",
    "loss_d",
    "loss_g",
    "mim_batch_loss",
    "mim_loss",
    "modality_terms",
    "partition_of",
    "pipeline_for",
    "recognize",
    "single_modality_mask",
    "token_error_rate",
    "utterance_inputs",
    "visual_frontend",
]
