"""Reverse-mode automatic differentiation over dense tensors."""

from src.autodiff.attention import AttentionParams, attention_with_weights, multi_head_attention
from src.autodiff.gradcheck import GradCheckReport, grad_check, grad_check_report
from src.autodiff.tensor import Tape, Tensor, active_tape, backward, constant, detach

__all__ = [
    "AttentionParams",
    "GradCheckReport",
    "Tape",
    "Tensor",
    "active_tape",
    "attention_with_weights",
    "backward",
    "constant",
    "detach",
    "grad_check",
    "grad_check_report",
    "multi_head_attention",
]
