"""Command handlers for the mirgan command line."""

from src.commands.handlers import (
    cmd_ablate,
    cmd_diagnose,
    cmd_eval,
    cmd_gen_data,
    cmd_gradcheck,
    cmd_train,
)

__all__ = [
    "cmd_ablate",
    "cmd_diagnose",
    "cmd_eval",
    "cmd_gen_data",
    "cmd_gradcheck",
    "cmd_train",
]
