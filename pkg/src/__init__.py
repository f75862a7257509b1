"""Desk-scale harness for adversarial modality-invariant representation learning."""
