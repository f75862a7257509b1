"""Utilities for run logging, corpus validation and CSV output."""
