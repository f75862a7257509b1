"""Unit tests for mirgan-desk."""
