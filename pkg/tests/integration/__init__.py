"""Integration tests for mirgan-desk."""
