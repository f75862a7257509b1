"""Tests for mirgan-desk."""
