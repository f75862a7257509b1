"""Contract tests for mirgan-desk."""
