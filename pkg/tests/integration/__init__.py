"""Integration tests for AI Development Automation System."""
