"""Unit tests for AI Development Automation System."""
