"""Tests for AI Development Automation System."""
