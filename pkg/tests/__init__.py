"""Tests for shapecheck."""
