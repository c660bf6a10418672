"""Tests for shiftlab."""
