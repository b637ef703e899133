"""Tests for the equivalence lab."""
