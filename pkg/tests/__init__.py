"""Tests for hdmpc."""
