"""Test suite for fpp_lab."""
