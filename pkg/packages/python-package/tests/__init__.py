"""Test package for torus_lab."""
