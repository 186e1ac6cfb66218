"""Experiment harness: configuration, seeding, trial execution and persistence."""
