"""Experiment harness: configuration, data, drivers, persistence and CLI."""
