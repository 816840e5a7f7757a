"""Experiment harness: configuration, sweeps, property suite and CLI."""
