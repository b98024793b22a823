"""Experiment orchestration: seeded runs, CSV/JSON emission, CLI."""
