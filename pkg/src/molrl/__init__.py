"""Verifiable rewards, metrics and toy-scale GRPO for molecule/text translation."""

__version__ = "0.1.0"
