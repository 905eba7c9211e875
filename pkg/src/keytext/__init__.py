"""Evaluation and passage-ranking toolkit for grounded keys-to-text generation."""

__version__ = "0.1.0"
