"""Evaluation and confidence-estimation toolkit for document layout
detection: annotation normalization, probability-map post-processing,
pixel / object / text metrics, per-image confidence scores and
active-learning selection."""

__version__ = "0.1.0"
