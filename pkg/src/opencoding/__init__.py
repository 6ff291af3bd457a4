"""Inductive coding pipelines over conversational datasets.

The package wires together: corpus ingestion, time-based conversation
segmentation with context windows, prompt rendering against interchangeable
chat backends (live / replay / mock), four coding approaches (topic
clustering plus three prompt-driven coders), codebook aggregation under an
exact-label merge rule, and a two-rater flag/reconcile evaluation workflow
served over HTTP for the review UI.
"""

__version__ = "0.1.0"
