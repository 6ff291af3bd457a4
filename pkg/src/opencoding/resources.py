"""Paths to data bundled with the package."""

from __future__ import annotations

from pathlib import Path


def data_dir() -> Path:
    return Path(__file__).parent / "data"


def fixtures_dir() -> Path:
    return data_dir() / "fixtures"


def full_corpus_path() -> Path:
    return data_dir() / "corpus_full.jsonl"


def sample_corpus_path() -> Path:
    return data_dir() / "corpus_sample.tsv"


def corpus_meta_path() -> Path:
    return data_dir() / "corpus_meta.json"
