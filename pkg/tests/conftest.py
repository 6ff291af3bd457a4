import json
from datetime import datetime, timedelta

import pytest


def pytest_runtest_logreport(report):
    """One visible pass/fail line per acceptance criterion."""
    if report.when == "call" and "test_acceptance" in report.nodeid:
        outcome = "PASS" if report.passed else "FAIL"
        name = report.nodeid.split("::")[-1]
        print(f"\n[ACCEPTANCE] {outcome} {name} ({report.duration:.2f}s)")

from opencoding.corpus import Dataset, Message, ingest_dataset
from opencoding.resources import (
    corpus_meta_path,
    full_corpus_path,
    sample_corpus_path,
)


def make_message(mid: str, minute: int, content: str = "hello", role: str = "User") -> Message:
    return Message(
        id=mid,
        speaker_role=role,
        speaker_alias=None,
        timestamp=datetime(2017, 10, 1, 9, 0) + timedelta(minutes=minute),
        content=content,
    )


def make_dataset(minutes: list[int], research_question: str = "How did the community emerge?") -> Dataset:
    messages = tuple(
        make_message(f"1-{i}", minute, content=f"message {i}") for i, minute in enumerate(minutes)
    )
    return Dataset(messages=messages, research_question=research_question)


@pytest.fixture(scope="session")
def study_meta() -> dict:
    return json.loads(corpus_meta_path().read_text(encoding="utf-8"))


@pytest.fixture(scope="session")
def full_dataset(study_meta) -> Dataset:
    return ingest_dataset(
        full_corpus_path(),
        base_year=2017,
        research_question=study_meta["research_question"],
        coding_notes=study_meta["coding_notes"],
        language_note=study_meta["language_note"],
    )


@pytest.fixture(scope="session")
def sample_dataset(study_meta) -> Dataset:
    return ingest_dataset(
        sample_corpus_path(),
        base_year=2017,
        research_question=study_meta["research_question"],
        coding_notes=study_meta["coding_notes"],
    )
