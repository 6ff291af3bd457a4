"""Installs the bundled evaluation fixtures into a store directory.

The fixture set holds the transcribed codebooks for the four approaches (plus
the partial human codebook used by the concept comparison), and a two-rater
annotation set whose finalized flags reproduce the published evaluation
tallies. Loading replays the annotation events through the regular store API
so everything downstream (reports, server, UI) sees ordinary data.
"""

from __future__ import annotations

import json
import shutil
from pathlib import Path

from .evaluation import AnnotationStore, open_store
from .resources import fixtures_dir

FIXTURE_APPROACHES = ("topic", "chunk", "item", "verb", "human")


class FixtureError(RuntimeError):
    pass


def load_fixtures(
    store_dir: str | Path,
    source_dir: str | Path | None = None,
    pending: bool = False,
) -> AnnotationStore:
    """Copy fixture codebooks into the store and replay the annotation set.

    Returns the loaded AnnotationStore. With ``pending`` the seeded
    reconciliations are withheld (and raters left incomplete), leaving the
    disagreement queue populated for an interactive review session.
    """
    source = Path(source_dir) if source_dir else fixtures_dir()
    store_dir = Path(store_dir)
    cb_dir = store_dir / "codebooks"
    cb_dir.mkdir(parents=True, exist_ok=True)
    found = 0
    for approach in FIXTURE_APPROACHES:
        src = source / f"codebook_{approach}.json"
        if src.exists():
            shutil.copyfile(src, cb_dir / f"{approach}.json")
            found += 1
    if not found:
        raise FixtureError(f"no codebook fixtures found under {source}")
    _, store = open_store(store_dir)
    annotations_path = source / "annotations.json"
    if annotations_path.exists():
        replay_annotation_set(
            store,
            json.loads(annotations_path.read_text(encoding="utf-8")),
            pending=pending,
        )
    store.snapshot(store_dir / "snapshot.json")
    return store


def replay_annotation_set(store: AnnotationStore, doc: dict, pending: bool = False) -> None:
    if doc.get("schema") != "annotations/v1":
        raise FixtureError(f"not an annotation set (schema={doc.get('schema')!r})")
    for rater in doc.get("raters", ()):
        store.register_rater(rater)
    for ann in doc.get("annotations", ()):
        store.record_annotation(
            ann["rater"], ann["approach"], ann["label"], ann.get("flags", ()), ann.get("note", "")
        )
    if pending:
        return
    for completion in doc.get("completions", ()):
        store.mark_complete(completion["rater"], completion["approach"])
    for rec in doc.get("reconciliations", ()):
        store.reconcile(
            rec["approach"], rec["label"], rec.get("final_flags", ()), rec.get("note", "")
        )


def load_fixture_annotations_doc(source_dir: str | Path | None = None) -> dict:
    source = Path(source_dir) if source_dir else fixtures_dir()
    return json.loads((source / "annotations.json").read_text(encoding="utf-8"))
