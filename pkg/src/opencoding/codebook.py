"""Codebook aggregation: label normalization, exact-match merge, export.

Raw code instances from any approach are grouped by normalized label only —
case, punctuation, and whitespace are folded, but no stemming or synonym
folding happens, so "resource sharing" and "sharing resources" stay separate
codes. The merge is order-insensitive: instances are canonically sorted
before folding, so permuting per-chunk results yields an identical codebook.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from pathlib import Path

from .corpus import Dataset, parse_message_id

APPROACHES = ("topic", "chunk", "item", "verb")
KNOWN_SOURCES = APPROACHES + ("human",)

CODEBOOK_SCHEMA = "codebook/v1"


class LabelEmptyError(ValueError):
    def __init__(self, raw: str):
        super().__init__(f"label empty after normalization: {raw!r}")


_NON_ALNUM_RE = re.compile(r"[^a-z0-9]+")


def normalize_label(raw: str) -> str:
    """Lowercase, punctuation to spaces, whitespace collapsed and trimmed."""
    text = _NON_ALNUM_RE.sub(" ", raw.lower()).strip()
    text = re.sub(r"\s+", " ", text)
    if not text:
        raise LabelEmptyError(raw)
    return text


@dataclass(frozen=True)
class CodeExample:
    message_id: str
    speaker_role: str
    content: str


@dataclass(frozen=True)
class Code:
    normalized_label: str
    display_label: str
    definition: str | None
    examples: tuple[CodeExample, ...]
    approach: str
    source_indices: tuple[int, ...]
    verb_nonconforming: bool = False


@dataclass(frozen=True)
class Codebook:
    approach: str
    codes: tuple[Code, ...]
    backend: str = ""
    seed: int | None = None
    config_digest: str = ""

    def __post_init__(self):
        if self.approach not in KNOWN_SOURCES:
            raise ValueError(f"unknown approach: {self.approach!r}")
        labels = [c.normalized_label for c in self.codes]
        if len(labels) != len(set(labels)):
            raise ValueError("duplicate normalized labels in codebook")

    def __len__(self) -> int:
        return len(self.codes)

    def by_label(self, normalized: str) -> Code:
        for code in self.codes:
            if code.normalized_label == normalized:
                return code
        raise KeyError(normalized)

    def labels(self) -> list[str]:
        return [c.normalized_label for c in self.codes]


@dataclass(frozen=True)
class RawInstance:
    """One emitted code occurrence, before merging."""

    raw_label: str
    source_index: int  # chunk index, or cluster index for the topic approach
    message_ids: tuple[str, ...] = ()
    definition: str | None = None


def merge(
    instances: list[RawInstance],
    approach: str,
    dataset: Dataset,
    verb_lexicon: frozenset[str] | None = None,
    backend: str = "",
    seed: int | None = None,
    config_digest: str = "",
) -> Codebook:
    """Fold raw instances into one codebook under the exact-label rule.

    Examples are unioned and de-duplicated by message id; the definition is
    the first non-empty one in canonical order; the display label is the
    first-seen raw spelling under canonical (source index, position) order.
    """
    canonical = sorted(
        instances,
        key=lambda i: (i.source_index, i.raw_label, i.message_ids, i.definition or ""),
    )
    groups: dict[str, list[RawInstance]] = {}
    for inst in canonical:
        key = normalize_label(inst.raw_label)
        groups.setdefault(key, []).append(inst)
    codes: list[Code] = []
    for normalized in sorted(groups):
        members = groups[normalized]
        display = members[0].raw_label
        definition = next((m.definition for m in members if m.definition), None)
        seen_ids: set[str] = set()
        example_ids: list[str] = []
        for m in members:
            for mid in m.message_ids:
                if mid not in seen_ids:
                    seen_ids.add(mid)
                    example_ids.append(mid)
        example_ids.sort(key=parse_message_id)
        examples = tuple(
            CodeExample(
                message_id=mid,
                speaker_role=dataset.by_id(mid).speaker_role,
                content=dataset.by_id(mid).content,
            )
            for mid in example_ids
        )
        nonconforming = False
        if approach == "verb" and verb_lexicon is not None:
            nonconforming = not check_verb_phrase(normalized, verb_lexicon)
        codes.append(
            Code(
                normalized_label=normalized,
                display_label=display,
                definition=definition,
                examples=examples,
                approach=approach,
                source_indices=tuple(sorted({m.source_index for m in members})),
                verb_nonconforming=nonconforming,
            )
        )
    return Codebook(
        approach=approach,
        codes=tuple(codes),
        backend=backend,
        seed=seed,
        config_digest=config_digest,
    )


def check_verb_phrase(label: str, verb_lexicon: frozenset[str]) -> bool:
    """Conforming iff the label's first token is a known verb base form."""
    normalized = normalize_label(label)
    first = normalized.split(" ", 1)[0]
    return first in verb_lexicon


_VERB_LEXICON_CACHE: frozenset[str] | None = None


def load_verb_lexicon() -> frozenset[str]:
    global _VERB_LEXICON_CACHE
    if _VERB_LEXICON_CACHE is None:
        path = Path(__file__).parent / "data" / "verbs.txt"
        words = {
            line.strip()
            for line in path.read_text(encoding="utf-8").splitlines()
            if line.strip() and not line.startswith("#")
        }
        _VERB_LEXICON_CACHE = frozenset(words)
    return _VERB_LEXICON_CACHE


# --------------------------------------------------------------------------
# export / import
# --------------------------------------------------------------------------


def codebook_to_doc(codebook: Codebook) -> dict:
    return {
        "schema": CODEBOOK_SCHEMA,
        "approach": codebook.approach,
        "codes": [
            {
                "label": c.display_label,
                "normalized": c.normalized_label,
                "definition": c.definition,
                "examples": [
                    {"id": e.message_id, "role": e.speaker_role, "content": e.content}
                    for e in c.examples
                ],
                "provenance": {"approach": c.approach, "sources": list(c.source_indices)},
                "flags": {"verb_nonconforming": c.verb_nonconforming},
            }
            for c in codebook.codes
        ],
        "run": {
            "backend": codebook.backend,
            "seed": codebook.seed,
            "config_digest": codebook.config_digest,
        },
    }


def codebook_from_doc(doc: dict) -> Codebook:
    if doc.get("schema") != CODEBOOK_SCHEMA:
        raise ValueError(f"not a codebook document (schema={doc.get('schema')!r})")
    approach = doc["approach"]
    codes = tuple(
        Code(
            normalized_label=c["normalized"],
            display_label=c["label"],
            definition=c.get("definition"),
            examples=tuple(
                CodeExample(message_id=e["id"], speaker_role=e["role"], content=e["content"])
                for e in c.get("examples", ())
            ),
            approach=c.get("provenance", {}).get("approach", approach),
            source_indices=tuple(c.get("provenance", {}).get("sources", ())),
            verb_nonconforming=c.get("flags", {}).get("verb_nonconforming", False),
        )
        for c in doc["codes"]
    )
    run = doc.get("run", {})
    return Codebook(
        approach=approach,
        codes=codes,
        backend=run.get("backend", ""),
        seed=run.get("seed"),
        config_digest=run.get("config_digest", ""),
    )


def save_codebook(codebook: Codebook, path: str | Path) -> None:
    Path(path).write_text(
        json.dumps(codebook_to_doc(codebook), ensure_ascii=False, indent=1, sort_keys=True) + "\n",
        encoding="utf-8",
    )


def load_codebook(path: str | Path) -> Codebook:
    return codebook_from_doc(json.loads(Path(path).read_text(encoding="utf-8")))


def render_table_doc(codebook: Codebook) -> str:
    """Two-column label/examples table with "● id: role: content" bullets."""
    lines = ["| Label | Examples |", "| --- | --- |"]
    for code in codebook.codes:
        bullets = "<br>".join(
            f"● {e.message_id}: {e.speaker_role}: " + e.content.replace("|", "\\|").replace("\n", " ")
            for e in code.examples
        )
        label = code.display_label.replace("|", "\\|")
        if code.definition:
            label = f"{label}<br>*{code.definition}*"
        lines.append(f"| {label} | {bullets} |")
    return "\n".join(lines) + "\n"


def export_codebook(codebook: Codebook, fmt: str) -> str:
    """Render as "table" (markdown table doc) or "structured" (lossless JSON)."""
    if fmt in ("table", "table-doc"):
        return render_table_doc(codebook)
    if fmt == "structured":
        return json.dumps(codebook_to_doc(codebook), ensure_ascii=False, indent=1, sort_keys=True) + "\n"
    raise ValueError(f"unknown export format: {fmt!r}")
