"""Response grammars for the three coder outputs: payload types, renderers,
and parsers.

Renderers produce exactly the shape each template's output-format section
asks for, and the mock backend uses them, so parse(render(payload)) is an
identity on well-formed payloads. Parsers are lenient about surrounding
"===" fences and leading/trailing whitespace but strict about the fields the
pipelines depend on (a Label line, the numbered-line count).
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass

logger = logging.getLogger(__name__)


class ResponseParseError(ValueError):
    """A model response did not match the expected grammar."""

    def __init__(self, message: str, raw: str):
        self.raw = raw
        super().__init__(message)


class TagCountMismatchError(ResponseParseError):
    def __init__(self, got: int, expected: int, raw: str):
        self.got = got
        self.expected = expected
        super().__init__(f"tag-count mismatch (got {got}, expected {expected})", raw)


# --------------------------------------------------------------------------
# topic labeling: "=== Thought: ... Label: ... ==="
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class TopicResponse:
    thought: str
    label: str


def render_topic_response(payload: TopicResponse) -> str:
    return f"===\nThought: {payload.thought}\nLabel: {payload.label}\n==="


_LABEL_RE = re.compile(r"Label:\s*(.*?)\s*(?:===|\n|$)", re.S)
_THOUGHT_RE = re.compile(r"Thought:\s*(.*?)\s*(?=Label:|===|$)", re.S)


def parse_topic_response(text: str) -> TopicResponse:
    label_match = _LABEL_RE.search(text)
    if not label_match:
        raise ResponseParseError("response has no Label: line", text)
    label = label_match.group(1).strip()
    if not label:
        raise ResponseParseError("empty label", text)
    thought_match = _THOUGHT_RE.search(text)
    thought = thought_match.group(1).strip() if thought_match else ""
    return TopicResponse(thought=thought, label=label)


# --------------------------------------------------------------------------
# chunk codebook: "## Label: ... / Definition: ... / - "quote"" blocks
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class ChunkEntry:
    label: str
    definition: str
    quotes: tuple[str, ...]


@dataclass(frozen=True)
class ChunkCodebookResponse:
    entries: tuple[ChunkEntry, ...]


def render_chunk_response(payload: ChunkCodebookResponse) -> str:
    lines = ["==="]
    for entry in payload.entries:
        lines.append(f"## Label: {entry.label}")
        lines.append(f"Definition: {entry.definition}")
        for quote in entry.quotes:
            lines.append(f'- "{quote}"')
    lines.append("===")
    return "\n".join(lines)


def parse_chunk_response(text: str) -> ChunkCodebookResponse:
    """Parse "## Label:" blocks. Strict on labels, lenient on everything
    else: entries may have no definition and no quotes; a response with no
    parseable entries yields an empty result with a warning."""
    entries: list[ChunkEntry] = []
    label: str | None = None
    definition = ""
    quotes: list[str] = []

    def flush():
        nonlocal label, definition, quotes
        if label:
            entries.append(ChunkEntry(label=label, definition=definition, quotes=tuple(quotes)))
        label, definition, quotes = None, "", []

    for raw_line in text.splitlines():
        line = raw_line.strip()
        if line.startswith("##"):
            flush()
            body = line.lstrip("#").strip()
            if body.lower().startswith("label:"):
                body = body[len("label:"):].strip()
            if body and body != "...":
                label = body
            continue
        if line.lower().startswith("label:"):
            flush()
            body = line[len("label:"):].strip()
            if body:
                label = body
            continue
        if line.lower().startswith("definition:"):
            definition = line[len("definition:"):].strip()
            continue
        if line.startswith("-"):
            quote = line.lstrip("-").strip().strip('"').strip()
            if quote:
                quotes.append(quote)
    flush()
    if not entries and text.strip():
        logger.warning("chunk response yielded zero codebook entries")
    return ChunkCodebookResponse(entries=tuple(entries))


# --------------------------------------------------------------------------
# item tags: Thoughts / numbered tag lines / Summary / Notes
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class ItemTagResponse:
    thoughts: str
    tags_per_message: tuple[tuple[str, ...], ...]
    summary: str
    notes: str


_TAGS_HEADER_RE = re.compile(
    r"^(?:Tags|Interpretations) for each message \((\d+) in total\):\s*$"
)
_NUMBERED_RE = re.compile(r"^(\d+)[.)]\s*(.*)$")


def render_item_response(payload: ItemTagResponse, verb_phrases: bool = False) -> str:
    noun = "Interpretations" if verb_phrases else "Tags"
    n = len(payload.tags_per_message)
    lines = ["===", f"Thoughts: {payload.thoughts}", f"{noun} for each message ({n} in total):"]
    for i, tags in enumerate(payload.tags_per_message, start=1):
        lines.append(f"{i}. " + "; ".join(tags))
    lines.append(f"Summary: {payload.summary}")
    lines.append(f"Notes: {payload.notes}")
    lines.append("===")
    return "\n".join(lines)


def parse_item_response(text: str, expected_count: int) -> ItemTagResponse:
    """Parse the numbered tag-line response.

    Raises TagCountMismatchError when the number of numbered lines differs
    from the number of presented messages, and ResponseParseError when a
    line carries no tags after trimming.
    """
    thoughts_parts: list[str] = []
    summary_parts: list[str] = []
    notes_parts: list[str] = []
    numbered: list[str] = []
    section = None
    for raw_line in text.splitlines():
        line = raw_line.strip()
        if line == "===":
            continue
        if line.startswith("Thoughts:"):
            section = "thoughts"
            thoughts_parts.append(line[len("Thoughts:"):].strip())
            continue
        if _TAGS_HEADER_RE.match(line):
            section = "tags"
            continue
        if line.startswith("Summary:"):
            section = "summary"
            summary_parts.append(line[len("Summary:"):].strip())
            continue
        if line.startswith("Notes:"):
            section = "notes"
            notes_parts.append(line[len("Notes:"):].strip())
            continue
        if section == "tags":
            m = _NUMBERED_RE.match(line)
            if m:
                numbered.append(m.group(2))
            continue
        if section == "thoughts" and line:
            thoughts_parts.append(line)
        elif section == "summary" and line:
            summary_parts.append(line)
        elif section == "notes" and line:
            notes_parts.append(line)
    if len(numbered) != expected_count:
        raise TagCountMismatchError(len(numbered), expected_count, text)
    tags_per_message: list[tuple[str, ...]] = []
    for i, body in enumerate(numbered, start=1):
        tags = tuple(t.strip() for t in body.split(";") if t.strip())
        if not tags:
            raise ResponseParseError(f"message {i} has zero tags", text)
        tags_per_message.append(tags)
    return ItemTagResponse(
        thoughts=" ".join(p for p in thoughts_parts if p),
        tags_per_message=tuple(tags_per_message),
        summary=" ".join(p for p in summary_parts if p),
        notes=" ".join(p for p in notes_parts if p),
    )
