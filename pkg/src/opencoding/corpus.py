"""Dataset ingestion and the message/dataset model.

Input is either a delimited file (comma or tab, header row with id, speaker,
time, content) or line-delimited JSON records with the same keys. Timestamps
in the source data carry no year ("11/06 10:04"), so ingestion takes an
explicit base year and rolls over to the next year whenever the month
sequence decreases.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import re
from dataclasses import dataclass
from datetime import date, datetime
from pathlib import Path

logger = logging.getLogger(__name__)

ROLE_DESIGNER = "Designer"
ROLE_USER = "User"

MEDIA_MARKERS = ("Image", "Emoji", "Figure")
_MEDIA_RE = re.compile(r"\[(Image|Emoji|Figure)\]")

_ID_RE = re.compile(r"^(\d+)-(\d+)$")
_SHORT_TIME_RE = re.compile(r"^(\d{1,2})/(\d{1,2})\s+(\d{1,2}):(\d{2})$")


class IngestError(ValueError):
    """Raised for malformed input files; carries the offending line number."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


def parse_message_id(message_id: str) -> tuple[int, int]:
    """Split "<session>-<index>" into its numeric sort key."""
    m = _ID_RE.match(message_id)
    if not m:
        raise ValueError(f"malformed message id: {message_id!r}")
    return int(m.group(1)), int(m.group(2))


@dataclass(frozen=True)
class Message:
    id: str
    speaker_role: str  # ROLE_DESIGNER or ROLE_USER
    speaker_alias: str | None
    timestamp: datetime
    content: str
    media_markers: tuple[str, ...] = ()

    def render(self) -> str:
        """The "id: role: content" form used in prompts and exports."""
        return f"{self.id}: {self.speaker_role}: {self.content}"


@dataclass(frozen=True)
class Dataset:
    messages: tuple[Message, ...]
    research_question: str = ""
    coding_notes: str = ""
    language_note: str = ""
    date_range: tuple[date, date] | None = None

    def __post_init__(self):
        seen: set[str] = set()
        prev: Message | None = None
        for msg in self.messages:
            if msg.id in seen:
                raise ValueError(f"duplicate message id: {msg.id}")
            seen.add(msg.id)
            if prev is not None and msg.timestamp < prev.timestamp:
                raise ValueError(
                    f"out-of-order timestamps: {prev.id} ({prev.timestamp}) "
                    f"followed by {msg.id} ({msg.timestamp})"
                )
            if not msg.content and not msg.media_markers:
                raise ValueError(f"message {msg.id} has empty content and no media markers")
            prev = msg

    def __len__(self) -> int:
        return len(self.messages)

    def by_id(self, message_id: str) -> Message:
        return self._index()[message_id]

    def _index(self) -> dict[str, Message]:
        # frozen dataclass: cache on first use
        cached = getattr(self, "_id_index", None)
        if cached is None:
            cached = {m.id: m for m in self.messages}
            object.__setattr__(self, "_id_index", cached)
        return cached

    def ids(self) -> list[str]:
        return [m.id for m in self.messages]


def extract_media_markers(content: str) -> tuple[str, ...]:
    """Bracketed media placeholders, in order of appearance (repeats kept)."""
    return tuple(_MEDIA_RE.findall(content))


def _role_and_alias(speaker: str) -> tuple[str, str | None]:
    speaker = speaker.strip()
    if speaker == ROLE_DESIGNER:
        return ROLE_DESIGNER, None
    if speaker == ROLE_USER:
        return ROLE_USER, None
    return ROLE_USER, speaker


class _TimestampParser:
    """Parses minute-precision times, tracking year rollover across records."""

    def __init__(self, base_year: int):
        self.year = base_year
        self.prev_month: int | None = None

    def parse(self, raw: str, line: int) -> datetime:
        raw = raw.strip()
        m = _SHORT_TIME_RE.match(raw)
        if m:
            month, day, hour, minute = (int(g) for g in m.groups())
            if self.prev_month is not None and month < self.prev_month:
                self.year += 1
            self.prev_month = month
            try:
                return datetime(self.year, month, day, hour, minute)
            except ValueError as exc:
                raise IngestError(f"malformed timestamp {raw!r}: {exc}", line) from None
        try:
            ts = datetime.fromisoformat(raw)
        except ValueError:
            raise IngestError(f"malformed timestamp {raw!r}", line) from None
        self.prev_month = ts.month
        return ts.replace(second=0, microsecond=0)


def _iter_records(path: Path) -> list[tuple[int, dict]]:
    """Yield (line_number, record) pairs from a delimited or JSONL file."""
    text = path.read_text(encoding="utf-8")
    if not text.strip():
        return []
    first = text.lstrip().splitlines()[0]
    records: list[tuple[int, dict]] = []
    if first.startswith("{"):
        for lineno, line in enumerate(text.splitlines(), start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise IngestError(f"invalid JSON record: {exc.msg}", lineno) from None
            records.append((lineno, rec))
        return records
    delimiter = "\t" if "\t" in first else ","
    reader = csv.DictReader(io.StringIO(text), delimiter=delimiter)
    for lineno, rec in enumerate(reader, start=2):
        records.append((lineno, rec))
    return records


REQUIRED_FIELDS = ("id", "speaker", "time", "content")


def ingest_dataset(
    path: str | Path,
    base_year: int,
    research_question: str = "",
    coding_notes: str = "",
    language_note: str = "",
) -> Dataset:
    """Parse a source file into a Dataset, in file order.

    Raises IngestError on malformed records (with line numbers), duplicate
    ids, or timestamps that go backwards. An empty file yields an empty
    Dataset with a warning.
    """
    path = Path(path)
    if not path.exists():
        raise IngestError(f"no such file: {path}")
    rows = _iter_records(path)
    if not rows:
        logger.warning("%s: 0 messages", path)
        return Dataset(
            messages=(),
            research_question=research_question,
            coding_notes=coding_notes,
            language_note=language_note,
        )
    clock = _TimestampParser(base_year)
    messages: list[Message] = []
    seen: set[str] = set()
    for lineno, rec in rows:
        missing = [f for f in REQUIRED_FIELDS if rec.get(f) is None]
        if missing:
            raise IngestError(f"record missing fields: {', '.join(missing)}", lineno)
        message_id = str(rec["id"]).strip()
        try:
            parse_message_id(message_id)
        except ValueError as exc:
            raise IngestError(str(exc), lineno) from None
        if message_id in seen:
            raise IngestError(f"duplicate message id: {message_id}", lineno)
        seen.add(message_id)
        content = str(rec["content"])
        role, alias = _role_and_alias(str(rec["speaker"]))
        ts = clock.parse(str(rec["time"]), lineno)
        if messages and ts < messages[-1].timestamp:
            raise IngestError(
                f"out-of-order timestamps: {messages[-1].id} "
                f"({messages[-1].timestamp}) followed by {message_id} ({ts})",
                lineno,
            )
        messages.append(
            Message(
                id=message_id,
                speaker_role=role,
                speaker_alias=alias,
                timestamp=ts,
                content=content,
                media_markers=extract_media_markers(content),
            )
        )
    dataset = Dataset(
        messages=tuple(messages),
        research_question=research_question,
        coding_notes=coding_notes,
        language_note=language_note,
        date_range=(messages[0].timestamp.date(), messages[-1].timestamp.date()),
    )
    logger.info("%s: %d messages", path, len(dataset))
    return dataset


# --------------------------------------------------------------------------
# dataset document (the self-describing artifact written by `ingest --out`)
# --------------------------------------------------------------------------

DATASET_SCHEMA = "dataset/v1"


def dataset_to_doc(dataset: Dataset) -> dict:
    return {
        "schema": DATASET_SCHEMA,
        "research_question": dataset.research_question,
        "coding_notes": dataset.coding_notes,
        "language_note": dataset.language_note,
        "date_range": [d.isoformat() for d in dataset.date_range] if dataset.date_range else None,
        "messages": [
            {
                "id": m.id,
                "speaker_role": m.speaker_role,
                "speaker_alias": m.speaker_alias,
                "timestamp": m.timestamp.isoformat(timespec="minutes"),
                "content": m.content,
                "media_markers": list(m.media_markers),
            }
            for m in dataset.messages
        ],
    }


def dataset_from_doc(doc: dict) -> Dataset:
    if doc.get("schema") != DATASET_SCHEMA:
        raise ValueError(f"not a dataset document (schema={doc.get('schema')!r})")
    messages = tuple(
        Message(
            id=m["id"],
            speaker_role=m["speaker_role"],
            speaker_alias=m.get("speaker_alias"),
            timestamp=datetime.fromisoformat(m["timestamp"]),
            content=m["content"],
            media_markers=tuple(m.get("media_markers", ())),
        )
        for m in doc["messages"]
    )
    date_range = None
    if doc.get("date_range"):
        date_range = (date.fromisoformat(doc["date_range"][0]), date.fromisoformat(doc["date_range"][1]))
    return Dataset(
        messages=messages,
        research_question=doc.get("research_question", ""),
        coding_notes=doc.get("coding_notes", ""),
        language_note=doc.get("language_note", ""),
        date_range=date_range,
    )


def save_dataset(dataset: Dataset, path: str | Path) -> None:
    Path(path).write_text(
        json.dumps(dataset_to_doc(dataset), ensure_ascii=False, indent=1) + "\n",
        encoding="utf-8",
    )


def load_dataset(path: str | Path) -> Dataset:
    return dataset_from_doc(json.loads(Path(path).read_text(encoding="utf-8")))
