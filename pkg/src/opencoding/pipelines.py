"""The three prompt-driven coders: chunk-level codebooks, item-level
multi-tag coding, and its verb-phrase variant.

A chunk is presented with its context messages inline, each context line
marked "[context]". Messages.length counts every presented message (context
included) to honor the output template, but tags emitted for context
messages are discarded from aggregation afterwards, so each message is coded
by exactly one chunk. Item-level runs carry a running summary/notes pair
from one chunk's response into the next chunk's user prompt; nothing else
from prior outputs reaches later prompts.
"""

from __future__ import annotations

from dataclasses import dataclass

from .codebook import RawInstance
from .corpus import Dataset, Message
from .gateway import ChatExchange, Gateway
from .prompts import CHUNK_CODEBOOK, ITEM_TAGS, VERB_PHRASE_TAGS
from .responses import (
    ChunkCodebookResponse,
    ItemTagResponse,
    parse_chunk_response,
    parse_item_response,
)
from .segmenter import Chunk


class PipelineError(RuntimeError):
    pass


@dataclass(frozen=True)
class CarryState:
    """Summary/notes carried from one chunk's response to the next prompt."""

    summary: str = ""
    notes: str = ""

    def is_empty(self) -> bool:
        return not self.summary and not self.notes


def presented_messages(chunk: Chunk, dataset: Dataset) -> list[Message]:
    return [dataset.by_id(mid) for mid in chunk.presented_ids()]


def format_conversation(chunk: Chunk, dataset: Dataset) -> str:
    """Render the presented messages, context lines marked "[context]"."""
    core = set(chunk.core_ids)
    lines = []
    for mid in chunk.presented_ids():
        message = dataset.by_id(mid)
        prefix = "" if mid in core else "[context] "
        lines.append(prefix + message.render())
    return "\n".join(lines)


def _require_research_question(dataset: Dataset) -> None:
    if not dataset.research_question.strip():
        raise PipelineError("dataset has no research question; pipelines need one")


def run_chunk_level(
    chunk: Chunk, dataset: Dataset, gateway: Gateway
) -> tuple[ChunkCodebookResponse, ChatExchange]:
    """One chunk-codebook request: render, complete, parse label blocks."""
    _require_research_question(dataset)
    exchange = gateway.complete(
        CHUNK_CODEBOOK,
        {
            "ResearchQuestion": dataset.research_question,
            "CodingNotes": dataset.coding_notes,
            "Conversation": format_conversation(chunk, dataset),
        },
    )
    return parse_chunk_response(exchange.response_text), exchange


def run_item_level(
    chunk: Chunk,
    dataset: Dataset,
    gateway: Gateway,
    carry: CarryState,
    use_verb_phrases: bool = False,
) -> tuple[ItemTagResponse, CarryState, ChatExchange]:
    """One item-level request; returns the parsed tags and the new carry."""
    _require_research_question(dataset)
    template = VERB_PHRASE_TAGS if use_verb_phrases else ITEM_TAGS
    conversation = format_conversation(chunk, dataset)
    if not carry.is_empty():
        preamble = f"Previous summary: {carry.summary}\nPrevious notes: {carry.notes}\n\n"
        conversation = preamble + conversation
    n_presented = len(chunk.presented_ids())
    exchange = gateway.complete(
        template,
        {
            "ResearchQuestion": dataset.research_question,
            "CodingNotes": dataset.coding_notes,
            "Messages.length": str(n_presented),
            "Conversation": conversation,
        },
    )
    parsed = parse_item_response(exchange.response_text, expected_count=n_presented)
    return parsed, CarryState(summary=parsed.summary, notes=parsed.notes), exchange


# --------------------------------------------------------------------------
# raw instances for aggregation
# --------------------------------------------------------------------------


def instances_from_chunk_response(
    response: ChunkCodebookResponse, chunk: Chunk, dataset: Dataset
) -> list[RawInstance]:
    """Map each entry's quotes back to core message ids. A quote maps to the
    first core message whose content contains it; quotes matching nothing
    are dropped (quotes are parsed leniently, labels strictly)."""
    core = [dataset.by_id(mid) for mid in chunk.core_ids]
    instances = []
    for entry in response.entries:
        matched: list[str] = []
        for quote in entry.quotes:
            needle = quote.strip().strip('"')
            hit = next((m.id for m in core if needle and needle in m.content), None)
            if hit and hit not in matched:
                matched.append(hit)
        instances.append(
            RawInstance(
                raw_label=entry.label,
                source_index=chunk.index,
                message_ids=tuple(matched),
                definition=entry.definition or None,
            )
        )
    return instances


def instances_from_item_response(
    response: ItemTagResponse, chunk: Chunk, dataset: Dataset
) -> list[RawInstance]:
    """One instance per (core message, tag); context-message tags discarded."""
    presented = chunk.presented_ids()
    if len(response.tags_per_message) != len(presented):
        raise PipelineError(
            f"response covers {len(response.tags_per_message)} messages, "
            f"chunk presents {len(presented)}"
        )
    core = set(chunk.core_ids)
    instances = []
    for mid, tags in zip(presented, response.tags_per_message):
        if mid not in core:
            continue
        for tag in tags:
            instances.append(
                RawInstance(raw_label=tag, source_index=chunk.index, message_ids=(mid,))
            )
    return instances
