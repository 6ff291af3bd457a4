"""Conversation segmentation and context-window attachment.

Two methods are provided. ``gap_threshold`` places a boundary between two
consecutive messages whenever their time gap strictly exceeds ``min_gap``
(a gap exactly equal to the threshold does not split). ``smoothed_activity``
smooths the message-time event series with a Gaussian kernel and places
boundaries at local minima of the resulting rate signal whose value falls
below half the mean of the neighboring peaks. In both methods, chunks
smaller than ``min_chunk_size`` are merged backward into the previous chunk.

Every chunk then gains up to three messages of leading context (the previous
chunk's tail) and trailing context (the next chunk's head).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

from .corpus import Dataset

GAP_THRESHOLD = "gap_threshold"
SMOOTHED_ACTIVITY = "smoothed_activity"

DEFAULT_MIN_GAP_MINUTES = 180.0
DEFAULT_CONTEXT = 3


@dataclass(frozen=True)
class SegmentationConfig:
    method: str = GAP_THRESHOLD
    min_gap_minutes: float = DEFAULT_MIN_GAP_MINUTES
    kernel_bandwidth_minutes: float = 30.0
    min_chunk_size: int = 3

    def validate(self) -> None:
        if self.method not in (GAP_THRESHOLD, SMOOTHED_ACTIVITY):
            raise ValueError(f"unknown segmentation method: {self.method!r}")
        if self.min_gap_minutes <= 0:
            raise ValueError("min_gap must be positive")
        if self.kernel_bandwidth_minutes <= 0:
            raise ValueError("kernel_bandwidth must be positive")
        if self.min_chunk_size < 1:
            raise ValueError("min_chunk_size must be at least 1")


@dataclass(frozen=True)
class Chunk:
    index: int
    core_ids: tuple[str, ...]
    leading_context_ids: tuple[str, ...] = ()
    trailing_context_ids: tuple[str, ...] = ()

    def presented_ids(self) -> tuple[str, ...]:
        """All message ids shown to a coder, context included, in order."""
        return self.leading_context_ids + self.core_ids + self.trailing_context_ids


def _minutes(dataset: Dataset) -> list[float]:
    t0 = dataset.messages[0].timestamp
    return [(m.timestamp - t0).total_seconds() / 60.0 for m in dataset.messages]


def _gap_boundaries(times: list[float], min_gap: float) -> list[int]:
    """Indices i such that a boundary falls between message i-1 and i."""
    return [i for i in range(1, len(times)) if times[i] - times[i - 1] > min_gap]


def _activity_boundaries(times: list[float], bandwidth: float) -> list[int]:
    if len(times) < 2:
        return []
    start, end = times[0], times[-1]
    n_grid = int(end - start) + 1
    grid = [start + g for g in range(n_grid)]
    inv = 1.0 / (2.0 * bandwidth * bandwidth)
    rate = [sum(math.exp(-((g - t) ** 2) * inv) for t in times) for g in grid]
    # interior local extrema; plateaus resolve to their first grid point
    minima: list[int] = []
    maxima: list[int] = []
    for i in range(1, len(rate) - 1):
        if rate[i] < rate[i - 1] and rate[i] <= rate[i + 1]:
            minima.append(i)
        elif rate[i] > rate[i - 1] and rate[i] >= rate[i + 1]:
            maxima.append(i)
    boundaries: list[int] = []
    for mi in minima:
        left_peaks = [p for p in maxima if p < mi]
        right_peaks = [p for p in maxima if p > mi]
        if not left_peaks or not right_peaks:
            continue
        peak_mean = (rate[left_peaks[-1]] + rate[right_peaks[0]]) / 2.0
        if rate[mi] >= 0.5 * peak_mean:
            continue
        cut_time = grid[mi]
        idx = next((k for k, t in enumerate(times) if t > cut_time), None)
        if idx is not None and idx > 0:
            boundaries.append(idx)
    return sorted(set(boundaries))


def _merge_runts(spans: list[list[str]], min_size: int) -> list[list[str]]:
    merged: list[list[str]] = []
    for span in spans:
        if merged and len(span) < min_size:
            merged[-1].extend(span)
        else:
            merged.append(list(span))
    return merged


def segment(dataset: Dataset, config: SegmentationConfig | None = None) -> list[Chunk]:
    """Partition a dataset into chunks. Empty dataset yields an empty list."""
    config = config or SegmentationConfig()
    config.validate()
    if not dataset.messages:
        return []
    times = _minutes(dataset)
    if config.method == GAP_THRESHOLD:
        boundaries = _gap_boundaries(times, config.min_gap_minutes)
    else:
        boundaries = _activity_boundaries(times, config.kernel_bandwidth_minutes)
    ids = dataset.ids()
    spans: list[list[str]] = []
    prev = 0
    for b in boundaries:
        spans.append(ids[prev:b])
        prev = b
    spans.append(ids[prev:])
    spans = _merge_runts(spans, config.min_chunk_size)
    return [Chunk(index=i, core_ids=tuple(span)) for i, span in enumerate(spans)]


def attach_context(chunks: list[Chunk], k: int = DEFAULT_CONTEXT) -> list[Chunk]:
    """Attach up to ``k`` leading/trailing context ids from adjacent chunks."""
    if k < 0:
        raise ValueError("context size must be non-negative")
    out: list[Chunk] = []
    for i, chunk in enumerate(chunks):
        leading: tuple[str, ...] = ()
        trailing: tuple[str, ...] = ()
        if i > 0:
            prev_core = chunks[i - 1].core_ids
            leading = prev_core[-min(k, len(prev_core)):] if k else ()
        if i < len(chunks) - 1:
            next_core = chunks[i + 1].core_ids
            trailing = next_core[: min(k, len(next_core))]
        out.append(replace(chunk, leading_context_ids=leading, trailing_context_ids=trailing))
    return out


# --------------------------------------------------------------------------
# chunks document
# --------------------------------------------------------------------------

CHUNKS_SCHEMA = "chunks/v1"


def chunks_to_doc(chunks: list[Chunk], config: SegmentationConfig) -> dict:
    return {
        "schema": CHUNKS_SCHEMA,
        "config": {
            "method": config.method,
            "min_gap_minutes": config.min_gap_minutes,
            "kernel_bandwidth_minutes": config.kernel_bandwidth_minutes,
            "min_chunk_size": config.min_chunk_size,
        },
        "chunks": [
            {
                "index": c.index,
                "core_ids": list(c.core_ids),
                "leading_context_ids": list(c.leading_context_ids),
                "trailing_context_ids": list(c.trailing_context_ids),
            }
            for c in chunks
        ],
    }


def chunks_from_doc(doc: dict) -> list[Chunk]:
    if doc.get("schema") != CHUNKS_SCHEMA:
        raise ValueError(f"not a chunks document (schema={doc.get('schema')!r})")
    return [
        Chunk(
            index=c["index"],
            core_ids=tuple(c["core_ids"]),
            leading_context_ids=tuple(c.get("leading_context_ids", ())),
            trailing_context_ids=tuple(c.get("trailing_context_ids", ())),
        )
        for c in doc["chunks"]
    ]
