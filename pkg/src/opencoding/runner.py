"""Approach runners: execute a coding approach over a segmented dataset and
write deterministic response/codebook artifacts plus a run manifest.

Artifact JSON is serialized with sorted keys and no timestamps, so two runs
with the same dataset, config, backend, and seed are byte-identical (the
manifest, which does carry timestamps, is the one exception).
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

from . import codebook as cb
from . import pipelines, topic
from .corpus import Dataset, dataset_to_doc
from .gateway import Gateway
from .segmenter import Chunk, SegmentationConfig, attach_context, segment

RESPONSES_SCHEMA = "responses/v1"
MANIFEST_SCHEMA = "manifest/v1"


@dataclass(frozen=True)
class TopicConfig:
    distance_threshold: float = topic.DEFAULT_DISTANCE_THRESHOLD
    top_k: int = topic.DEFAULT_TOP_K
    oversize_ratio: float = topic.DEFAULT_OVERSIZE_RATIO
    embedder: str = "tfidf"


def _canonical(doc: dict) -> str:
    return json.dumps(doc, sort_keys=True, ensure_ascii=False, indent=1) + "\n"


def digest(doc: dict) -> str:
    return hashlib.sha256(_canonical(doc).encode("utf-8")).hexdigest()


def dataset_digest(dataset: Dataset) -> str:
    return digest(dataset_to_doc(dataset))


# --------------------------------------------------------------------------
# per-approach runs
# --------------------------------------------------------------------------


def _make_embedder(name: str):
    if name == "tfidf":
        return topic.TfidfEmbedder()
    if name == "remote":
        return topic.RemoteEmbedder()
    raise ValueError(f"unknown embedder: {name!r}")


def run_topic(dataset: Dataset, gateway: Gateway, config: TopicConfig) -> dict:
    messages = list(dataset.messages)
    embeddings = topic.embed(messages, embedder=_make_embedder(config.embedder))
    clusters = topic.cluster(
        embeddings, config.distance_threshold, oversize_ratio=config.oversize_ratio
    )
    by_id = {m.id: m for m in messages}
    clusters = topic.ctfidf_keywords(clusters, by_id, top_k=config.top_k)
    labeled = []
    for cluster in clusters:
        labeled.append(
            topic.label_topic(
                cluster, gateway, by_id, dataset.research_question, dataset.coding_notes
            )
        )
    return {
        "schema": RESPONSES_SCHEMA,
        "approach": "topic",
        "clusters": [
            {
                "index": c.index,
                "member_ids": list(c.member_ids),
                "keywords": [[t, w] for t, w in c.keywords],
                "thought": c.thought,
                "label": c.label,
                "oversize_flag": c.oversize_flag,
            }
            for c in labeled
        ],
    }


def run_chunk(dataset: Dataset, chunks: list[Chunk], gateway: Gateway) -> dict:
    out = []
    for chunk in chunks:
        parsed, exchange = pipelines.run_chunk_level(chunk, dataset, gateway)
        out.append(
            {
                "index": chunk.index,
                "core_ids": list(chunk.core_ids),
                "presented_ids": list(chunk.presented_ids()),
                "raw": exchange.response_text,
                "parsed": {
                    "entries": [
                        {
                            "label": e.label,
                            "definition": e.definition,
                            "quotes": list(e.quotes),
                        }
                        for e in parsed.entries
                    ]
                },
            }
        )
    return {"schema": RESPONSES_SCHEMA, "approach": "chunk", "chunks": out}


def run_item(
    dataset: Dataset,
    chunks: list[Chunk],
    gateway: Gateway,
    use_verb_phrases: bool = False,
    carry_enabled: bool = True,
) -> dict:
    # carry makes this inherently sequential in chunk order
    carry = pipelines.CarryState()
    out = []
    for chunk in chunks:
        parsed, new_carry, exchange = pipelines.run_item_level(
            chunk, dataset, gateway, carry, use_verb_phrases=use_verb_phrases
        )
        if carry_enabled:
            carry = new_carry
        out.append(
            {
                "index": chunk.index,
                "core_ids": list(chunk.core_ids),
                "presented_ids": list(chunk.presented_ids()),
                "raw": exchange.response_text,
                "parsed": {
                    "thoughts": parsed.thoughts,
                    "tags_per_message": [list(t) for t in parsed.tags_per_message],
                    "summary": parsed.summary,
                    "notes": parsed.notes,
                },
            }
        )
    return {
        "schema": RESPONSES_SCHEMA,
        "approach": "verb" if use_verb_phrases else "item",
        "carry": carry_enabled,
        "chunks": out,
    }


# --------------------------------------------------------------------------
# aggregation: responses document -> codebook
# --------------------------------------------------------------------------


def _chunk_from_record(record: dict) -> Chunk:
    core = list(record["core_ids"])
    presented = list(record.get("presented_ids", core))
    first = presented.index(core[0])
    last = presented.index(core[-1])
    return Chunk(
        index=record["index"],
        core_ids=tuple(core),
        leading_context_ids=tuple(presented[:first]),
        trailing_context_ids=tuple(presented[last + 1 :]),
    )


def instances_from_responses(doc: dict, dataset: Dataset) -> list[cb.RawInstance]:
    if doc.get("schema") != RESPONSES_SCHEMA:
        raise ValueError(f"not a responses document (schema={doc.get('schema')!r})")
    approach = doc["approach"]
    instances: list[cb.RawInstance] = []
    if approach == "topic":
        for cl in doc["clusters"]:
            instances.append(
                cb.RawInstance(
                    raw_label=cl["label"],
                    source_index=cl["index"],
                    message_ids=tuple(cl["member_ids"]),
                )
            )
        return instances
    from .responses import ChunkCodebookResponse, ChunkEntry, ItemTagResponse

    for record in doc["chunks"]:
        chunk = _chunk_from_record(record)
        if approach == "chunk":
            parsed = ChunkCodebookResponse(
                entries=tuple(
                    ChunkEntry(
                        label=e["label"],
                        definition=e.get("definition") or "",
                        quotes=tuple(e.get("quotes", ())),
                    )
                    for e in record["parsed"]["entries"]
                )
            )
            instances.extend(pipelines.instances_from_chunk_response(parsed, chunk, dataset))
        elif approach in ("item", "verb"):
            parsed = ItemTagResponse(
                thoughts=record["parsed"].get("thoughts", ""),
                tags_per_message=tuple(
                    tuple(tags) for tags in record["parsed"]["tags_per_message"]
                ),
                summary=record["parsed"].get("summary", ""),
                notes=record["parsed"].get("notes", ""),
            )
            instances.extend(pipelines.instances_from_item_response(parsed, chunk, dataset))
        else:
            raise ValueError(f"unknown approach in responses document: {approach!r}")
    return instances


def aggregate_responses(
    doc: dict,
    dataset: Dataset,
    backend: str = "",
    seed: int | None = None,
    config_digest: str = "",
) -> cb.Codebook:
    instances = instances_from_responses(doc, dataset)
    lexicon = cb.load_verb_lexicon() if doc["approach"] == "verb" else None
    return cb.merge(
        instances,
        doc["approach"],
        dataset,
        verb_lexicon=lexicon,
        backend=backend,
        seed=seed,
        config_digest=config_digest,
    )


# --------------------------------------------------------------------------
# full runs with artifacts
# --------------------------------------------------------------------------

APPROACH_RUNNERS = ("topic", "chunk", "item", "verb")


def run_approaches(
    dataset: Dataset,
    gateway: Gateway,
    out_dir: str | Path,
    approaches: list[str],
    chunks: list[Chunk] | None = None,
    seg_config: SegmentationConfig | None = None,
    topic_config: TopicConfig | None = None,
    carry_enabled: bool = True,
    backend_name: str = "",
    seed: int | None = None,
) -> dict:
    """Run the requested approaches end to end; returns the manifest."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    seg_config = seg_config or SegmentationConfig()
    topic_config = topic_config or TopicConfig()
    if chunks is None:
        chunks = attach_context(segment(dataset, seg_config))
    manifest: dict = {
        "schema": MANIFEST_SCHEMA,
        "dataset_digest": dataset_digest(dataset),
        "segmentation": {
            "method": seg_config.method,
            "min_gap_minutes": seg_config.min_gap_minutes,
            "kernel_bandwidth_minutes": seg_config.kernel_bandwidth_minutes,
            "min_chunk_size": seg_config.min_chunk_size,
        },
        "backend": backend_name,
        "seed": seed,
        "approaches": {},
        "created_at": datetime.now(timezone.utc).isoformat(timespec="seconds"),
    }
    for approach in approaches:
        if approach == "topic":
            config = {
                "distance_threshold": topic_config.distance_threshold,
                "top_k": topic_config.top_k,
                "oversize_ratio": topic_config.oversize_ratio,
                "embedder": topic_config.embedder,
            }
            doc = run_topic(dataset, gateway, topic_config)
        elif approach == "chunk":
            config = manifest["segmentation"]
            doc = run_chunk(dataset, chunks, gateway)
        elif approach in ("item", "verb"):
            config = dict(manifest["segmentation"], carry=carry_enabled)
            doc = run_item(
                dataset, chunks, gateway,
                use_verb_phrases=(approach == "verb"),
                carry_enabled=carry_enabled,
            )
        else:
            raise ValueError(f"unknown approach: {approach!r}")
        responses_path = out_dir / f"responses_{approach}.json"
        responses_path.write_text(_canonical(doc), encoding="utf-8")
        book = aggregate_responses(
            doc, dataset, backend=backend_name, seed=seed, config_digest=digest(config)
        )
        codebook_path = out_dir / f"codebook_{approach}.json"
        cb.save_codebook(book, codebook_path)
        manifest["approaches"][approach] = {
            "config": config,
            "responses": responses_path.name,
            "codebook": codebook_path.name,
            "codes": len(book),
        }
    (out_dir / "manifest.json").write_text(_canonical(manifest), encoding="utf-8")
    return manifest


def verify_manifest(out_dir: str | Path, dataset: Dataset) -> dict:
    """Load a manifest, checking the dataset digest and artifact presence."""
    out_dir = Path(out_dir)
    manifest = json.loads((out_dir / "manifest.json").read_text(encoding="utf-8"))
    if manifest.get("schema") != MANIFEST_SCHEMA:
        raise ValueError("not a manifest")
    if manifest["dataset_digest"] != dataset_digest(dataset):
        raise ValueError("dataset digest mismatch: artifacts came from a different dataset")
    for approach, entry in manifest["approaches"].items():
        for key in ("responses", "codebook"):
            if not (out_dir / entry[key]).exists():
                raise ValueError(f"manifest references missing artifact: {entry[key]}")
    return manifest
