"""The clustering approach: embed messages, cluster them, pick keywords per
cluster, and ask the model for a topic label.

Clustering is average-linkage agglomerative under cosine distance, cut at a
distance threshold — a deterministic, dependency-light substitute for the
density-based stack usually paired with this kind of pipeline. Clusters
holding more than ``oversize_ratio`` of the corpus are flagged: labels over
such clusters tend not to be groundable.

Keyword weights follow the class-based tf-idf idea: for term t in cluster c,
``weight(t, c) = tf(t, c) * ln(1 + A / f(t))`` where tf counts t in the
cluster's concatenated text, f(t) counts t across all clusters' concatenated
texts, and A is the mean token count per cluster.
"""

from __future__ import annotations

import json
import math
import os
import re
import time
import urllib.error
import urllib.request
from dataclasses import dataclass, replace

import numpy as np

from .corpus import Message
from .gateway import Gateway, GatewayConfigError, GatewayError
from .prompts import TOPIC_LABELING
from .responses import parse_topic_response

_TOKEN_RE = re.compile(r"[a-z0-9]+")

DEFAULT_OVERSIZE_RATIO = 0.25
DEFAULT_TOP_K = 10
DEFAULT_DISTANCE_THRESHOLD = 0.8


def tokenize(text: str) -> list[str]:
    return _TOKEN_RE.findall(text.lower())


@dataclass(frozen=True)
class EmbeddingMatrix:
    message_ids: tuple[str, ...]
    vectors: np.ndarray  # shape (n, d)
    source_id: str

    def __post_init__(self):
        if self.vectors.ndim != 2 or self.vectors.shape[0] != len(self.message_ids):
            raise ValueError("vectors must be one row per message")
        if not np.all(np.isfinite(self.vectors)):
            raise ValueError("embedding contains non-finite entries")


@dataclass(frozen=True)
class TopicCluster:
    index: int
    member_ids: tuple[str, ...]
    keywords: tuple[tuple[str, float], ...] = ()
    thought: str = ""
    label: str = ""
    oversize_flag: bool = False


class RemoteEmbedder:
    """Embeddings from an OpenAI-compatible /embeddings endpoint, with the
    same credential and retry conventions as the live chat backend."""

    def __init__(
        self,
        url: str | None = None,
        api_key: str | None = None,
        model: str = "text-embedding-3-small",
        max_retries: int = 4,
        backoff_base: float = 1.0,
        sleep=None,
    ):
        self.url = url if url is not None else os.environ.get("GATEWAY_URL")
        self.api_key = api_key if api_key is not None else os.environ.get("GATEWAY_KEY")
        self.model = model
        self.max_retries = max_retries
        self.backoff_base = backoff_base
        self.sleep = sleep or time.sleep
        self.source_id = f"remote:{model}"

    def embed(self, texts: list[str]) -> np.ndarray:
        if not self.url or not self.api_key:
            raise GatewayConfigError(
                "remote embedder needs GATEWAY_URL and GATEWAY_KEY (or explicit url/api_key)"
            )
        payload = json.dumps({"model": self.model, "input": texts}).encode("utf-8")
        endpoint = self.url.rstrip("/") + "/embeddings"
        last_error: Exception | None = None
        for attempt in range(self.max_retries + 1):
            if attempt:
                self.sleep(self.backoff_base * (2 ** (attempt - 1)))
            request = urllib.request.Request(
                endpoint,
                data=payload,
                headers={
                    "Content-Type": "application/json",
                    "Authorization": f"Bearer {self.api_key}",
                },
            )
            try:
                with urllib.request.urlopen(request, timeout=120) as resp:
                    data = json.loads(resp.read().decode("utf-8"))
                rows = sorted(data["data"], key=lambda d: d["index"])
                return np.asarray([r["embedding"] for r in rows], dtype=float)
            except urllib.error.HTTPError as exc:
                last_error = exc
                if exc.code not in (429, 500, 502, 503, 504):
                    break
            except (urllib.error.URLError, TimeoutError, json.JSONDecodeError, KeyError) as exc:
                last_error = exc
        raise GatewayError(
            f"remote embedding failed after {self.max_retries + 1} attempts: {last_error}"
        )


class TfidfEmbedder:
    """Offline fallback embedder: L2-normalized tf-idf over word tokens.

    idf(t) = ln(1 + N / df(t)); documents with no tokens embed to the zero
    vector (which cosine distance treats as maximally far from everything).
    """

    source_id = "tfidf-fallback"

    def embed(self, texts: list[str]) -> np.ndarray:
        token_lists = [tokenize(t) for t in texts]
        vocab = sorted({tok for toks in token_lists for tok in toks})
        index = {tok: i for i, tok in enumerate(vocab)}
        n_docs = len(texts)
        df = np.zeros(len(vocab))
        for toks in token_lists:
            for tok in set(toks):
                df[index[tok]] += 1
        idf = np.log(1.0 + n_docs / np.maximum(df, 1.0))
        matrix = np.zeros((n_docs, len(vocab)))
        for row, toks in enumerate(token_lists):
            for tok in toks:
                matrix[row, index[tok]] += 1.0
        matrix *= idf
        norms = np.linalg.norm(matrix, axis=1, keepdims=True)
        np.divide(matrix, norms, out=matrix, where=norms > 0)
        return matrix


def embed(messages: list[Message], embedder=None) -> EmbeddingMatrix:
    if not messages:
        raise ValueError("cannot embed an empty message list")
    embedder = embedder or TfidfEmbedder()
    vectors = np.asarray(embedder.embed([m.content for m in messages]), dtype=float)
    return EmbeddingMatrix(
        message_ids=tuple(m.id for m in messages),
        vectors=vectors,
        source_id=embedder.source_id,
    )


def _cosine_distances(vectors: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(vectors, axis=1)
    safe = np.where(norms > 0, norms, 1.0)
    unit = vectors / safe[:, None]
    sims = np.clip(unit @ unit.T, -1.0, 1.0)
    dist = 1.0 - sims
    # zero vectors: distance 1 to everything, 0 to themselves
    zero = norms == 0
    if zero.any():
        dist[zero, :] = 1.0
        dist[:, zero] = 1.0
        both = np.outer(zero, zero)
        dist[both] = 0.0
    np.fill_diagonal(dist, 0.0)
    return dist


def cluster(
    embeddings: EmbeddingMatrix,
    distance_threshold: float,
    oversize_ratio: float = DEFAULT_OVERSIZE_RATIO,
) -> list[TopicCluster]:
    """Average-linkage agglomerative clustering, merging while the smallest
    average pairwise cosine distance stays below the threshold. Ties merge
    the lexicographically smallest cluster pair, so the result is fully
    deterministic."""
    if not 0.0 < distance_threshold < 2.0:
        raise ValueError("distance_threshold must lie in (0, 2)")
    n = len(embeddings.message_ids)
    # running average-linkage distances, updated on merge:
    # d(a∪b, k) = (|a|·d(a,k) + |b|·d(b,k)) / (|a| + |b|)
    linkage = _cosine_distances(embeddings.vectors).copy()
    members: list[list[int]] = [[i] for i in range(n)]
    sizes = [1] * n
    active = list(range(n))
    while len(active) > 1:
        best: tuple[float, int, int] | None = None
        for ai, a in enumerate(active):
            for b in active[ai + 1 :]:
                d = linkage[a, b]
                if best is None or d < best[0]:
                    best = (d, a, b)
        assert best is not None
        d, a, b = best
        if d >= distance_threshold:
            break
        for k in active:
            if k in (a, b):
                continue
            linkage[a, k] = linkage[k, a] = (
                sizes[a] * linkage[a, k] + sizes[b] * linkage[b, k]
            ) / (sizes[a] + sizes[b])
        members[a].extend(members[b])
        sizes[a] += sizes[b]
        active.remove(b)
    clusters = sorted((members[a] for a in active), key=min)
    out: list[TopicCluster] = []
    for idx, members in enumerate(clusters):
        member_ids = tuple(embeddings.message_ids[i] for i in sorted(members))
        out.append(
            TopicCluster(
                index=idx,
                member_ids=member_ids,
                oversize_flag=(len(members) / n) > oversize_ratio,
            )
        )
    return out


def ctfidf_keywords(
    clusters: list[TopicCluster],
    messages_by_id: dict[str, Message],
    top_k: int = DEFAULT_TOP_K,
) -> list[TopicCluster]:
    """Attach top-k class-based tf-idf keywords to every cluster. Equal
    weights break ties lexically ascending."""
    cluster_tokens = []
    for c in clusters:
        text = " ".join(messages_by_id[mid].content for mid in c.member_ids)
        cluster_tokens.append(tokenize(text))
    total_counts: dict[str, int] = {}
    for toks in cluster_tokens:
        for tok in toks:
            total_counts[tok] = total_counts.get(tok, 0) + 1
    mean_tokens = sum(len(toks) for toks in cluster_tokens) / len(clusters)
    out = []
    for c, toks in zip(clusters, cluster_tokens):
        tf: dict[str, int] = {}
        for tok in toks:
            tf[tok] = tf.get(tok, 0) + 1
        weighted = [
            (term, count * math.log(1.0 + mean_tokens / total_counts[term]))
            for term, count in tf.items()
        ]
        weighted.sort(key=lambda pair: (-pair[1], pair[0]))
        out.append(replace(c, keywords=tuple(weighted[:top_k])))
    return out


def label_topic(
    topic_cluster: TopicCluster,
    gateway: Gateway,
    messages_by_id: dict[str, Message],
    research_question: str,
    coding_notes: str = "",
) -> TopicCluster:
    """Render the labeling prompt over the cluster's quotes and keywords,
    call the gateway, and parse the Thought/Label body."""
    if not topic_cluster.member_ids:
        raise ValueError("cluster has no members")
    quotes = "\n".join(
        f"- {messages_by_id[mid].content}" for mid in topic_cluster.member_ids
    )
    keywords = ", ".join(term for term, _ in topic_cluster.keywords)
    exchange = gateway.complete(
        TOPIC_LABELING,
        {
            "ResearchQuestion": research_question,
            "CodingNotes": coding_notes,
            "Documents": quotes,
            "Keywords": keywords,
        },
    )
    parsed = parse_topic_response(exchange.response_text)
    return replace(topic_cluster, thought=parsed.thought, label=parsed.label)
