import math
import random

import numpy as np
import pytest

from opencoding.gateway import Gateway, MockBackend
from opencoding.topic import (
    EmbeddingMatrix,
    TfidfEmbedder,
    TopicCluster,
    cluster,
    ctfidf_keywords,
    embed,
    label_topic,
    tokenize,
)

from conftest import make_message


def embedding_from_rows(rows) -> EmbeddingMatrix:
    vectors = np.asarray(rows, dtype=float)
    return EmbeddingMatrix(
        message_ids=tuple(f"1-{i}" for i in range(len(rows))),
        vectors=vectors,
        source_id="test",
    )


# -- embedding ----------------------------------------------------------------


def test_identical_messages_identical_rows():
    messages = [make_message("1-0", 0, "same text"), make_message("1-1", 1, "same text")]
    matrix = embed(messages)
    assert np.array_equal(matrix.vectors[0], matrix.vectors[1])
    assert matrix.source_id == "tfidf-fallback"


def test_tfidf_shared_term_agrees_on_shared_coordinate():
    vectors = TfidfEmbedder().embed(["a b", "a c"])
    # vocab is sorted (a, b, c); both docs weight "a" as 1 * ln(1 + 2/2) and
    # their unique terms identically, so the "a" coordinate agrees even after
    # normalization while the "b"/"c" coordinates differ
    assert vectors[0][0] == pytest.approx(vectors[1][0])
    assert vectors[0][1] > 0.0
    assert vectors[1][1] == 0.0
    expected_a = math.log(1 + 2 / 2)
    expected_b = math.log(1 + 2 / 1)
    norm = math.hypot(expected_a, expected_b)
    assert vectors[0][0] == pytest.approx(expected_a / norm, abs=1e-12)


def test_tfidf_rows_unit_norm():
    texts = [f"token{i} shared word" for i in range(10)] + ["another thing entirely"]
    vectors = TfidfEmbedder().embed(texts)
    for row in vectors:
        assert abs(np.linalg.norm(row) - 1.0) <= 1e-9


def test_empty_content_embeds_to_zero_vector():
    vectors = TfidfEmbedder().embed(["words here", ""])
    assert np.linalg.norm(vectors[1]) == 0.0


def test_embed_rejects_empty_list():
    with pytest.raises(ValueError):
        embed([])


def test_remote_embedder_happy_path(monkeypatch):
    import json as json_mod

    from opencoding.topic import RemoteEmbedder

    class FakeResponse:
        def __enter__(self):
            return self

        def __exit__(self, *args):
            return False

        def read(self):
            return json_mod.dumps(
                {
                    "data": [
                        {"index": 1, "embedding": [0.0, 1.0]},
                        {"index": 0, "embedding": [1.0, 0.0]},
                    ]
                }
            ).encode()

    monkeypatch.setattr("urllib.request.urlopen", lambda req, timeout: FakeResponse())
    embedder = RemoteEmbedder(url="http://gw.example", api_key="k", model="m")
    vectors = embedder.embed(["first", "second"])
    assert vectors.shape == (2, 2)
    assert list(vectors[0]) == [1.0, 0.0]  # rows come back in input order
    assert embedder.source_id == "remote:m"


def test_remote_embedder_fails_after_retries(monkeypatch):
    from opencoding.gateway import GatewayConfigError, GatewayError
    from opencoding.topic import RemoteEmbedder

    def failing(req, timeout):
        raise TimeoutError("down")

    monkeypatch.setattr("urllib.request.urlopen", failing)
    sleeps = []
    embedder = RemoteEmbedder(
        url="http://gw.example", api_key="k", max_retries=2, sleep=sleeps.append
    )
    with pytest.raises(GatewayError, match="after 3 attempts"):
        embedder.embed(["x"])
    assert sleeps == [1.0, 2.0]

    monkeypatch.delenv("GATEWAY_URL", raising=False)
    monkeypatch.delenv("GATEWAY_KEY", raising=False)
    with pytest.raises(GatewayConfigError):
        RemoteEmbedder().embed(["x"])


def test_embedding_invariants():
    with pytest.raises(ValueError, match="non-finite"):
        EmbeddingMatrix(message_ids=("1-0",), vectors=np.array([[np.nan]]), source_id="x")
    with pytest.raises(ValueError, match="one row per message"):
        EmbeddingMatrix(message_ids=("1-0",), vectors=np.zeros((2, 3)), source_id="x")


# -- clustering -----------------------------------------------------------------


def brute_force_components(vectors: np.ndarray, threshold: float) -> list[set[int]]:
    """Oracle for specially constructed inputs: connected components over the
    exhaustive pairwise cosine-distance matrix."""
    n = len(vectors)

    def cosine_distance(a, b):
        na, nb = np.linalg.norm(a), np.linalg.norm(b)
        if na == 0 and nb == 0:
            return 0.0
        if na == 0 or nb == 0:
            return 1.0
        return 1.0 - float(a @ b) / (na * nb)

    parent = list(range(n))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for i in range(n):
        for j in range(i + 1, n):
            if cosine_distance(vectors[i], vectors[j]) < threshold:
                parent[find(i)] = find(j)
    groups: dict[int, set[int]] = {}
    for i in range(n):
        groups.setdefault(find(i), set()).add(i)
    return sorted(groups.values(), key=min)


def test_all_identical_vectors_one_cluster():
    matrix = embedding_from_rows([[1.0, 0.0]] * 6)
    clusters = cluster(matrix, distance_threshold=0.5)
    assert len(clusters) == 1
    assert len(clusters[0].member_ids) == 6


def test_two_orthogonal_groups_match_oracle():
    rows = [[1.0, 0.0]] * 4 + [[0.0, 1.0]] * 4
    matrix = embedding_from_rows(rows)
    clusters = cluster(matrix, distance_threshold=0.5)
    got = [set(int(mid.split("-")[1]) for mid in c.member_ids) for c in clusters]
    expected = brute_force_components(np.asarray(rows), 0.5)
    assert got == expected
    assert len(clusters) == 2


def test_three_orthogonal_groups_match_oracle():
    rows = [[1, 0, 0]] * 3 + [[0, 1, 0]] * 2 + [[0, 0, 1]] * 3
    matrix = embedding_from_rows([list(map(float, r)) for r in rows])
    clusters = cluster(matrix, distance_threshold=0.3)
    got = [set(int(mid.split("-")[1]) for mid in c.member_ids) for c in clusters]
    assert got == brute_force_components(np.asarray(rows, dtype=float), 0.3)


def test_cluster_partition_property():
    rng = random.Random(0)
    rows = [[rng.random(), rng.random(), rng.random()] for _ in range(25)]
    matrix = embedding_from_rows(rows)
    clusters = cluster(matrix, distance_threshold=0.2)
    covered = sorted(mid for c in clusters for mid in c.member_ids)
    assert covered == sorted(matrix.message_ids)
    assert all(c.member_ids for c in clusters)


def test_cluster_determinism():
    rng = random.Random(3)
    rows = [[rng.random(), rng.random()] for _ in range(20)]
    matrix = embedding_from_rows(rows)
    a = cluster(matrix, distance_threshold=0.1)
    b = cluster(matrix, distance_threshold=0.1)
    assert a == b


def test_oversize_flag_on_34_of_127():
    # 34 identical documents plus 93 mutually orthogonal singletons
    dim = 94
    rows = [[0.0] * dim for _ in range(127)]
    for i in range(34):
        rows[i][0] = 1.0
    for j in range(93):
        rows[34 + j][1 + j] = 1.0
    matrix = embedding_from_rows(rows)
    clusters = cluster(matrix, distance_threshold=0.5, oversize_ratio=0.25)
    assert len(clusters) == 94
    sizes = sorted(len(c.member_ids) for c in clusters)
    assert sizes == [1] * 93 + [34]
    flagged = [c for c in clusters if c.oversize_flag]
    assert len(flagged) == 1
    assert len(flagged[0].member_ids) == 34  # 34/127 = 26.8% > 25%


def test_threshold_validation():
    matrix = embedding_from_rows([[1.0, 0.0]])
    for bad in (0.0, 2.0, -1.0):
        with pytest.raises(ValueError):
            cluster(matrix, distance_threshold=bad)


# -- c-TF-IDF -------------------------------------------------------------------


def test_ctfidf_single_repeated_token():
    messages = {f"1-{i}": make_message(f"1-{i}", i, "x") for i in range(3)}
    clusters = [TopicCluster(index=0, member_ids=tuple(messages))]
    out = ctfidf_keywords(clusters, messages, top_k=5)
    assert out[0].keywords[0][0] == "x"


def test_ctfidf_toy_corpus_matches_direct_formula():
    # clusters {"red red blue"} and {"blue blue green"}; expectations computed
    # with an independent direct-formula script
    messages = {
        "1-0": make_message("1-0", 0, "red red blue"),
        "1-1": make_message("1-1", 1, "blue blue green"),
    }
    clusters = [
        TopicCluster(index=0, member_ids=("1-0",)),
        TopicCluster(index=1, member_ids=("1-1",)),
    ]
    out = ctfidf_keywords(clusters, messages, top_k=5)
    w1 = dict(out[0].keywords)
    w2 = dict(out[1].keywords)
    assert w1["red"] == pytest.approx(1.8325814637483102, abs=1e-9)
    assert w1["blue"] == pytest.approx(0.6931471805599453, abs=1e-9)
    assert "green" not in w1  # tf = 0 -> weight 0 -> not emitted
    assert w2["blue"] == pytest.approx(1.3862943611198906, abs=1e-9)
    assert w2["green"] == pytest.approx(1.3862943611198906, abs=1e-9)
    assert "red" not in w2


def test_ctfidf_ties_break_lexically():
    messages = {
        "1-0": make_message("1-0", 0, "zebra apple"),
    }
    clusters = [TopicCluster(index=0, member_ids=("1-0",))]
    out = ctfidf_keywords(clusters, messages, top_k=2)
    assert [t for t, _ in out[0].keywords] == ["apple", "zebra"]


def test_ctfidf_weights_non_negative_and_sorted(full_dataset):
    from opencoding.topic import embed as embed_messages

    messages = {m.id: m for m in full_dataset.messages}
    matrix = embed_messages(list(full_dataset.messages))
    clusters = cluster(matrix, distance_threshold=0.9)
    out = ctfidf_keywords(clusters, messages, top_k=10)
    for c in out:
        weights = [w for _, w in c.keywords]
        assert all(w >= 0 for w in weights)
        assert weights == sorted(weights, reverse=True)
        assert len(c.keywords) <= 10


# -- labeling -------------------------------------------------------------------


def test_label_topic_round_trip_mock():
    messages = {f"1-{i}": make_message(f"1-{i}", i, f"content {i}") for i in range(4)}
    topic_cluster = TopicCluster(
        index=0, member_ids=tuple(messages), keywords=(("content", 1.0),)
    )
    gateway = Gateway(MockBackend(run_seed=11))
    labeled = label_topic(topic_cluster, gateway, messages, "How did it emerge?")
    assert labeled.label.startswith("mock topic ")
    assert labeled.thought.startswith("mock thought ")
    # membership and keywords untouched
    assert labeled.member_ids == topic_cluster.member_ids
    assert labeled.keywords == topic_cluster.keywords


def test_label_topic_requires_members():
    gateway = Gateway(MockBackend(run_seed=0))
    with pytest.raises(ValueError, match="no members"):
        label_topic(TopicCluster(index=0, member_ids=()), gateway, {}, "rq")


def test_tokenize():
    assert tokenize("Multi-language support!") == ["multi", "language", "support"]
    assert tokenize("[Emoji]") == ["emoji"]
    assert tokenize("") == []
