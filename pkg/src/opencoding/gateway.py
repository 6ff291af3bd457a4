"""Chat-completion gateway with interchangeable backends.

Three backends share one interface: ``live`` speaks an OpenAI-compatible
chat-completion HTTP API (endpoint and credential from GATEWAY_URL /
GATEWAY_KEY), ``replay`` serves previously recorded responses from a fixture
store keyed by a content hash of the request, and ``mock`` fabricates
deterministic, grammar-conforming responses from a run seed so the parsers
and aggregation can be exercised offline.

Every completed call is appended exactly once to the run's transcript log,
and with recording enabled each exchange is also written to the fixture
store, so a recorded live run can be replayed bit-identically.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import random
import re
import threading
import time
import urllib.error
import urllib.request
from dataclasses import dataclass
from pathlib import Path

from . import responses
from .prompts import PromptTemplate, render_prompt

logger = logging.getLogger(__name__)

ENV_URL = "GATEWAY_URL"
ENV_KEY = "GATEWAY_KEY"


class GatewayError(RuntimeError):
    pass


class GatewayConfigError(GatewayError):
    pass


class ReplayMissError(GatewayError):
    def __init__(self, fixture_key: str):
        self.fixture_key = fixture_key
        super().__init__(f"no recorded fixture for key {fixture_key}")


@dataclass(frozen=True)
class SamplingParams:
    temperature: float = 0.0
    seed: int | None = None


@dataclass(frozen=True)
class ChatExchange:
    template_name: str
    system_text: str
    user_text: str
    backend_id: str
    temperature: float
    seed: int | None
    response_text: str
    fixture_key: str


def fixture_key(system: str, user: str, backend_id: str, params: SamplingParams) -> str:
    payload = json.dumps(
        {
            "system": system,
            "user": user,
            "backend": backend_id,
            "temperature": params.temperature,
            "seed": params.seed,
        },
        sort_keys=True,
        ensure_ascii=False,
    )
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


# --------------------------------------------------------------------------
# mock backend
# --------------------------------------------------------------------------

_CONVERSATION_LINE_RE = re.compile(
    r"^(?:\[context\]\s*)?(\d+-\d+):\s*(?:Designer|User):\s*(.*)$"
)
_TOTAL_RE = re.compile(r"\((\d+) in total\)")


def _hex(rng: random.Random, digits: int = 6) -> str:
    return f"{rng.randrange(16 ** digits):0{digits}x}"


def generate_topic_payload(rng: random.Random) -> responses.TopicResponse:
    return responses.TopicResponse(
        thought=f"mock thought {_hex(rng)}",
        label=f"mock topic {_hex(rng)}",
    )


def generate_chunk_payload(
    rng: random.Random, quote_pool: list[str] | None = None
) -> responses.ChunkCodebookResponse:
    pool = [q.replace("\n", " ").strip() for q in (quote_pool or []) if q.strip()]
    entries = []
    for _ in range(rng.randint(2, 4)):
        n_quotes = rng.randint(0, 3)
        if pool:
            quotes = tuple(rng.sample(pool, min(n_quotes, len(pool))))
        else:
            quotes = tuple(f"mock quote {_hex(rng)}" for _ in range(n_quotes))
        entries.append(
            responses.ChunkEntry(
                label=f"mock code {_hex(rng)}",
                definition=f"mock definition {_hex(rng)}",
                quotes=quotes,
            )
        )
    return responses.ChunkCodebookResponse(entries=tuple(entries))


def generate_item_payload(
    rng: random.Random, n_messages: int, verb_phrases: bool = False
) -> responses.ItemTagResponse:
    tags_per_message = []
    for i in range(1, n_messages + 1):
        count = rng.randint(1, 3)
        if verb_phrases:
            tags = tuple(f"verb{i}{chr(96 + j)} phrase{i}{chr(96 + j)}" for j in range(1, count + 1))
        else:
            tags = tuple(f"t{i}{chr(96 + j)}" for j in range(1, count + 1))
        tags_per_message.append(tags)
    return responses.ItemTagResponse(
        thoughts=f"mock thoughts {_hex(rng)}",
        tags_per_message=tuple(tags_per_message),
        summary=f"mock summary {_hex(rng)}",
        notes=f"mock notes {_hex(rng)}",
    )


class MockBackend:
    """Deterministic offline backend: (run seed, rendered prompts) fully
    determine the response."""

    id = "mock"

    def __init__(self, run_seed: int = 0):
        self.run_seed = run_seed

    def _rng(self, system: str, user: str) -> random.Random:
        digest = hashlib.sha256(
            f"{self.run_seed}\x00{system}\x00{user}".encode("utf-8")
        ).digest()
        return random.Random(int.from_bytes(digest[:8], "big"))

    def complete(self, system: str, user: str, params: SamplingParams, template_name: str) -> str:
        rng = self._rng(system, user)
        if template_name == "topic-labeling":
            return responses.render_topic_response(generate_topic_payload(rng))
        if template_name == "chunk-codebook":
            # quote only core lines so the quote→message mapping stays in-chunk
            pool = [
                m.group(2)
                for line in user.splitlines()
                if not line.strip().startswith("[context]")
                and (m := _CONVERSATION_LINE_RE.match(line.strip()))
            ]
            return responses.render_chunk_response(generate_chunk_payload(rng, pool))
        total = _TOTAL_RE.search(system)
        n = int(total.group(1)) if total else 0
        verb = "Interpretations for each message" in system
        return responses.render_item_response(
            generate_item_payload(rng, n, verb_phrases=verb), verb_phrases=verb
        )


# --------------------------------------------------------------------------
# replay backend and fixture store
# --------------------------------------------------------------------------


class FixtureStore:
    """One JSON file per fixture key, request fields plus response verbatim."""

    def __init__(self, directory: str | Path):
        self.directory = Path(directory)

    def path(self, key: str) -> Path:
        return self.directory / f"{key}.json"

    def save(self, exchange: ChatExchange) -> None:
        self.directory.mkdir(parents=True, exist_ok=True)
        doc = {
            "system": exchange.system_text,
            "user": exchange.user_text,
            "backend": exchange.backend_id,
            "temperature": exchange.temperature,
            "seed": exchange.seed,
            "response": exchange.response_text,
        }
        self.path(exchange.fixture_key).write_text(
            json.dumps(doc, ensure_ascii=False, indent=1) + "\n", encoding="utf-8"
        )

    def load(self, key: str) -> str:
        path = self.path(key)
        if not path.exists():
            raise ReplayMissError(key)
        return json.loads(path.read_text(encoding="utf-8"))["response"]


class ReplayBackend:
    """Serves recorded responses. ``origin`` names the backend the fixtures
    were recorded against, so replayed exchanges hash and report identically
    to the original run."""

    id = "replay"

    def __init__(self, fixture_dir: str | Path, origin: str = "live"):
        self.store = FixtureStore(fixture_dir)
        self.origin = origin

    def complete(self, system: str, user: str, params: SamplingParams, template_name: str) -> str:
        return self.store.load(fixture_key(system, user, self.origin, params))


# --------------------------------------------------------------------------
# live backend
# --------------------------------------------------------------------------


class TokenBucket:
    """Requests-per-minute limiter for the live backend."""

    def __init__(self, per_minute: int, clock=time.monotonic, sleep=time.sleep):
        self.capacity = max(1, per_minute)
        self.tokens = float(self.capacity)
        self.per_minute = max(1, per_minute)
        self.clock = clock
        self.sleep = sleep
        self.updated = clock()
        self._lock = threading.Lock()

    def acquire(self) -> None:
        while True:
            with self._lock:
                now = self.clock()
                self.tokens = min(
                    self.capacity, self.tokens + (now - self.updated) * self.per_minute / 60.0
                )
                self.updated = now
                if self.tokens >= 1.0:
                    self.tokens -= 1.0
                    return
                wait = (1.0 - self.tokens) * 60.0 / self.per_minute
            self.sleep(wait)


class LiveBackend:
    """OpenAI-compatible chat-completion endpoint over HTTP."""

    id = "live"

    def __init__(
        self,
        url: str | None = None,
        api_key: str | None = None,
        model: str = "gpt-4o",
        requests_per_minute: int = 30,
        max_retries: int = 4,
        backoff_base: float = 1.0,
        sleep=time.sleep,
    ):
        self.url = url if url is not None else os.environ.get(ENV_URL)
        self.api_key = api_key if api_key is not None else os.environ.get(ENV_KEY)
        self.model = model
        self.max_retries = max_retries
        self.backoff_base = backoff_base
        self.sleep = sleep
        self.bucket = TokenBucket(requests_per_minute, sleep=sleep)

    def complete(self, system: str, user: str, params: SamplingParams, template_name: str) -> str:
        if not self.url or not self.api_key:
            raise GatewayConfigError(
                f"live backend needs {ENV_URL} and {ENV_KEY} (or explicit url/api_key)"
            )
        body = {
            "model": self.model,
            "messages": [
                {"role": "system", "content": system},
                {"role": "user", "content": user},
            ],
            "temperature": params.temperature,
        }
        if params.seed is not None:
            body["seed"] = params.seed
        payload = json.dumps(body).encode("utf-8")
        endpoint = self.url.rstrip("/") + "/chat/completions"
        last_error: Exception | None = None
        for attempt in range(self.max_retries + 1):
            if attempt:
                self.sleep(self.backoff_base * (2 ** (attempt - 1)))
            self.bucket.acquire()
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
                return data["choices"][0]["message"]["content"]
            except urllib.error.HTTPError as exc:
                last_error = exc
                if exc.code not in (429, 500, 502, 503, 504):
                    break
            except (urllib.error.URLError, TimeoutError, json.JSONDecodeError) as exc:
                last_error = exc
        raise GatewayError(f"live completion failed after {self.max_retries + 1} attempts: {last_error}")


# --------------------------------------------------------------------------
# gateway
# --------------------------------------------------------------------------


class Gateway:
    """Renders a template, runs the configured backend, logs the exchange,
    and optionally records it to a fixture store."""

    def __init__(
        self,
        backend,
        transcript_path: str | Path | None = None,
        record_dir: str | Path | None = None,
        params: SamplingParams = SamplingParams(),
    ):
        self.backend = backend
        self.transcript_path = Path(transcript_path) if transcript_path else None
        self.recorder = FixtureStore(record_dir) if record_dir else None
        self.params = params
        self._lock = threading.Lock()

    def _backend_id(self) -> str:
        # replayed exchanges report the origin backend so they hash identically
        return getattr(self.backend, "origin", None) or self.backend.id

    def complete(
        self,
        template: PromptTemplate,
        bindings: dict[str, str],
        params: SamplingParams | None = None,
    ) -> ChatExchange:
        params = params or self.params
        system, user = render_prompt(template, bindings)
        response = self.backend.complete(system, user, params, template.name)
        backend_id = self._backend_id()
        exchange = ChatExchange(
            template_name=template.name,
            system_text=system,
            user_text=user,
            backend_id=backend_id,
            temperature=params.temperature,
            seed=params.seed,
            response_text=response,
            fixture_key=fixture_key(system, user, backend_id, params),
        )
        with self._lock:
            if self.transcript_path:
                entry = {
                    "template": exchange.template_name,
                    "backend": exchange.backend_id,
                    "fixture_key": exchange.fixture_key,
                    "response": exchange.response_text,
                }
                with self.transcript_path.open("a", encoding="utf-8") as f:
                    f.write(json.dumps(entry, ensure_ascii=False) + "\n")
            if self.recorder:
                self.recorder.save(exchange)
        return exchange


def make_backend(
    name: str,
    seed: int = 0,
    fixture_dir: str | Path | None = None,
    replay_origin: str = "live",
    **live_kwargs,
):
    if name == "mock":
        return MockBackend(run_seed=seed)
    if name == "replay":
        if fixture_dir is None:
            raise GatewayConfigError("replay backend needs a fixture directory")
        return ReplayBackend(fixture_dir, origin=replay_origin)
    if name == "live":
        return LiveBackend(**live_kwargs)
    raise GatewayConfigError(f"unknown backend: {name!r}")
