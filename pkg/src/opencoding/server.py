"""HTTP API over the codebooks and the annotation store, for the review UI.

Every state-changing endpoint maps 1:1 onto an annotation-store operation;
the server adds no business logic of its own. Validation failures come back
as 4xx with a machine-readable body, and conflicting writes (reconciling an
agreement, re-resolving a resolved item, annotating after completion) as
409. The process is single-writer through the store's lock, so a GET issued
after a 2xx mutation reflects that mutation.

With a static directory configured the server also hosts the built review
UI assets.
"""

from __future__ import annotations

import json
import logging
import mimetypes
import threading
import urllib.parse
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path

from . import evaluation
from .codebook import Codebook, codebook_to_doc, normalize_label
from .evaluation import (
    AlreadyResolvedError,
    AnnotationStore,
    CompletionError,
    EvaluationError,
    NoDisagreementError,
    UnknownCodeError,
    UnknownRaterError,
    concept_group,
    metrics_report,
    render_report_table,
)

logger = logging.getLogger(__name__)


class ApiError(Exception):
    def __init__(self, status: int, code: str, message: str):
        self.status = status
        self.code = code
        self.message = message
        super().__init__(message)


def _status_for(exc: Exception) -> ApiError:
    if isinstance(exc, (UnknownCodeError, UnknownRaterError)):
        return ApiError(404, "not_found", str(exc))
    if isinstance(exc, (NoDisagreementError, AlreadyResolvedError, CompletionError)):
        return ApiError(409, "conflict", str(exc))
    if isinstance(exc, (EvaluationError, ValueError, KeyError)):
        return ApiError(400, "bad_request", str(exc))
    raise exc


class ReviewService:
    """Request-independent application state shared by handler threads."""

    def __init__(
        self,
        codebooks: dict[str, Codebook],
        store: AnnotationStore,
        static_dir: str | Path | None = None,
    ):
        self.codebooks = codebooks
        self.store = store
        self.static_dir = Path(static_dir) if static_dir else None

    # -- read endpoints ------------------------------------------------------

    def list_codebooks(self) -> list[dict]:
        # the reviewable machine codebooks; the human reference column stays
        # reachable via /codebooks/human and the concept-group comparison
        approaches = [a for a in evaluation.APPROACHES if a in self.codebooks]
        return [
            {"approach": a, "codes": len(self.codebooks[a])} for a in approaches
        ]

    def get_codebook(self, approach: str) -> dict:
        if approach not in self.codebooks:
            raise ApiError(404, "not_found", f"no codebook for approach {approach!r}")
        return codebook_to_doc(self.codebooks[approach])

    def get_examples(self, approach: str, label: str) -> dict:
        if approach not in self.codebooks:
            raise ApiError(404, "not_found", f"no codebook for approach {approach!r}")
        try:
            code = self.codebooks[approach].by_label(normalize_label(label))
        except KeyError:
            raise ApiError(404, "not_found", f"unknown code {label!r}") from None
        return {
            "approach": approach,
            "label": code.normalized_label,
            "display_label": code.display_label,
            "definition": code.definition,
            "flags": {"verb_nonconforming": code.verb_nonconforming},
            "examples": [
                {"id": e.message_id, "role": e.speaker_role, "content": e.content}
                for e in code.examples
            ],
        }

    def get_annotations(self, rater: str, approach: str | None) -> dict:
        annotations = self.store.annotations_for(rater, approach)
        return {
            "rater": rater,
            "completed": sorted(a for (r, a) in self.store.completed if r == rater),
            "annotations": [
                {
                    "approach": a.approach,
                    "label": a.label,
                    "flags": sorted(a.flags),
                    "note": a.note,
                }
                for a in annotations
            ],
        }

    def get_report(self) -> dict:
        books = {a: b for a, b in self.codebooks.items() if a in evaluation.APPROACHES}
        report = metrics_report(books, self.store)
        report["table"] = render_report_table(report)
        return report

    def get_concept_groups(self, keyword: str) -> dict:
        group = concept_group(keyword, self.codebooks)
        return {
            "keyword": group.keyword,
            "stem": group.stem,
            "members": {s: list(labels) for s, labels in group.members.items()},
        }

    def get_disagreements(self, approach: str) -> dict:
        return {"approach": approach, "disagreements": self.store.disagreements(approach)}

    # -- mutations -----------------------------------------------------------

    def register_rater(self, name: str) -> dict:
        token = self.store.register_rater(name)
        return {"rater": name, "token": token}

    def put_annotation(self, rater: str, token: str | None, body: dict) -> dict:
        self._check_token(rater, token)
        ann = self.store.record_annotation(
            rater,
            body["approach"],
            body["label"],
            body.get("flags", ()),
            body.get("note", ""),
        )
        return {
            "rater": ann.rater,
            "approach": ann.approach,
            "label": ann.label,
            "flags": sorted(ann.flags),
            "note": ann.note,
        }

    def complete(self, rater: str, token: str | None, body: dict) -> dict:
        self._check_token(rater, token)
        self.store.mark_complete(rater, body["approach"])
        return {"rater": rater, "approach": body["approach"], "completed": True}

    def post_reconciliation(self, body: dict) -> dict:
        rec = self.store.reconcile(
            body["approach"],
            body["label"],
            body.get("final_flags", ()),
            body.get("note", ""),
        )
        return {
            "approach": rec.approach,
            "label": rec.label,
            "final_flags": sorted(rec.final_flags),
            "note": rec.note,
        }

    def _check_token(self, rater: str, token: str | None) -> None:
        if rater not in self.store.raters:
            raise ApiError(404, "not_found", f"unregistered rater: {rater}")
        if not token or not self.store.verify_token(rater, token):
            raise ApiError(403, "forbidden", "missing or invalid rater token")


class _Handler(BaseHTTPRequestHandler):
    service: ReviewService  # set by make_server

    # -- plumbing ------------------------------------------------------------

    def log_message(self, format, *args):  # noqa: A002 - stdlib signature
        logger.debug("%s - %s", self.address_string(), format % args)

    def _send_json(self, status: int, payload) -> None:
        body = json.dumps(payload, ensure_ascii=False).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json; charset=utf-8")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def _send_error_json(self, err: ApiError) -> None:
        self._send_json(err.status, {"error": err.code, "message": err.message})

    def _read_body(self) -> dict:
        length = int(self.headers.get("Content-Length") or 0)
        if not length:
            return {}
        try:
            return json.loads(self.rfile.read(length).decode("utf-8"))
        except json.JSONDecodeError as exc:
            raise ApiError(400, "bad_request", f"invalid JSON body: {exc.msg}") from None

    def _route(self, method: str) -> None:
        parsed = urllib.parse.urlsplit(self.path)
        parts = [urllib.parse.unquote(p) for p in parsed.path.split("/") if p]
        query = urllib.parse.parse_qs(parsed.query)
        try:
            result = self._dispatch(method, parts, query)
        except ApiError as err:
            self._send_error_json(err)
            return
        except Exception as exc:  # noqa: BLE001 - mapped to API statuses
            try:
                self._send_error_json(_status_for(exc))
            except Exception:
                logger.exception("unhandled error for %s %s", method, self.path)
                self._send_json(500, {"error": "internal", "message": str(exc)})
            return
        if result is not None:
            self._send_json(200, result)

    # -- dispatch table --------------------------------------------------------

    def _dispatch(self, method: str, parts: list[str], query: dict):
        service = self.service
        if method == "GET":
            if parts == ["codebooks"]:
                return service.list_codebooks()
            if len(parts) == 2 and parts[0] == "codebooks":
                return service.get_codebook(parts[1])
            if len(parts) == 4 and parts[0] == "codes" and parts[3] == "examples":
                return service.get_examples(parts[1], parts[2])
            if len(parts) == 2 and parts[0] == "annotations":
                approach = query.get("approach", [None])[0]
                return service.get_annotations(parts[1], approach)
            if len(parts) == 2 and parts[0] == "disagreements":
                return service.get_disagreements(parts[1])
            if parts == ["report"]:
                return service.get_report()
            if parts == ["concept-groups"]:
                keyword = query.get("keyword", [""])[0]
                return service.get_concept_groups(keyword)
            return self._static(parts)
        token = self.headers.get("X-Rater-Token")
        if method == "PUT" and len(parts) == 2 and parts[0] == "annotations":
            return service.put_annotation(parts[1], token, self._read_body())
        if method == "POST":
            if len(parts) == 3 and parts[0] == "annotations" and parts[2] == "complete":
                return service.complete(parts[1], token, self._read_body())
            if parts == ["reconciliations"]:
                return service.post_reconciliation(self._read_body())
            if parts == ["raters"]:
                body = self._read_body()
                return service.register_rater(body.get("name", ""))
        raise ApiError(404, "not_found", f"no route for {method} /{'/'.join(parts)}")

    def _static(self, parts: list[str]):
        root = self.service.static_dir
        if root is None:
            raise ApiError(404, "not_found", "no such endpoint")
        rel = "/".join(parts) or "index.html"
        path = (root / rel).resolve()
        if not str(path).startswith(str(root.resolve())) or not path.is_file():
            raise ApiError(404, "not_found", f"no such file: /{rel}")
        content = path.read_bytes()
        ctype = mimetypes.guess_type(str(path))[0] or "application/octet-stream"
        self.send_response(200)
        self.send_header("Content-Type", ctype)
        self.send_header("Content-Length", str(len(content)))
        self.end_headers()
        self.wfile.write(content)
        return None

    # -- verbs ---------------------------------------------------------------

    def do_GET(self):
        self._route("GET")

    def do_PUT(self):
        self._route("PUT")

    def do_POST(self):
        self._route("POST")


def make_server(
    codebooks: dict[str, Codebook],
    store: AnnotationStore,
    host: str = "127.0.0.1",
    port: int = 8765,
    static_dir: str | Path | None = None,
) -> ThreadingHTTPServer:
    service = ReviewService(codebooks, store, static_dir=static_dir)
    handler = type("BoundHandler", (_Handler,), {"service": service})
    return ThreadingHTTPServer((host, port), handler)


def serve_forever(server: ThreadingHTTPServer) -> None:
    logger.info("serving on http://%s:%d/", *server.server_address)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        server.shutdown()


def start_background(server: ThreadingHTTPServer) -> threading.Thread:
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    return thread
