"""Two-rater evaluation workflow: flagging, reconciliation, and reports.

Exactly two raters independently flag codes (groundedness issues and overly
broad codes). Marking a rater complete freezes their annotations for that
approach. Where the two flag sets agree the result auto-finalizes; where
they differ, a reconciliation supplies the final flags. A report for an
approach is finalizable once no unresolved disagreement remains; until then
reports carry a DRAFT watermark.

The store is an append-only JSONL event log replayed on load; writes are
serialized through a single lock.
"""

from __future__ import annotations

import json
import secrets
import threading
from dataclasses import dataclass
from pathlib import Path

from .codebook import APPROACHES, Codebook, load_codebook, normalize_label

FLAG_GROUNDEDNESS = "groundedness_issue"
FLAG_OVERLY_BROAD = "overly_broad"
FLAGS = frozenset({FLAG_GROUNDEDNESS, FLAG_OVERLY_BROAD})

MAX_RATERS = 2


class EvaluationError(RuntimeError):
    pass


class UnknownCodeError(EvaluationError):
    pass


class UnknownRaterError(EvaluationError):
    pass


class CompletionError(EvaluationError):
    pass


class NoDisagreementError(EvaluationError):
    pass


class AlreadyResolvedError(EvaluationError):
    pass


class NotFinalizableError(EvaluationError):
    def __init__(self, approach: str, unresolved: list[str]):
        self.unresolved = unresolved
        super().__init__(
            f"approach {approach!r} has unresolved disagreements: {', '.join(unresolved)}"
        )


@dataclass(frozen=True)
class Annotation:
    rater: str
    approach: str
    label: str  # normalized
    flags: frozenset[str]
    note: str = ""


@dataclass(frozen=True)
class Reconciliation:
    approach: str
    label: str
    rater_flags: dict[str, tuple[str, ...]]
    final_flags: frozenset[str]
    note: str = ""


class AnnotationStore:
    """In-memory state over an optional append-only log file."""

    def __init__(self, codebooks: dict[str, Codebook], log_path: str | Path | None = None):
        self.codebooks = codebooks
        self.log_path = Path(log_path) if log_path else None
        self.raters: dict[str, str] = {}  # name -> token
        self.annotations: dict[tuple[str, str, str], Annotation] = {}
        self.completed: set[tuple[str, str]] = set()
        self.reconciliations: dict[tuple[str, str], Reconciliation] = {}
        self._lock = threading.Lock()
        if self.log_path and self.log_path.exists():
            self._replay()

    # -- persistence -------------------------------------------------------

    def _append(self, event: dict) -> None:
        if self.log_path:
            self.log_path.parent.mkdir(parents=True, exist_ok=True)
            with self.log_path.open("a", encoding="utf-8") as f:
                f.write(json.dumps(event, ensure_ascii=False) + "\n")

    def _replay(self) -> None:
        for line in self.log_path.read_text(encoding="utf-8").splitlines():
            if not line.strip():
                continue
            event = json.loads(line)
            kind = event.pop("event")
            if kind == "register":
                self.raters[event["rater"]] = event["token"]
            elif kind == "annotate":
                ann = Annotation(
                    rater=event["rater"],
                    approach=event["approach"],
                    label=event["label"],
                    flags=frozenset(event["flags"]),
                    note=event.get("note", ""),
                )
                self.annotations[(ann.rater, ann.approach, ann.label)] = ann
            elif kind == "complete":
                self.completed.add((event["rater"], event["approach"]))
            elif kind == "reconcile":
                rec = Reconciliation(
                    approach=event["approach"],
                    label=event["label"],
                    rater_flags={r: tuple(f) for r, f in event["rater_flags"].items()},
                    final_flags=frozenset(event["final_flags"]),
                    note=event.get("note", ""),
                )
                self.reconciliations[(rec.approach, rec.label)] = rec

    def snapshot(self, path: str | Path) -> None:
        """Write a point-in-time snapshot document next to the log."""
        doc = {
            "raters": sorted(self.raters),
            "annotations": [
                {
                    "rater": a.rater,
                    "approach": a.approach,
                    "label": a.label,
                    "flags": sorted(a.flags),
                    "note": a.note,
                }
                for a in sorted(
                    self.annotations.values(), key=lambda a: (a.approach, a.label, a.rater)
                )
            ],
            "completed": sorted(list(pair) for pair in self.completed),
            "reconciliations": [
                {
                    "approach": r.approach,
                    "label": r.label,
                    "rater_flags": r.rater_flags,
                    "final_flags": sorted(r.final_flags),
                    "note": r.note,
                }
                for r in sorted(self.reconciliations.values(), key=lambda r: (r.approach, r.label))
            ],
        }
        Path(path).write_text(
            json.dumps(doc, ensure_ascii=False, indent=1) + "\n", encoding="utf-8"
        )

    # -- raters ------------------------------------------------------------

    def register_rater(self, name: str) -> str:
        """Register (or look up) a rater; returns their locally issued token."""
        name = name.strip()
        if not name:
            raise UnknownRaterError("rater name is empty")
        with self._lock:
            if name in self.raters:
                return self.raters[name]
            if len(self.raters) >= MAX_RATERS:
                raise EvaluationError(f"at most {MAX_RATERS} raters are supported")
            token = secrets.token_hex(8)
            self.raters[name] = token
            self._append({"event": "register", "rater": name, "token": token})
            return token

    def verify_token(self, name: str, token: str) -> bool:
        return self.raters.get(name) == token

    def _require_rater(self, name: str) -> None:
        if name not in self.raters:
            raise UnknownRaterError(f"unregistered rater: {name}")

    def _require_code(self, approach: str, label: str) -> str:
        codebook = self.codebooks.get(approach)
        if codebook is None:
            raise UnknownCodeError(f"no codebook loaded for approach {approach!r}")
        normalized = normalize_label(label)
        if normalized not in set(codebook.labels()):
            raise UnknownCodeError(f"unknown code {label!r} in approach {approach!r}")
        return normalized

    # -- annotations ---------------------------------------------------------

    def record_annotation(
        self, rater: str, approach: str, label: str, flags, note: str = ""
    ) -> Annotation:
        """Upsert one rater's flags on one code. Idempotent for identical
        re-submissions; rejected once the rater completed the approach."""
        self._require_rater(rater)
        normalized = self._require_code(approach, label)
        flag_set = frozenset(flags)
        bad = flag_set - FLAGS
        if bad:
            raise EvaluationError(f"unknown flags: {sorted(bad)}")
        with self._lock:
            if (rater, approach) in self.completed:
                raise CompletionError(f"{rater} already completed {approach}")
            ann = Annotation(
                rater=rater, approach=approach, label=normalized, flags=flag_set, note=note
            )
            key = (rater, approach, normalized)
            if self.annotations.get(key) == ann:
                return ann
            self.annotations[key] = ann
            self._append(
                {
                    "event": "annotate",
                    "rater": rater,
                    "approach": approach,
                    "label": normalized,
                    "flags": sorted(flag_set),
                    "note": note,
                }
            )
            return ann

    def mark_complete(self, rater: str, approach: str) -> None:
        self._require_rater(rater)
        if approach not in self.codebooks:
            raise UnknownCodeError(f"no codebook loaded for approach {approach!r}")
        with self._lock:
            if (rater, approach) in self.completed:
                return
            self.completed.add((rater, approach))
            self._append({"event": "complete", "rater": rater, "approach": approach})

    def annotations_for(self, rater: str, approach: str | None = None) -> list[Annotation]:
        self._require_rater(rater)
        return sorted(
            (
                a
                for a in self.annotations.values()
                if a.rater == rater and (approach is None or a.approach == approach)
            ),
            key=lambda a: (a.approach, a.label),
        )

    def rater_flags(self, rater: str, approach: str, label: str) -> frozenset[str]:
        ann = self.annotations.get((rater, approach, label))
        return ann.flags if ann else frozenset()

    # -- reconciliation ------------------------------------------------------

    def both_completed(self, approach: str) -> bool:
        return len(self.raters) == MAX_RATERS and all(
            (r, approach) in self.completed for r in self.raters
        )

    def disagreements(self, approach: str) -> list[dict]:
        """Codes where the two raters' flag sets differ, with their flags and
        resolution state. Requires both raters completed."""
        if not self.both_completed(approach):
            raise CompletionError(f"both raters must complete {approach} first")
        codebook = self.codebooks[approach]
        raters = sorted(self.raters)
        out = []
        for label in codebook.labels():
            flag_sets = {r: self.rater_flags(r, approach, label) for r in raters}
            values = list(flag_sets.values())
            if values[0] != values[1]:
                rec = self.reconciliations.get((approach, label))
                out.append(
                    {
                        "label": label,
                        "rater_flags": {r: sorted(f) for r, f in flag_sets.items()},
                        "notes": {
                            r: (self.annotations.get((r, approach, label)).note
                                if (r, approach, label) in self.annotations
                                else "")
                            for r in raters
                        },
                        "resolved": rec is not None,
                        "final_flags": sorted(rec.final_flags) if rec else None,
                    }
                )
        return out

    def reconcile(self, approach: str, label: str, final_flags, note: str = "") -> Reconciliation:
        """Record the resolution of one disagreement. Agreements cannot be
        reconciled (they auto-finalize)."""
        normalized = self._require_code(approach, label)
        if not self.both_completed(approach):
            raise CompletionError(f"both raters must complete {approach} before reconciling")
        flag_set = frozenset(final_flags)
        bad = flag_set - FLAGS
        if bad:
            raise EvaluationError(f"unknown flags: {sorted(bad)}")
        raters = sorted(self.raters)
        flag_sets = {r: self.rater_flags(r, approach, normalized) for r in raters}
        if flag_sets[raters[0]] == flag_sets[raters[1]]:
            raise NoDisagreementError(f"no disagreement on {normalized!r} in {approach}")
        if (approach, normalized) in self.reconciliations:
            raise AlreadyResolvedError(f"{normalized!r} in {approach} is already reconciled")
        with self._lock:
            rec = Reconciliation(
                approach=approach,
                label=normalized,
                rater_flags={r: tuple(sorted(f)) for r, f in flag_sets.items()},
                final_flags=flag_set,
                note=note,
            )
            self.reconciliations[(approach, normalized)] = rec
            self._append(
                {
                    "event": "reconcile",
                    "approach": approach,
                    "label": normalized,
                    "rater_flags": {r: sorted(f) for r, f in flag_sets.items()},
                    "final_flags": sorted(flag_set),
                    "note": note,
                }
            )
            return rec

    # -- finalization --------------------------------------------------------

    def unresolved(self, approach: str) -> list[str]:
        return [d["label"] for d in self.disagreements(approach) if not d["resolved"]]

    def finalizable(self, approach: str) -> bool:
        if not self.both_completed(approach):
            return False
        return not self.unresolved(approach)

    def final_flags(self, approach: str) -> dict[str, frozenset[str]]:
        """Final flags per code: the agreed set, or the reconciled one."""
        if not self.finalizable(approach):
            raise NotFinalizableError(
                approach,
                self.unresolved(approach) if self.both_completed(approach) else ["<incomplete>"],
            )
        raters = sorted(self.raters)
        out = {}
        for label in self.codebooks[approach].labels():
            rec = self.reconciliations.get((approach, label))
            if rec is not None:
                out[label] = rec.final_flags
            else:
                out[label] = self.rater_flags(raters[0], approach, label)
        return out


# --------------------------------------------------------------------------
# metrics
# --------------------------------------------------------------------------


def count_codes(codebook: Codebook) -> int:
    return len(codebook)


def percent(part: int, whole: int) -> str:
    if whole == 0:
        return "0.00%"
    return f"{100.0 * part / whole:.2f}%"


def metrics_report(codebooks: dict[str, Codebook], store: AnnotationStore) -> dict:
    """Per-approach code counts and final flag counts. Approaches that are
    not finalizable contribute only their resolved/agreed flags, and the
    whole report is watermarked DRAFT."""
    approaches = [a for a in APPROACHES if a in codebooks]
    draft = False
    rows = {}
    for approach in approaches:
        codebook = codebooks[approach]
        if store.finalizable(approach):
            finals = store.final_flags(approach)
        else:
            draft = True
            finals = {}
            raters = sorted(store.raters)
            for label in codebook.labels():
                rec = store.reconciliations.get((approach, label))
                if rec is not None:
                    finals[label] = rec.final_flags
                    continue
                sets = [store.rater_flags(r, approach, label) for r in raters]
                if len(sets) == MAX_RATERS and sets[0] == sets[1]:
                    finals[label] = sets[0]
        flagged = {
            FLAG_GROUNDEDNESS: sorted(l for l, f in finals.items() if FLAG_GROUNDEDNESS in f),
            FLAG_OVERLY_BROAD: sorted(l for l, f in finals.items() if FLAG_OVERLY_BROAD in f),
        }
        n = count_codes(codebook)
        rows[approach] = {
            "codes": n,
            "groundedness_issues": len(flagged[FLAG_GROUNDEDNESS]),
            "overly_broad": len(flagged[FLAG_OVERLY_BROAD]),
            "groundedness_pct": percent(len(flagged[FLAG_GROUNDEDNESS]), n),
            "overly_broad_pct": percent(len(flagged[FLAG_OVERLY_BROAD]), n),
            "flagged": flagged,
            "finalized": store.finalizable(approach),
        }
    return {"draft": draft, "approaches": rows}


_APPROACH_TITLES = {
    "topic": "Topic Modeling + LLM",
    "chunk": "Chunk-Level LLM Coding",
    "item": "Item-Level LLM Coding",
    "verb": "Item-Level Coding w/ Verb Phrases",
}


def render_report_table(report: dict) -> str:
    approaches = list(report["approaches"])
    header = [""] + [_APPROACH_TITLES.get(a, a) for a in approaches]
    rows = [
        ["# of codes"] + [str(report["approaches"][a]["codes"]) for a in approaches],
        ["# of groundedness issues"]
        + [str(report["approaches"][a]["groundedness_issues"]) for a in approaches],
        ["# of overly broad"]
        + [str(report["approaches"][a]["overly_broad"]) for a in approaches],
    ]
    widths = [max(len(r[i]) for r in [header] + rows) for i in range(len(header))]
    lines = []
    if report["draft"]:
        lines.append("*** DRAFT — evaluation not finalized ***")
    lines.append("  ".join(h.ljust(w) for h, w in zip(header, widths)).rstrip())
    for row in rows:
        lines.append("  ".join(c.ljust(w) for c, w in zip(row, widths)).rstrip())
    for approach in approaches:
        flagged = report["approaches"][approach]["flagged"]
        for flag in (FLAG_GROUNDEDNESS, FLAG_OVERLY_BROAD):
            if flagged[flag]:
                lines.append(f"{approach} {flag}: {', '.join(flagged[flag])}")
    return "\n".join(lines) + "\n"


# --------------------------------------------------------------------------
# concept groups
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class ConceptGroup:
    keyword: str
    stem: str
    members: dict[str, tuple[str, ...]]  # source -> display labels


def keyword_stem(keyword: str) -> str:
    """Lowercase and strip one trailing "ing"/"ed"/"s" suffix."""
    stem = keyword.strip().lower()
    for suffix in ("ing", "ed", "s"):
        if stem.endswith(suffix) and len(stem) > len(suffix):
            return stem[: -len(suffix)]
    return stem


def concept_group(keyword: str, sources: dict[str, Codebook]) -> ConceptGroup:
    """Per source, the codes whose normalized label contains a token starting
    with the keyword's stem. Sources and members are deterministically
    ordered."""
    if not keyword.strip():
        raise ValueError("keyword is empty")
    stem = keyword_stem(keyword)
    members = {}
    for source in sorted(sources, key=_source_order):
        codebook = sources[source]
        hits = [
            code.display_label
            for code in sorted(codebook.codes, key=lambda c: c.normalized_label)
            if any(tok.startswith(stem) for tok in code.normalized_label.split())
        ]
        members[source] = tuple(hits)
    return ConceptGroup(keyword=keyword, stem=stem, members=members)


def _source_order(source: str) -> tuple[int, str]:
    known = list(APPROACHES) + ["human"]
    return (known.index(source), source) if source in known else (len(known), source)


# --------------------------------------------------------------------------
# store directory layout
# --------------------------------------------------------------------------


def open_store(directory: str | Path) -> tuple[dict[str, Codebook], AnnotationStore]:
    """Load codebooks and the annotation log from a store directory."""
    directory = Path(directory)
    codebooks = {}
    cb_dir = directory / "codebooks"
    if cb_dir.is_dir():
        for path in sorted(cb_dir.glob("*.json")):
            codebook = load_codebook(path)
            codebooks[codebook.approach] = codebook
    store = AnnotationStore(codebooks, log_path=directory / "annotations.log")
    return codebooks, store
