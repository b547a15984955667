"""View recognizers: map a query to its top-K node paths, plus the
hierarchical path-overlap reward and recognizer evaluation."""

from __future__ import annotations

import json
import logging
from collections import Counter
from dataclasses import dataclass
from typing import Optional, Protocol, Sequence

import httpx

from .content_model import TRANSPORT, TransportCounter
from .schema import NodePath, PaperType, RegisterSchema, all_paths, validate_path
from .textutil import BM25Scorer, tokenize

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class View:
    path: NodePath
    schema_type: PaperType

    def __str__(self) -> str:
        return str(self.path)


@dataclass(frozen=True)
class RecognizerOutput:
    views: tuple[View, ...]
    scores: Optional[tuple[float, ...]] = None

    def __post_init__(self) -> None:
        if len(set(self.views)) != len(self.views):
            raise ValueError("recognizer output contains duplicate views")
        if self.scores is not None:
            if len(self.scores) != len(self.views):
                raise ValueError("scores must parallel views")
            if any(a < b for a, b in zip(self.scores, self.scores[1:])):
                raise ValueError("scores must be non-increasing")


@dataclass(frozen=True)
class RecognizerExample:
    query: str
    golden_view: View
    paper_id: Optional[str] = None


class Recognizer(Protocol):
    def identify(self, query: str, k: int) -> RecognizerOutput: ...


def _candidate_views(schemas: dict[PaperType, RegisterSchema]) -> list[View]:
    """All node paths across schemas, deduplicated by path string (first type wins)."""
    seen: set[str] = set()
    candidates: list[View] = []
    for paper_type in sorted(schemas, key=lambda t: t.value):
        for path in all_paths(schemas[paper_type]):
            if str(path) in seen:
                continue
            seen.add(str(path))
            candidates.append(View(path=path, schema_type=paper_type))
    return candidates


def _tie_key(view: View) -> tuple[int, str]:
    # coarser (shorter) paths first, then lexicographic
    return (view.path.depth, str(view.path))


class LexicalRecognizer:
    """Deterministic baseline: BM25 over each candidate path's names + description."""

    def __init__(self, schemas: dict[PaperType, RegisterSchema]) -> None:
        self.schemas = schemas
        self.candidates = _candidate_views(schemas)
        docs: dict[str, list[str]] = {}
        for view in self.candidates:
            node = schemas[view.schema_type].resolve(view.path)
            text = " ".join(view.path.segments) + " " + (node.description if node else "")
            docs[str(view.path)] = tokenize(text)
        self._scorer = BM25Scorer(docs)
        self._by_path = {str(v.path): v for v in self.candidates}

    def identify(self, query: str, k: int) -> RecognizerOutput:
        query_tokens = tokenize(query)
        scored = self._scorer.scores(query_tokens)
        ordered = sorted(self.candidates,
                         key=lambda v: (-scored[str(v.path)],) + _tie_key(v))
        top = ordered[:k]
        return RecognizerOutput(
            views=tuple(top),
            scores=tuple(scored[str(v.path)] for v in top),
        )


class RemoteRecognizer:
    """HTTP recognizer: POST {query, k} -> {paths: [...]}; invalid paths are
    dropped and the output backfilled from the lexical baseline."""

    def __init__(self, endpoint: str, schemas: dict[PaperType, RegisterSchema],
                 timeout: float = 10.0,
                 transport: Optional[httpx.BaseTransport] = None,
                 counter: TransportCounter = TRANSPORT) -> None:
        self.endpoint = endpoint
        self.schemas = schemas
        self.counter = counter
        self._client = httpx.Client(timeout=timeout, transport=transport)
        self._lexical = LexicalRecognizer(schemas)

    def _resolve(self, path_str: str) -> Optional[View]:
        path = NodePath.parse(path_str) if path_str else None
        if path is None:
            return None
        for paper_type in sorted(self.schemas, key=lambda t: t.value):
            if validate_path(self.schemas[paper_type], path):
                return View(path=path, schema_type=paper_type)
        return None

    def identify(self, query: str, k: int) -> RecognizerOutput:
        self.counter.increment()
        resp = self._client.post(self.endpoint, json={"query": query, "k": k})
        resp.raise_for_status()
        raw_paths = resp.json().get("paths", [])
        views: list[View] = []
        for raw in raw_paths:
            view = self._resolve(raw) if isinstance(raw, str) else None
            if view is None:
                log.warning("remote recognizer returned invalid path %r, dropped", raw)
                continue
            if view not in views:
                views.append(view)
        if len(views) < k:
            for view in self._lexical.identify(query, k + len(views)).views:
                if view not in views:
                    views.append(view)
                if len(views) >= k:
                    break
        return RecognizerOutput(views=tuple(views[:k]))


def identify(query: str, k: int, recognizer: Recognizer,
             schemas: dict[PaperType, RegisterSchema],
             fallback: bool = True) -> RecognizerOutput:
    """Gateway: run a recognizer, filter schema-invalid views, dedupe, cap at K.

    Backend failures fall back to the lexical recognizer when enabled.
    """
    if not query.strip():
        raise ValueError("query must be non-empty")
    if k < 1:
        raise ValueError("K must be >= 1")
    try:
        raw = recognizer.identify(query, k)
    except Exception as exc:  # noqa: BLE001 - any backend failure triggers fallback
        if not fallback:
            raise
        log.warning("recognizer failed (%s), falling back to lexical", exc)
        raw = LexicalRecognizer(schemas).identify(query, k)
    valid: list[View] = []
    for view in raw.views:
        schema = schemas.get(view.schema_type)
        if schema is None or not validate_path(schema, view.path):
            log.warning("dropping schema-invalid view %s", view.path)
            continue
        if view not in valid:
            valid.append(view)
        if len(valid) >= k:
            break
    return RecognizerOutput(views=tuple(valid))


def lexical_identify(query: str, k: int,
                     schemas: dict[PaperType, RegisterSchema]) -> RecognizerOutput:
    return LexicalRecognizer(schemas).identify(query, k)


def hierarchical_reward(golden: View, predicted: View) -> float:
    """Path-overlap reward in [0, 2]: overlap/|predicted| + overlap/|golden|,
    where overlap is the longest common prefix length in nodes."""
    overlap = 0
    for a, b in zip(golden.path.segments, predicted.path.segments):
        if a != b:
            break
        overlap += 1
    return overlap / len(predicted.path) + overlap / len(golden.path)


@dataclass
class RecognizerReport:
    top1_accuracy: float
    mean_reward: float
    per_view_confusion: dict[tuple[str, str], int]


def evaluate_recognizer(examples: Sequence[RecognizerExample],
                        recognizer: Recognizer,
                        schemas: dict[PaperType, RegisterSchema],
                        k: int = 5) -> RecognizerReport:
    """Top-1 accuracy and mean hierarchical reward of rank-1 predictions."""
    if not examples:
        raise ValueError("evaluate_recognizer needs at least one example")
    hits = 0
    reward_sum = 0.0
    confusion: Counter[tuple[str, str]] = Counter()
    for example in examples:
        output = identify(example.query, k, recognizer, schemas)
        if not output.views:
            confusion[(str(example.golden_view.path), "")] += 1
            continue
        top = output.views[0]
        confusion[(str(example.golden_view.path), str(top.path))] += 1
        if top.path == example.golden_view.path:
            hits += 1
        reward_sum += hierarchical_reward(example.golden_view, top)
    n = len(examples)
    return RecognizerReport(
        top1_accuracy=hits / n,
        mean_reward=reward_sum / n,
        per_view_confusion=dict(confusion),
    )


def load_examples(path: str,
                  schemas: dict[PaperType, RegisterSchema]) -> list[RecognizerExample]:
    """Read the eval-set file: one JSON line {query, golden_view, schema_type} each."""
    examples: list[RecognizerExample] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            obj = json.loads(line)
            schema_type = PaperType(obj["schema_type"])
            view = View(path=NodePath.parse(obj["golden_view"]), schema_type=schema_type)
            if not validate_path(schemas[schema_type], view.path):
                raise ValueError(f"line {lineno}: golden view {view.path} not in "
                                 f"{schema_type.value} schema")
            examples.append(RecognizerExample(
                query=obj["query"], golden_view=view, paper_id=obj.get("paper_id")))
    return examples
