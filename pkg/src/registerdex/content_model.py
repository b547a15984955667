"""Gateway to model-backed capabilities: classification, extraction, aggregation, embedding.

Three interchangeable backends:
  RemoteContentModel  — HTTP chat-completions + embeddings endpoints.
  ReplayContentModel  — replays recorded transcripts; zero network traffic.
  FixtureContentModel — fully synthetic deterministic backend for tests and
                        generated corpora (marker-based extraction, hashed
                        aggregation, seeded hash-projection embeddings).
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
import os
import random
import threading
import time
from dataclasses import dataclass, field
from importlib import resources
from typing import Optional, Sequence

import httpx

from .schema import NodePath, PaperType, SchemaNode, parse_paper_type
from .textutil import tokenize

log = logging.getLogger(__name__)

DEFAULT_MAX_CONTENT_LEN = 4000
DEFAULT_RETRIES = 3
DEFAULT_TIMEOUT = 60.0

ENV_LLM_URL = "REGISTERDEX_LLM_URL"
ENV_LLM_KEY = "REGISTERDEX_LLM_KEY"
ENV_EMB_URL = "REGISTERDEX_EMB_URL"
ENV_EMB_KEY = "REGISTERDEX_EMB_KEY"


class TransportCounter:
    """Counts outbound network requests; the offline test suite asserts it stays 0."""

    def __init__(self) -> None:
        self._lock = threading.Lock()
        self.value = 0

    def increment(self) -> None:
        with self._lock:
            self.value += 1


#: Process-wide counter incremented by every remote HTTP request.
TRANSPORT = TransportCounter()


class ModelError(RuntimeError):
    pass


class ClassificationError(ModelError):
    pass


class ExtractionError(ModelError):
    pass


class AggregationError(ModelError):
    pass


class EmbeddingError(ModelError):
    pass


class ReplayMissError(ModelError):
    """A replay run hit a request that was never recorded."""


@dataclass(frozen=True)
class PaperDoc:
    id: str
    title: str
    abstract: str
    full_text: str = ""
    declared_type: Optional[PaperType] = None


@dataclass(frozen=True)
class EmbeddingVector:
    values: tuple[float, ...]

    def __post_init__(self) -> None:
        if not all(math.isfinite(v) for v in self.values):
            raise EmbeddingError("embedding contains non-finite entries")

    @property
    def dimension(self) -> int:
        return len(self.values)


@dataclass(frozen=True)
class ModelTranscript:
    request_key: str
    operation: str
    response: str


class CorpusError(ValueError):
    pass


def load_corpus(path: str) -> list[PaperDoc]:
    """Corpus input file: one JSON line per paper {id, title, abstract, full_text, type?}."""
    docs: list[PaperDoc] = []
    seen: set[str] = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                declared = obj.get("type")
                doc = PaperDoc(
                    id=obj["id"],
                    title=obj["title"],
                    abstract=obj["abstract"],
                    full_text=obj.get("full_text", ""),
                    declared_type=PaperType(declared) if declared else None,
                )
            except (json.JSONDecodeError, KeyError, ValueError) as exc:
                raise CorpusError(f"corrupt corpus line {lineno}: {exc}") from exc
            if not doc.title or not doc.abstract:
                raise CorpusError(f"corpus line {lineno}: title and abstract must be non-empty")
            if doc.id in seen:
                raise CorpusError(f"corpus line {lineno}: duplicate paper id {doc.id!r}")
            seen.add(doc.id)
            docs.append(doc)
    return docs


def write_corpus(docs: Sequence[PaperDoc], path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for doc in docs:
            fh.write(json.dumps({
                "id": doc.id, "title": doc.title, "abstract": doc.abstract,
                "full_text": doc.full_text,
                "type": doc.declared_type.value if doc.declared_type else None,
            }, sort_keys=True, ensure_ascii=False) + "\n")


def request_key(operation: str, *parts: object) -> str:
    """Stable key for one model request: hash of the operation plus all inputs."""
    payload = json.dumps([operation, *parts], sort_keys=True, ensure_ascii=False)
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


def load_prompt(name: str) -> str:
    return resources.files("registerdex.prompts").joinpath(name).read_text(encoding="utf-8")


class ContentModel:
    """Shared gateway logic; backends implement the _reply/_embed hooks."""

    max_content_len: int = DEFAULT_MAX_CONTENT_LEN

    def classify_paper_type(self, doc: PaperDoc) -> PaperType:
        if doc.declared_type is not None:
            return doc.declared_type
        if not doc.abstract.strip():
            raise ClassificationError(f"paper {doc.id}: abstract is empty")
        reply = self._classify_reply(doc)
        parsed = parse_paper_type(reply)
        if parsed is None:
            log.warning(
                "paper %s: unparseable type reply %r, defaulting to %s",
                doc.id, reply, PaperType.ALGORITHM_INNOVATION.value,
            )
            return PaperType.ALGORITHM_INNOVATION
        return parsed

    def extract_leaf_content(self, doc: PaperDoc, node: SchemaNode, path: NodePath) -> str:
        if path.segments[-1] != node.name:
            raise ExtractionError(f"path {path} does not end at node {node.name}")
        if not node.is_leaf:
            raise ExtractionError(f"node {node.name} is not a leaf")
        reply = self._extract_reply(doc, node, path).strip()
        if len(reply) > self.max_content_len:
            log.warning("paper %s path %s: content truncated to %d chars",
                        doc.id, path, self.max_content_len)
            reply = reply[: self.max_content_len]
        return reply

    def aggregate_contents(self, children: Sequence[tuple[str, str]]) -> str:
        if not children:
            raise AggregationError("aggregate_contents needs at least one child")
        non_empty = [(name, content) for name, content in children if content.strip()]
        if not non_empty:
            return ""
        return self._aggregate_reply(non_empty).strip()

    def embed(self, text: str) -> EmbeddingVector:
        if not text.strip():
            raise EmbeddingError("cannot embed blank text")
        return self._embed(text)

    # backend hooks
    def _classify_reply(self, doc: PaperDoc) -> str:
        raise NotImplementedError

    def _extract_reply(self, doc: PaperDoc, node: SchemaNode, path: NodePath) -> str:
        raise NotImplementedError

    def _aggregate_reply(self, children: Sequence[tuple[str, str]]) -> str:
        raise NotImplementedError

    def _embed(self, text: str) -> EmbeddingVector:
        raise NotImplementedError


def classify_key(doc: PaperDoc) -> str:
    return request_key("classify", doc.id, doc.abstract)


def extract_key(doc: PaperDoc, node: SchemaNode, path: NodePath) -> str:
    return request_key("extract", doc.id, doc.full_text, str(path), node.description)


def aggregate_key(children: Sequence[tuple[str, str]]) -> str:
    return request_key("aggregate", [list(c) for c in children])


def fixture_embedding(text: str, dimension: int, seed: int = 0) -> EmbeddingVector:
    """Seeded hash-projection embedding: deterministic, test-only, no quality claims."""
    tokens = tokenize(text)
    if not tokens:
        raise EmbeddingError("cannot embed text with no tokens")
    acc = [0.0] * dimension
    for token in tokens:
        digest = hashlib.sha256(f"{seed}:{token}".encode("utf-8")).digest()
        rng = random.Random(int.from_bytes(digest[:8], "big"))
        for i in range(dimension):
            acc[i] += rng.gauss(0.0, 1.0)
    norm = math.sqrt(sum(v * v for v in acc))
    if norm > 0:
        acc = [v / norm for v in acc]
    return EmbeddingVector(tuple(acc))


class FixtureContentModel(ContentModel):
    """Deterministic synthetic backend.

    Extraction reads marked sections out of the paper full text; aggregation
    emits a content-hash token so parent contents share no tokens with their
    children; classification reads an inline marker. Used for generated
    corpora and transcript recording.
    """

    SECTION_PREFIX = "== path: "
    TYPE_MARKER = "[paper-type:"

    def __init__(self, dimension: int = 64, seed: int = 0) -> None:
        self.dimension = dimension
        self.seed = seed

    def _classify_reply(self, doc: PaperDoc) -> str:
        marker = self.TYPE_MARKER
        for source in (doc.full_text, doc.abstract):
            idx = source.find(marker)
            if idx >= 0:
                end = source.find("]", idx)
                if end > idx:
                    return source[idx + len(marker): end].strip()
        return PaperType.ALGORITHM_INNOVATION.value

    def _extract_reply(self, doc: PaperDoc, node: SchemaNode, path: NodePath) -> str:
        header = f"{self.SECTION_PREFIX}{path} =="
        idx = doc.full_text.find(header)
        if idx < 0:
            return ""
        start = idx + len(header)
        end = doc.full_text.find("== path: ", start)
        body = doc.full_text[start:end] if end >= 0 else doc.full_text[start:]
        return " ".join(body.split())

    def _aggregate_reply(self, children: Sequence[tuple[str, str]]) -> str:
        payload = "\n".join(f"{name}:{content}" for name, content in children)
        digest = hashlib.sha256(payload.encode("utf-8")).hexdigest()[:10]
        return f"agg{digest} synthesis of {len(children)} parts"

    def _embed(self, text: str) -> EmbeddingVector:
        return fixture_embedding(text, self.dimension, self.seed)


def read_transcripts(path: str) -> dict[str, ModelTranscript]:
    transcripts: dict[str, ModelTranscript] = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            obj = json.loads(line)
            t = ModelTranscript(obj["request_key"], obj["operation"], obj["response"])
            transcripts[t.request_key] = t
    return transcripts


class ReplayContentModel(ContentModel):
    """Serves generative replies from a recorded transcript store; embeddings
    come from the deterministic fixture projection. Performs no network I/O."""

    def __init__(self, transcripts: dict[str, ModelTranscript],
                 dimension: int = 64, seed: int = 0) -> None:
        self.transcripts = transcripts
        self.dimension = dimension
        self.seed = seed

    @classmethod
    def from_file(cls, path: str, dimension: int = 64, seed: int = 0) -> "ReplayContentModel":
        return cls(read_transcripts(path), dimension=dimension, seed=seed)

    def _lookup(self, key: str, operation: str) -> str:
        t = self.transcripts.get(key)
        if t is None:
            raise ReplayMissError(f"no transcript for {operation} request {key}")
        return t.response

    def _classify_reply(self, doc: PaperDoc) -> str:
        return self._lookup(classify_key(doc), "classify")

    def _extract_reply(self, doc: PaperDoc, node: SchemaNode, path: NodePath) -> str:
        return self._lookup(extract_key(doc, node, path), "extract")

    def _aggregate_reply(self, children: Sequence[tuple[str, str]]) -> str:
        return self._lookup(aggregate_key(children), "aggregate")

    def _embed(self, text: str) -> EmbeddingVector:
        return fixture_embedding(text, self.dimension, self.seed)


class TranscriptRecorder:
    """Append-only transcript sink; one JSON record per line."""

    def __init__(self, path: str) -> None:
        self.path = path
        self._lock = threading.Lock()

    def record(self, key: str, operation: str, response: str) -> None:
        line = json.dumps(
            {"request_key": key, "operation": operation, "response": response},
            sort_keys=True, ensure_ascii=False,
        )
        with self._lock, open(self.path, "a", encoding="utf-8") as fh:
            fh.write(line + "\n")


class RecordingContentModel(ContentModel):
    """Wraps any backend and records every generative reply for later replay."""

    def __init__(self, inner: ContentModel, recorder: TranscriptRecorder) -> None:
        self.inner = inner
        self.recorder = recorder

    def _classify_reply(self, doc: PaperDoc) -> str:
        reply = self.inner._classify_reply(doc)
        self.recorder.record(classify_key(doc), "classify", reply)
        return reply

    def _extract_reply(self, doc: PaperDoc, node: SchemaNode, path: NodePath) -> str:
        reply = self.inner._extract_reply(doc, node, path)
        self.recorder.record(extract_key(doc, node, path), "extract", reply)
        return reply

    def _aggregate_reply(self, children: Sequence[tuple[str, str]]) -> str:
        reply = self.inner._aggregate_reply(children)
        self.recorder.record(aggregate_key(children), "aggregate", reply)
        return reply

    def _embed(self, text: str) -> EmbeddingVector:
        return self.inner._embed(text)


@dataclass
class RemoteConfig:
    llm_url: str = ""
    llm_key: str = ""
    emb_url: str = ""
    emb_key: str = ""
    model_name: str = "default"
    embedding_dimension: int = 1024
    retries: int = DEFAULT_RETRIES
    timeout: float = DEFAULT_TIMEOUT
    backoff_base: float = 0.5
    max_in_flight: int = 8

    @classmethod
    def from_env(cls, env: Optional[dict[str, str]] = None, **overrides: object) -> "RemoteConfig":
        env = dict(os.environ if env is None else env)
        cfg = cls(
            llm_url=env.get(ENV_LLM_URL, ""),
            llm_key=env.get(ENV_LLM_KEY, ""),
            emb_url=env.get(ENV_EMB_URL, ""),
            emb_key=env.get(ENV_EMB_KEY, ""),
        )
        for k, v in overrides.items():
            setattr(cfg, k, v)
        return cfg


class RemoteContentModel(ContentModel):
    """Chat-completions + embeddings over HTTP with bounded retries and in-flight cap."""

    def __init__(self, config: RemoteConfig,
                 recorder: Optional[TranscriptRecorder] = None,
                 transport: Optional[httpx.BaseTransport] = None,
                 counter: TransportCounter = TRANSPORT) -> None:
        self.config = config
        self.recorder = recorder
        self.counter = counter
        self._client = httpx.Client(timeout=config.timeout, transport=transport)
        self._semaphore = threading.Semaphore(config.max_in_flight)
        self._dimension_checked = False
        self.prompts = {
            "classify": load_prompt("classify_v1.txt"),
            "extract": load_prompt("extract_v1.txt"),
            "aggregate": load_prompt("aggregate_v1.txt"),
        }

    def _post(self, url: str, key: str, payload: dict) -> dict:
        headers = {"Authorization": f"Bearer {key}"} if key else {}
        last_exc: Optional[Exception] = None
        for attempt in range(self.config.retries):
            try:
                with self._semaphore:
                    self.counter.increment()
                    resp = self._client.post(url, json=payload, headers=headers)
                resp.raise_for_status()
                return resp.json()
            except (httpx.HTTPError, ValueError) as exc:
                last_exc = exc
                if attempt + 1 < self.config.retries:
                    time.sleep(self.config.backoff_base * (2 ** attempt))
        raise ModelError(f"remote request to {url} failed after "
                         f"{self.config.retries} attempts: {last_exc}")

    def _chat(self, prompt: str) -> str:
        if not self.config.llm_url:
            raise ModelError(f"no generative endpoint configured ({ENV_LLM_URL})")
        body = self._post(self.config.llm_url, self.config.llm_key, {
            "model": self.config.model_name,
            "messages": [{"role": "user", "content": prompt}],
        })
        try:
            return body["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError) as exc:
            raise ModelError(f"malformed chat response: {body!r}") from exc

    def _record(self, key: str, operation: str, reply: str) -> str:
        if self.recorder is not None:
            self.recorder.record(key, operation, reply)
        return reply

    def _classify_reply(self, doc: PaperDoc) -> str:
        prompt = self.prompts["classify"].format(abstract=doc.abstract)
        return self._record(classify_key(doc), "classify", self._chat(prompt))

    def _extract_reply(self, doc: PaperDoc, node: SchemaNode, path: NodePath) -> str:
        prompt = self.prompts["extract"].format(
            node_name=node.name, path=str(path),
            node_description=node.description, paper_text=doc.full_text,
        )
        return self._record(extract_key(doc, node, path), "extract", self._chat(prompt))

    def _aggregate_reply(self, children: Sequence[tuple[str, str]]) -> str:
        block = "\n".join(f"- {name}: {content}" for name, content in children)
        parent_name = "parent"
        prompt = self.prompts["aggregate"].format(parent_name=parent_name, children_block=block)
        return self._record(aggregate_key(children), "aggregate", self._chat(prompt))

    def _embed(self, text: str) -> EmbeddingVector:
        if not self.config.emb_url:
            raise EmbeddingError(f"no embedding endpoint configured ({ENV_EMB_URL})")
        body = self._post(self.config.emb_url, self.config.emb_key,
                          {"model": self.config.model_name, "input": text})
        try:
            values = tuple(float(v) for v in body["data"][0]["embedding"])
        except (KeyError, IndexError, TypeError) as exc:
            raise EmbeddingError(f"malformed embedding response: {body!r}") from exc
        if not self._dimension_checked:
            if len(values) != self.config.embedding_dimension:
                raise EmbeddingError(
                    f"embedding dimension {len(values)} != configured "
                    f"{self.config.embedding_dimension}")
            self._dimension_checked = True
        elif len(values) != self.config.embedding_dimension:
            raise EmbeddingError("embedding dimension changed mid-run")
        return EmbeddingVector(values)
