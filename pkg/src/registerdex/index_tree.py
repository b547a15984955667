"""Hierarchical index tree: one searchable index per node path over the corpus.

Lexical indexes are native Okapi BM25 (k1=1.5, b=0.75, idf=ln(1+(N-df+0.5)/(df+0.5)));
dense indexes hold provider embeddings and are scored by exact cosine scan.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
import re
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Sequence

import numpy as np

from .content_model import ContentModel, EmbeddingVector
from .register_builder import HierarchicalRegister
from .schema import NodePath, PaperType
from .textutil import tokenize

FORMAT_VERSION = "1"

K1 = 1.5
B = 0.75


class IndexError_(RuntimeError):
    pass


class IndexCorruptionError(IndexError_):
    pass


class IndexKind(str, Enum):
    LEXICAL = "lexical"
    DENSE = "dense"


@dataclass
class LexicalViewIndex:
    view: NodePath
    postings: dict[str, dict[str, int]] = field(default_factory=dict)  # term -> pid -> tf
    doc_len: dict[str, int] = field(default_factory=dict)

    kind = IndexKind.LEXICAL

    @property
    def doc_count(self) -> int:
        return len(self.doc_len)

    @property
    def avgdl(self) -> float:
        return sum(self.doc_len.values()) / len(self.doc_len) if self.doc_len else 0.0

    def add(self, paper_id: str, tokens: list[str]) -> None:
        self.doc_len[paper_id] = len(tokens)
        for term, tf in Counter(tokens).items():
            self.postings.setdefault(term, {})[paper_id] = tf


@dataclass
class DenseViewIndex:
    view: NodePath
    vectors: dict[str, tuple[float, ...]] = field(default_factory=dict)
    dimension: int = 0

    kind = IndexKind.DENSE

    @property
    def doc_count(self) -> int:
        return len(self.vectors)

    def add(self, paper_id: str, vector: EmbeddingVector) -> None:
        if self.dimension == 0:
            self.dimension = vector.dimension
        elif vector.dimension != self.dimension:
            raise IndexError_(
                f"dimension mismatch at view {self.view}: "
                f"{vector.dimension} != {self.dimension}")
        self.vectors[paper_id] = vector.values


ViewIndex = LexicalViewIndex | DenseViewIndex


@dataclass
class IndexTree:
    kind: IndexKind
    schema_versions: dict[PaperType, str]
    views: dict[NodePath, ViewIndex]
    corpus_ids: list[str]


def build_index_tree(
    registers: Sequence[HierarchicalRegister],
    kind: IndexKind = IndexKind.LEXICAL,
    model: Optional[ContentModel] = None,
    stopwords: Optional[frozenset[str]] = None,
) -> IndexTree:
    """Merge registers into one ViewIndex per distinct path; blank contents excluded."""
    if not registers:
        raise IndexError_("cannot build an index tree from zero registers")
    if kind == IndexKind.DENSE and model is None:
        raise IndexError_("dense index tree needs an embedding provider")
    views: dict[NodePath, ViewIndex] = {}
    schema_versions: dict[PaperType, str] = {}
    corpus_ids: list[str] = []
    for register in sorted(registers, key=lambda r: r.paper_id):
        corpus_ids.append(register.paper_id)
        schema_versions[register.paper_type] = register.schema_version
        for path in sorted(register.contents, key=str):
            content = register.contents[path]
            if not content.strip():
                continue
            if path not in views:
                views[path] = (LexicalViewIndex(view=path) if kind == IndexKind.LEXICAL
                               else DenseViewIndex(view=path))
            index = views[path]
            if kind == IndexKind.LEXICAL:
                index.add(register.paper_id, tokenize(content, stopwords))
            else:
                index.add(register.paper_id, model.embed(content))
    return IndexTree(kind=kind, schema_versions=schema_versions,
                     views=views, corpus_ids=corpus_ids)


def lexical_scores(index: LexicalViewIndex, query: str,
                   stopwords: Optional[frozenset[str]] = None) -> dict[str, float]:
    """Okapi BM25 score for every paper indexed at this view."""
    if index.kind != IndexKind.LEXICAL:
        raise IndexError_("lexical_scores requires a lexical view index")
    scores = {pid: 0.0 for pid in index.doc_len}
    n_docs = index.doc_count
    if n_docs == 0:
        return scores
    avgdl = index.avgdl
    for term in tokenize(query, stopwords):
        posting = index.postings.get(term)
        if not posting:
            continue
        df = len(posting)
        idf = math.log(1.0 + (n_docs - df + 0.5) / (df + 0.5))
        for pid, tf in posting.items():
            dl = index.doc_len[pid]
            norm = K1 * (1.0 - B + B * dl / avgdl) if avgdl else K1
            scores[pid] += idf * tf * (K1 + 1.0) / (tf + norm)
    return scores


def dense_scores(index: DenseViewIndex, query_vec: EmbeddingVector) -> dict[str, float]:
    """Cosine similarity in [-1, 1] for every paper indexed at this view."""
    if index.kind != IndexKind.DENSE:
        raise IndexError_("dense_scores requires a dense view index")
    if index.vectors and query_vec.dimension != index.dimension:
        raise IndexError_(
            f"query dimension {query_vec.dimension} != index dimension {index.dimension}")
    q = np.asarray(query_vec.values, dtype=np.float64)
    qn = np.linalg.norm(q)
    out: dict[str, float] = {}
    for pid, values in index.vectors.items():
        v = np.asarray(values, dtype=np.float64)
        vn = np.linalg.norm(v)
        out[pid] = float(q @ v / (qn * vn)) if qn > 0 and vn > 0 else 0.0
    return out


def _sanitize(path: NodePath) -> str:
    stem = re.sub(r"[^0-9A-Za-z]+", "_", str(path)).strip("_")
    digest = hashlib.sha1(str(path).encode("utf-8")).hexdigest()[:8]
    return f"{stem}__{digest}.json"


def _view_payload(index: ViewIndex) -> dict:
    if index.kind == IndexKind.LEXICAL:
        return {"view": str(index.view), "kind": index.kind.value,
                "postings": index.postings, "doc_len": index.doc_len}
    return {"view": str(index.view), "kind": index.kind.value,
            "dimension": index.dimension,
            "vectors": {pid: list(vec) for pid, vec in index.vectors.items()}}


def _view_from_payload(obj: dict) -> ViewIndex:
    view = NodePath.parse(obj["view"])
    if obj["kind"] == IndexKind.LEXICAL.value:
        return LexicalViewIndex(
            view=view,
            postings={t: {p: int(tf) for p, tf in post.items()}
                      for t, post in obj["postings"].items()},
            doc_len={p: int(n) for p, n in obj["doc_len"].items()},
        )
    return DenseViewIndex(
        view=view,
        vectors={p: tuple(float(x) for x in vec) for p, vec in obj["vectors"].items()},
        dimension=int(obj["dimension"]),
    )


def save_index(tree: IndexTree, location: str) -> None:
    """Write the tree as a directory: checksummed per-view files plus a manifest."""
    os.makedirs(location, exist_ok=True)
    view_entries = []
    for path in sorted(tree.views, key=str):
        index = tree.views[path]
        filename = _sanitize(path)
        data = json.dumps(_view_payload(index), sort_keys=True,
                          ensure_ascii=False).encode("utf-8")
        with open(os.path.join(location, filename), "wb") as fh:
            fh.write(data)
        view_entries.append({
            "path": str(path),
            "file": filename,
            "sha256": hashlib.sha256(data).hexdigest(),
            "doc_count": index.doc_count,
        })
    manifest = {
        "format_version": FORMAT_VERSION,
        "kind": tree.kind.value,
        "schema_versions": {t.value: v for t, v in sorted(tree.schema_versions.items())},
        "corpus_ids": sorted(tree.corpus_ids),
        "views": view_entries,
    }
    with open(os.path.join(location, "manifest.json"), "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, sort_keys=True, ensure_ascii=False, indent=1)
        fh.write("\n")


def load_index(location: str) -> IndexTree:
    manifest_path = os.path.join(location, "manifest.json")
    with open(manifest_path, encoding="utf-8") as fh:
        manifest = json.load(fh)
    if manifest.get("format_version") != FORMAT_VERSION:
        raise IndexError_(
            f"unsupported index format version {manifest.get('format_version')!r}")
    views: dict[NodePath, ViewIndex] = {}
    for entry in manifest["views"]:
        file_path = os.path.join(location, entry["file"])
        with open(file_path, "rb") as fh:
            data = fh.read()
        if hashlib.sha256(data).hexdigest() != entry["sha256"]:
            raise IndexCorruptionError(f"checksum mismatch for view file {entry['file']}")
        index = _view_from_payload(json.loads(data.decode("utf-8")))
        views[index.view] = index
    return IndexTree(
        kind=IndexKind(manifest["kind"]),
        schema_versions={PaperType(t): v for t, v in manifest["schema_versions"].items()},
        views=views,
        corpus_ids=list(manifest["corpus_ids"]),
    )
