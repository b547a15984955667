"""Online retrieval: view lookup, max-fusion scoring, top-M ranking, and the
direct-matching / paper-splitting baselines."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from typing import Literal, Optional, Sequence

from .content_model import ContentModel, PaperDoc
from .index_tree import (DenseViewIndex, IndexKind, IndexTree, LexicalViewIndex,
                         ViewIndex, dense_scores, lexical_scores)
from .recognizer import Recognizer, RecognizerOutput, View, identify
from .schema import PaperType, RegisterSchema
from .textutil import BM25Scorer, tokenize

log = logging.getLogger(__name__)

CHUNK_TOKENS = 512

BaselineMode = Literal["title", "abstract", "full_text", "chunk512", "paragraph"]
Fusion = Literal["avg", "max"]


@dataclass(frozen=True)
class ScoredDoc:
    paper_id: str
    score: float
    best_view: Optional[View]
    per_view_scores: dict[View, float]


@dataclass(frozen=True)
class SearchResult:
    query: str
    views_used: RecognizerOutput
    ranked: tuple[ScoredDoc, ...]

    def to_json(self) -> str:
        return json.dumps({
            "query": self.query,
            "views": [str(v.path) for v in self.views_used.views],
            "results": [{
                "paper_id": d.paper_id,
                "score": d.score,
                "best_view": str(d.best_view.path) if d.best_view else None,
            } for d in self.ranked],
        }, sort_keys=True, ensure_ascii=False)


def lookup(tree: IndexTree, views: Sequence[View]) -> list[ViewIndex]:
    """Indexes for the given views, in view order; deduplicated; missing views skipped."""
    seen: set[str] = set()
    found: list[ViewIndex] = []
    for view in views:
        key = str(view.path)
        if key in seen:
            continue
        seen.add(key)
        index = tree.views.get(view.path)
        if index is None:
            log.warning("view %s has no corpus-wide index, skipped", view.path)
            continue
        found.append(index)
    return found


def _view_scores(query: str, index: ViewIndex,
                 model: Optional[ContentModel],
                 query_vec=None) -> dict[str, float]:
    if index.kind == IndexKind.LEXICAL:
        assert isinstance(index, LexicalViewIndex)
        return lexical_scores(index, query)
    assert isinstance(index, DenseViewIndex)
    if query_vec is None:
        if model is None:
            raise ValueError("dense scoring requires an embedding provider")
        query_vec = model.embed(query)
    return dense_scores(index, query_vec)


def fuse_scores(query: str,
                view_indexes: Sequence[tuple[View, ViewIndex]],
                model: Optional[ContentModel] = None,
                normalize: bool = False) -> dict[str, ScoredDoc]:
    """Per-paper max over the per-view scores; papers blank at a view simply
    contribute nothing from it.

    With normalize=True each view's scores are min-max scaled before fusion
    (off by default: raw-score fusion is the reference behavior, but raw BM25
    scores are not strictly comparable across views).
    """
    if not view_indexes:
        raise ValueError("fuse_scores needs at least one view index")
    query_vec = None
    if view_indexes and view_indexes[0][1].kind == IndexKind.DENSE and model is not None:
        query_vec = model.embed(query)
    per_paper: dict[str, dict[View, float]] = {}
    for view, index in view_indexes:
        scores = _view_scores(query, index, model, query_vec)
        if normalize and scores:
            lo, hi = min(scores.values()), max(scores.values())
            span = hi - lo
            scores = {p: ((s - lo) / span if span > 0 else 0.0) for p, s in scores.items()}
        for pid, score in scores.items():
            per_paper.setdefault(pid, {})[view] = score
    fused: dict[str, ScoredDoc] = {}
    for pid, view_scores in per_paper.items():
        best_view = max(view_scores, key=lambda v: (view_scores[v], -v.path.depth, str(v.path)))
        fused[pid] = ScoredDoc(
            paper_id=pid,
            score=view_scores[best_view],
            best_view=best_view,
            per_view_scores=view_scores,
        )
    return fused


def _rank(fused: dict[str, ScoredDoc], m: int) -> tuple[ScoredDoc, ...]:
    # descending score, then ascending paper id: fully deterministic
    ordered = sorted(fused.values(), key=lambda d: (-d.score, d.paper_id))
    return tuple(ordered[:m])


def search(query: str,
           tree: IndexTree,
           recognizer: Recognizer,
           schemas: dict[PaperType, RegisterSchema],
           k: int = 5,
           m: int = 10,
           model: Optional[ContentModel] = None,
           normalize: bool = False,
           override_views: Optional[Sequence[View]] = None) -> SearchResult:
    """Identify views, look up their indexes, max-fuse, return the top-M papers."""
    import time
    if k < 1 or m < 1:
        raise ValueError("K and M must be >= 1")
    t0 = time.perf_counter()
    if override_views is not None:
        views_used = RecognizerOutput(views=tuple(dict.fromkeys(override_views)))
    else:
        views_used = identify(query, k, recognizer, schemas)
    t1 = time.perf_counter()
    indexes = lookup(tree, views_used.views)
    by_path = {str(v.path): v for v in views_used.views}
    pairs = [(by_path[str(ix.view)], ix) for ix in indexes]
    t2 = time.perf_counter()
    if not pairs:
        return SearchResult(query=query, views_used=views_used, ranked=())
    fused = fuse_scores(query, pairs, model=model, normalize=normalize)
    log.debug("search stages: identify=%.1fms lookup=%.1fms fuse=%.1fms",
              1000 * (t1 - t0), 1000 * (t2 - t1),
              1000 * (time.perf_counter() - t2))
    return SearchResult(query=query, views_used=views_used, ranked=_rank(fused, m))


def _split_parts(doc: PaperDoc, mode: BaselineMode) -> list[str]:
    if mode == "title":
        return [doc.title]
    if mode == "abstract":
        return [doc.abstract]
    if mode == "full_text":
        return [doc.full_text]
    if mode == "paragraph":
        return [p.strip() for p in doc.full_text.split("\n\n") if p.strip()]
    if mode == "chunk512":
        tokens = tokenize(doc.full_text)
        return [" ".join(tokens[i:i + CHUNK_TOKENS])
                for i in range(0, len(tokens), CHUNK_TOKENS)]
    raise ValueError(f"unknown baseline mode {mode!r}")


@dataclass
class BaselineIndex:
    """Per-part index for direct-matching and paper-splitting baselines."""

    mode: BaselineMode
    kind: IndexKind
    part_owner: dict[str, str]            # part id -> paper id
    scorer: Optional[BM25Scorer]          # lexical
    vectors: dict[str, tuple[float, ...]] # dense


def build_baseline_index(corpus: Sequence[PaperDoc],
                         mode: BaselineMode,
                         kind: IndexKind = IndexKind.LEXICAL,
                         model: Optional[ContentModel] = None) -> BaselineIndex:
    split_mode = mode in ("chunk512", "paragraph")
    part_owner: dict[str, str] = {}
    part_text: dict[str, str] = {}
    for doc in sorted(corpus, key=lambda d: d.id):
        if split_mode and not doc.full_text.strip():
            log.warning("paper %s has empty full_text, excluded from %s baseline",
                        doc.id, mode)
            continue
        parts = _split_parts(doc, mode)
        for i, text in enumerate(parts):
            part_id = f"{doc.id}#{i}"
            part_owner[part_id] = doc.id
            part_text[part_id] = text
    if kind == IndexKind.LEXICAL:
        scorer = BM25Scorer({pid: tokenize(t) for pid, t in part_text.items()})
        return BaselineIndex(mode=mode, kind=kind, part_owner=part_owner,
                             scorer=scorer, vectors={})
    if model is None:
        raise ValueError("dense baseline index needs an embedding provider")
    vectors = {pid: model.embed(t).values for pid, t in part_text.items() if t.strip()}
    return BaselineIndex(mode=mode, kind=kind, part_owner=part_owner,
                         scorer=None, vectors=vectors)


def baseline_search(query: str,
                    index: BaselineIndex,
                    fusion: Fusion = "max",
                    m: int = 10,
                    model: Optional[ContentModel] = None) -> SearchResult:
    """Score every part, combine per paper by avg or max, rank top-M."""
    if fusion not in ("avg", "max"):
        raise ValueError(f"unknown fusion {fusion!r}")
    if index.kind == IndexKind.LEXICAL:
        assert index.scorer is not None
        part_scores = index.scorer.scores(tokenize(query))
    else:
        if model is None:
            raise ValueError("dense baseline search needs an embedding provider")
        from .index_tree import DenseViewIndex as _D  # local reuse of cosine scan
        from .schema import NodePath
        dense = _D(view=NodePath(("baseline",)))
        from .content_model import EmbeddingVector
        for pid, vec in index.vectors.items():
            dense.add(pid, EmbeddingVector(vec))
        part_scores = dense_scores(dense, model.embed(query))
    per_paper: dict[str, list[float]] = {}
    for part_id, score in part_scores.items():
        per_paper.setdefault(index.part_owner[part_id], []).append(score)
    fused = {}
    for pid, scores in per_paper.items():
        value = max(scores) if fusion == "max" else sum(scores) / len(scores)
        fused[pid] = ScoredDoc(paper_id=pid, score=value, best_view=None,
                               per_view_scores={})
    return SearchResult(query=query,
                        views_used=RecognizerOutput(views=()),
                        ranked=_rank(fused, m))
