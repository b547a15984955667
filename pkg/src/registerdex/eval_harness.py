"""Recall@K benchmarking, layer ablations, and the planted synthetic corpus
generator used for desk-scale trend checks.

Planted corpora place one discriminative token per (paper, node): leaf
tokens are planted in the paper text, internal-node tokens arise from the
fixture aggregator's content hashing, so coarse tokens exist only at coarse
nodes and fine tokens only at fine nodes. Expected retrieval orderings are
therefore provable by construction.
"""

from __future__ import annotations

import hashlib
import json
import random
import re
import time
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

from .content_model import PaperDoc
from .index_tree import IndexTree
from .recognizer import Recognizer, RecognizerOutput, View
from .register_builder import HierarchicalRegister
from .schema import NodePath, PaperType, RegisterSchema, all_paths

DEPTH_TAGS = {1: "coarse", 2: "fine-1", 3: "fine-2", 4: "fine-3"}

RankFn = Callable[[str], Sequence[str]]


@dataclass(frozen=True)
class EvalQuery:
    query: str
    relevant_ids: frozenset[str]
    granularity_tag: Optional[str] = None

    def __post_init__(self) -> None:
        if not self.relevant_ids:
            raise ValueError(f"query {self.query!r} has no relevant ids")


def load_eval_queries(path: str, corpus_ids: Optional[set[str]] = None) -> list[EvalQuery]:
    queries: list[EvalQuery] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            obj = json.loads(line)
            q = EvalQuery(query=obj["query"],
                          relevant_ids=frozenset(obj["relevant_ids"]),
                          granularity_tag=obj.get("granularity_tag"))
            if corpus_ids is not None and not q.relevant_ids <= corpus_ids:
                unknown = sorted(q.relevant_ids - corpus_ids)
                raise ValueError(f"line {lineno}: relevant ids not in corpus: {unknown}")
            queries.append(q)
    return queries


def write_eval_queries(queries: Sequence[EvalQuery], path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for q in queries:
            fh.write(json.dumps({
                "query": q.query,
                "relevant_ids": sorted(q.relevant_ids),
                "granularity_tag": q.granularity_tag,
            }, sort_keys=True, ensure_ascii=False) + "\n")


def recall_at_k(ranked: Sequence[str], relevant: frozenset[str] | set[str], k: int) -> float:
    if k < 1:
        raise ValueError("k must be >= 1")
    if not relevant:
        raise ValueError("relevant set must be non-empty")
    return len(set(ranked[:k]) & set(relevant)) / len(relevant)


@dataclass
class BenchReport:
    cells: dict[str, dict[str, dict[str, float]]]  # system -> tag -> metric -> value
    query_counts: dict[str, int]
    ks: tuple[int, ...]
    config_fingerprint: str
    seed: Optional[int] = None
    errors: dict[str, str] = field(default_factory=dict)
    runtime_seconds: dict[str, float] = field(default_factory=dict)

    def to_json(self, include_runtime: bool = False) -> str:
        """Canonical serialization; runtime stats are excluded by default so
        identical inputs yield byte-identical reports."""
        obj = {
            "cells": self.cells,
            "query_counts": self.query_counts,
            "ks": list(self.ks),
            "config_fingerprint": self.config_fingerprint,
            "seed": self.seed,
            "errors": self.errors,
        }
        if include_runtime:
            obj["runtime_seconds"] = self.runtime_seconds
        return json.dumps(obj, sort_keys=True, ensure_ascii=False, indent=1)

    def to_table(self) -> str:
        tags = sorted(self.query_counts)
        header = ["system"] + [f"{tag} R@{k}" for tag in tags for k in self.ks]
        rows = [header]
        for system in sorted(self.cells):
            row = [system]
            for tag in tags:
                for k in self.ks:
                    value = self.cells[system].get(tag, {}).get(f"r@{k}")
                    row.append("-" if value is None else f"{value:.3f}")
            rows.append(row)
        widths = [max(len(r[i]) for r in rows) for i in range(len(header))]
        return "\n".join("  ".join(c.ljust(w) for c, w in zip(r, widths)) for r in rows)


def _fingerprint(obj: object) -> str:
    return hashlib.sha256(json.dumps(obj, sort_keys=True, default=str)
                          .encode("utf-8")).hexdigest()[:16]


def run_benchmark(queries: Sequence[EvalQuery],
                  systems: dict[str, RankFn],
                  ks: tuple[int, ...] = (5, 10),
                  seed: Optional[int] = None) -> BenchReport:
    """Evaluate each system on each query; report per-tag and overall recall@K.

    A failing system becomes an error entry; the run continues.
    """
    if not queries:
        raise ValueError("run_benchmark needs at least one query")
    cells: dict[str, dict[str, dict[str, float]]] = {}
    errors: dict[str, str] = {}
    runtimes: dict[str, float] = {}
    tags = sorted({q.granularity_tag or "all" for q in queries} | {"overall"})
    counts = {tag: sum(1 for q in queries if (q.granularity_tag or "all") == tag)
              for tag in tags}
    counts["overall"] = len(queries)
    for name, rank_fn in sorted(systems.items()):
        start = time.perf_counter()
        sums: dict[str, dict[int, float]] = {tag: {k: 0.0 for k in ks} for tag in tags}
        try:
            for q in queries:
                ranked = list(rank_fn(q.query))
                for k in ks:
                    r = recall_at_k(ranked, q.relevant_ids, k)
                    sums["overall"][k] += r
                    sums[q.granularity_tag or "all"][k] += r
        except Exception as exc:  # noqa: BLE001 - reported per system
            errors[name] = str(exc)
            continue
        finally:
            runtimes[name] = time.perf_counter() - start
        cells[name] = {
            tag: {f"r@{k}": sums[tag][k] / counts[tag] for k in ks}
            for tag in tags if counts[tag] > 0
        }
    return BenchReport(
        cells=cells,
        query_counts={t: c for t, c in counts.items() if c > 0},
        ks=ks,
        config_fingerprint=_fingerprint(sorted(systems)),
        seed=seed,
        errors=errors,
        runtime_seconds=runtimes,
    )


class AblatedRecognizer:
    """Restricts any recognizer's output to views at the kept depths; when
    nothing survives, falls back to all kept views (coarse catch-all)."""

    def __init__(self, inner: Recognizer, allowed: Sequence[View]) -> None:
        self.inner = inner
        self.allowed = tuple(allowed)
        self._allowed_paths = {str(v.path) for v in allowed}

    def identify(self, query: str, k: int) -> RecognizerOutput:
        output = self.inner.identify(query, k)
        kept = tuple(v for v in output.views if str(v.path) in self._allowed_paths)
        if not kept:
            kept = self.allowed
        return RecognizerOutput(views=kept)


def ablate_tree(tree: IndexTree, layers_kept: set[int]) -> IndexTree:
    return IndexTree(
        kind=tree.kind,
        schema_versions=dict(tree.schema_versions),
        views={p: ix for p, ix in tree.views.items() if p.depth in layers_kept},
        corpus_ids=list(tree.corpus_ids),
    )


def run_layer_ablation(queries: Sequence[EvalQuery],
                       tree: IndexTree,
                       layers_kept: set[int],
                       recognizer: Recognizer,
                       schemas: dict[PaperType, RegisterSchema],
                       k: int = 5,
                       m: int = 10,
                       ks: tuple[int, ...] = (5, 10),
                       model=None) -> BenchReport:
    """Benchmark with both the candidate views and the index restricted to
    the kept depths."""
    if not layers_kept:
        raise ValueError("layers_kept must be non-empty")
    from .retrieval import search  # local import to avoid a cycle

    ablated = ablate_tree(tree, layers_kept)
    allowed = [View(path=p, schema_type=t)
               for t in sorted(schemas, key=lambda t: t.value)
               for p in all_paths(schemas[t]) if p.depth in layers_kept]
    # dedupe by path string
    seen: set[str] = set()
    allowed = [v for v in allowed
               if not (str(v.path) in seen or seen.add(str(v.path)))]
    wrapped = AblatedRecognizer(recognizer, allowed)
    name = "layers=" + ",".join(str(d) for d in sorted(layers_kept))

    def rank(query: str) -> list[str]:
        result = search(query, ablated, wrapped, schemas, k=k, m=m, model=model)
        return [d.paper_id for d in result.ranked]

    return run_benchmark(queries, {name: rank}, ks=ks)


# ---------------------------------------------------------------------------
# Planted synthetic corpus

_TOPIC_WORDS = (
    "retrieval ranking encoder decoder attention gradient corpus token "
    "embedding transformer pruning distillation alignment sampling "
    "optimization quantization routing caching indexing clustering"
).split()


def generate_planted_corpus(n_papers: int,
                            schema: RegisterSchema,
                            seed: int = 0) -> list[PaperDoc]:
    """Papers whose full text carries one marked section per leaf path, each
    holding shared topic words plus one (paper, leaf)-unique token."""
    rng = random.Random(seed)
    from .schema import leaf_paths

    leaves = leaf_paths(schema)
    docs: list[PaperDoc] = []
    for i in range(n_papers):
        pid = f"p{i:04d}"
        theme = rng.sample(_TOPIC_WORDS, 4)
        sections = [f"[paper-type: {schema.paper_type.value}]"]
        for j, leaf in enumerate(leaves):
            filler = " ".join(rng.choice(_TOPIC_WORDS) for _ in range(6))
            unique = f"zz{pid}q{j}"
            sections.append(f"== path: {leaf} ==\n"
                            f"{' '.join(theme)} {filler} {unique} study\n")
        docs.append(PaperDoc(
            id=pid,
            title=f"Synthetic paper {pid} on {' '.join(theme[:2])}",
            abstract=f"Placeholder abstract for {pid} about {' '.join(theme)}.",
            full_text="\n".join(sections),
        ))
    return docs


def attach_root_abstracts(docs: Sequence[PaperDoc],
                          registers: Sequence[HierarchicalRegister],
                          schema: RegisterSchema) -> list[PaperDoc]:
    """Replace each paper's abstract with its aggregated root content, so the
    abstract baseline and the root view score identically."""
    root = NodePath((schema.root.name,))
    by_id = {r.paper_id: r for r in registers}
    out = []
    for doc in docs:
        register = by_id[doc.id]
        out.append(PaperDoc(id=doc.id, title=doc.title,
                            abstract=register.contents[root] or doc.abstract,
                            full_text=doc.full_text,
                            declared_type=doc.declared_type))
    return out


_UNIQUE_TOKEN_RE = re.compile(r"\b(?:zzp\d{4}q\d+|agg[0-9a-f]{10})\b")


def planted_token(content: str) -> Optional[str]:
    match = _UNIQUE_TOKEN_RE.search(content)
    return match.group(0) if match else None


def generate_planted_queries(registers: Sequence[HierarchicalRegister],
                             schema: RegisterSchema,
                             seed: int = 0,
                             per_paper: int = 1,
                             max_papers_per_depth: int = 50,
                             ) -> tuple[list[EvalQuery], dict[str, View]]:
    """One query per sampled (paper, node): the node's planted token plus
    filler. Returns the queries and a query -> golden view mapping."""
    rng = random.Random(seed)
    paths_by_depth: dict[int, list[NodePath]] = {}
    for path in all_paths(schema):
        paths_by_depth.setdefault(path.depth, []).append(path)
    queries: list[EvalQuery] = []
    golden: dict[str, View] = {}
    registers = sorted(registers, key=lambda r: r.paper_id)
    for depth, paths in sorted(paths_by_depth.items()):
        tag = DEPTH_TAGS.get(depth, f"fine-{depth - 1}")
        sampled = registers if len(registers) <= max_papers_per_depth else \
            rng.sample(registers, max_papers_per_depth)
        for register in sorted(sampled, key=lambda r: r.paper_id):
            for _ in range(per_paper):
                path = rng.choice(paths)
                token = planted_token(register.contents[path])
                if token is None:
                    continue
                filler = rng.choice(["approach", "technique", "design", "setup"])
                text = f"papers describing the {token} {filler}"
                if text in golden:
                    continue
                queries.append(EvalQuery(query=text,
                                         relevant_ids=frozenset({register.paper_id}),
                                         granularity_tag=tag))
                golden[text] = View(path=path, schema_type=schema.paper_type)
    return queries, golden


# ---------------------------------------------------------------------------
# Reference recognizers for correlation studies

class FixedMappingRecognizer:
    """Returns a pre-assigned view per query; unmapped queries get no views."""

    def __init__(self, mapping: dict[str, View]) -> None:
        self.mapping = mapping

    def identify(self, query: str, k: int) -> RecognizerOutput:
        view = self.mapping.get(query)
        if view is None:
            return RecognizerOutput(views=())
        return RecognizerOutput(views=(view,))


def adversarial_mapping(golden: dict[str, View],
                        schema: RegisterSchema) -> dict[str, View]:
    """Maps every query to a deterministic wrong view (never the golden one)."""
    paths = all_paths(schema)
    out: dict[str, View] = {}
    for query, view in golden.items():
        idx = next(i for i, p in enumerate(paths) if str(p) == str(view.path))
        wrong = paths[(idx + 1) % len(paths)]
        out[query] = View(path=wrong, schema_type=schema.paper_type)
    return out


class RandomViewRecognizer:
    """Picks a seeded pseudo-random candidate view per query."""

    def __init__(self, schema: RegisterSchema, seed: int = 0) -> None:
        self.paths = all_paths(schema)
        self.schema = schema
        self.seed = seed

    def identify(self, query: str, k: int) -> RecognizerOutput:
        digest = hashlib.sha256(f"{self.seed}:{query}".encode("utf-8")).digest()
        idx = int.from_bytes(digest[:8], "big") % len(self.paths)
        return RecognizerOutput(views=(
            View(path=self.paths[idx], schema_type=self.schema.paper_type),))
