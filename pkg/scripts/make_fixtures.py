#!/usr/bin/env python3
"""Regenerate the frozen test fixtures in tests/data/.

Deterministic: running this twice produces byte-identical files. The golden
register store is the frozen output of one verified pipeline run; tests
replay the recorded transcripts and compare against it.
"""

from __future__ import annotations

import json
import os
import sys

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from registerdex.content_model import (FixtureContentModel, RecordingContentModel,
                                       TranscriptRecorder, write_corpus)
from registerdex.eval_harness import (attach_root_abstracts, generate_planted_corpus,
                                      generate_planted_queries, write_eval_queries)
from registerdex.eval_harness import FixedMappingRecognizer, run_benchmark
from registerdex.index_tree import IndexKind, build_index_tree
from registerdex.register_builder import build_corpus_registers, write_register_store
from registerdex.retrieval import baseline_search, build_baseline_index, search
from registerdex.schema import PaperType, default_schemas

SEED = 7
N_PAPERS = 20
DATA_DIR = os.path.join(os.path.dirname(__file__), "..", "tests", "data")


def main() -> None:
    os.makedirs(DATA_DIR, exist_ok=True)
    schemas = default_schemas()
    schema = schemas[PaperType.ALGORITHM_INNOVATION]
    docs = generate_planted_corpus(N_PAPERS, schema, seed=SEED)

    fixture_model = FixtureContentModel(dimension=32, seed=SEED)
    registers, report = build_corpus_registers(docs, schemas, fixture_model,
                                               max_workers=1)
    assert not report.failed, report.failed
    docs = attach_root_abstracts(docs, registers, schema)

    # record transcripts against the final corpus (abstracts included in the
    # request keys), so replaying on corpus_20.jsonl is an exact hit
    transcript_path = os.path.join(DATA_DIR, "transcripts_20.jsonl")
    if os.path.exists(transcript_path):
        os.unlink(transcript_path)
    model = RecordingContentModel(fixture_model, TranscriptRecorder(transcript_path))
    # sequential build so the transcript line order is stable
    registers2, report = build_corpus_registers(docs, schemas, model, max_workers=1)
    assert not report.failed, report.failed
    assert [r.contents for r in registers2] == [r.contents for r in registers]
    registers = registers2
    write_corpus(docs, os.path.join(DATA_DIR, "corpus_20.jsonl"))
    write_register_store(registers, os.path.join(DATA_DIR, "golden_registers.jsonl"))

    queries, golden = generate_planted_queries(registers, schema, seed=SEED)
    write_eval_queries(queries, os.path.join(DATA_DIR, "eval_queries_20.jsonl"))
    with open(os.path.join(DATA_DIR, "recognizer_examples.jsonl"), "w",
              encoding="utf-8") as fh:
        for query in sorted(golden):
            view = golden[query]
            fh.write(json.dumps({
                "query": query,
                "golden_view": str(view.path),
                "schema_type": view.schema_type.value,
            }, sort_keys=True, ensure_ascii=False) + "\n")
    tree = build_index_tree(registers, IndexKind.LEXICAL)
    oracle = FixedMappingRecognizer(golden)
    abstract_index = build_baseline_index(docs, "abstract")
    systems = {
        "hierarchical": lambda q: [d.paper_id for d in
                                   search(q, tree, oracle, schemas, k=1, m=10).ranked],
        "abstract": lambda q: [d.paper_id for d in
                               baseline_search(q, abstract_index, m=10).ranked],
    }
    report = run_benchmark(queries, systems)
    with open(os.path.join(DATA_DIR, "golden_report.json"), "w", encoding="utf-8") as fh:
        fh.write(report.to_json() + "\n")

    print(f"wrote fixtures for {N_PAPERS} papers, {len(queries)} queries -> {DATA_DIR}")


if __name__ == "__main__":
    main()
