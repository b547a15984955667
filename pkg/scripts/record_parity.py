#!/usr/bin/env python3
"""Record frontend parity fixtures from the fixture-backed service.

For ten scripted queries, capture the /identify response, the auto-mode
/search response, and a second /search forced to the auto run's views
(the override round trip). The frontend tests replay these byte-for-byte.
"""

from __future__ import annotations

import json
import os
import sys
import tempfile

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from fastapi.testclient import TestClient

from registerdex.config import ServiceConfig
from registerdex.content_model import ReplayContentModel, load_corpus
from registerdex.index_tree import IndexKind, build_index_tree, save_index
from registerdex.register_builder import build_corpus_registers, write_register_store
from registerdex.schema import default_schemas
from registerdex.service import create_app, load_state

DATA_DIR = os.path.join(os.path.dirname(__file__), "..", "tests", "data")
OUT_PATH = os.path.join(os.path.dirname(__file__), "..", "frontend", "tests",
                        "fixtures", "parity.json")

QUERIES = [
    "papers describing the zzp0000q0 approach",
    "papers describing the zzp0003q1 technique",
    "papers describing the zzp0007q4 design",
    "papers describing the zzp0012q5 setup",
    "implementation operation details",
    "experiment dataset construction",
    "motivation and problem setting",
    "pruning attention corpus study",
    "token clustering alignment",
    "synthesis of parts",
]


def main() -> None:
    corpus = load_corpus(os.path.join(DATA_DIR, "corpus_20.jsonl"))
    model = ReplayContentModel.from_file(
        os.path.join(DATA_DIR, "transcripts_20.jsonl"), dimension=32, seed=7)
    registers, report = build_corpus_registers(corpus, default_schemas(), model)
    assert not report.failed, report.failed

    with tempfile.TemporaryDirectory() as tmp:
        index_dir = os.path.join(tmp, "index")
        store = os.path.join(tmp, "registers.jsonl")
        save_index(build_index_tree(registers, IndexKind.LEXICAL), index_dir)
        write_register_store(registers, store)
        config = ServiceConfig(
            corpus_path=os.path.join(DATA_DIR, "corpus_20.jsonl"),
            index_dir=index_dir, register_store=store)
        client = TestClient(create_app(load_state(config)))

        cases = []
        for query in QUERIES:
            identify = client.post("/identify", json={"query": query, "k": 5}).json()
            auto = client.post("/search", json={"query": query, "m": 10}).json()
            override = client.post("/search", json={
                "query": query, "m": 10, "views": auto["views_used"]}).json()
            assert auto == override, f"override round trip diverged for {query!r}"
            cases.append({"query": query, "identify": identify,
                          "auto": auto, "override": override})
        healthz = client.get("/healthz").json()
        schema = client.get("/schema/AlgorithmInnovation").json()

    os.makedirs(os.path.dirname(OUT_PATH), exist_ok=True)
    with open(OUT_PATH, "w", encoding="utf-8") as fh:
        json.dump({"healthz": healthz, "schema": schema, "cases": cases},
                  fh, sort_keys=True, ensure_ascii=False, indent=1)
        fh.write("\n")
    print(f"recorded {len(cases)} parity cases -> {OUT_PATH}")


if __name__ == "__main__":
    main()
