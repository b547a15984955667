"""Single-binary CLI: build-registers, build-index, search, identify, eval, serve.

search/identify accept --server to run as thin clients of a running service;
everything else operates on local files.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
from contextlib import contextmanager
from typing import Optional

import httpx

from .config import ConfigError, ServiceConfig, load_config
from .content_model import (ContentModel, FixtureContentModel, RemoteConfig,
                            RemoteContentModel, ReplayContentModel,
                            TranscriptRecorder, load_corpus)
from .eval_harness import load_eval_queries, run_benchmark
from .index_tree import IndexKind, build_index_tree, load_index, save_index
from .recognizer import LexicalRecognizer, identify as identify_views
from .register_builder import (build_corpus_registers, read_register_store,
                               write_register_store)
from .retrieval import build_baseline_index, baseline_search, search
from .schema import default_schemas, load_schema_file
from .textutil import DEFAULT_STOPWORDS

log = logging.getLogger("registerdex")


@contextmanager
def _build_lock(directory: str):
    os.makedirs(directory, exist_ok=True)
    lock_path = os.path.join(directory, ".lock")
    try:
        fd = os.open(lock_path, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
    except FileExistsError:
        raise SystemExit(f"error: build already in progress (lock file {lock_path})")
    try:
        yield
    finally:
        os.close(fd)
        os.unlink(lock_path)


def _load_schemas(config: ServiceConfig):
    if not config.schema_dir:
        return default_schemas()
    schemas = {}
    for name in sorted(os.listdir(config.schema_dir)):
        if name.endswith(".json"):
            schema = load_schema_file(os.path.join(config.schema_dir, name))
            schemas[schema.paper_type] = schema
    return schemas


def _make_model(args, config: ServiceConfig) -> ContentModel:
    backend = getattr(args, "model_backend", "remote")
    if backend == "replay":
        if not args.transcripts:
            raise SystemExit("error: --transcripts is required with --model-backend replay")
        return ReplayContentModel.from_file(
            args.transcripts, dimension=config.embedding_dimension, seed=config.seed)
    if backend == "fixture":
        return FixtureContentModel(dimension=config.embedding_dimension, seed=config.seed)
    recorder = TranscriptRecorder(args.record) if getattr(args, "record", None) else None
    remote = RemoteConfig.from_env(
        embedding_dimension=config.embedding_dimension,
        max_in_flight=config.max_in_flight)
    return RemoteContentModel(remote, recorder=recorder)


def _config_from_args(args) -> ServiceConfig:
    overrides = {key: getattr(args, key, None)
                 for key in ("corpus_path", "schema_dir", "index_dir",
                             "register_store", "kind", "k", "m", "normalize",
                             "seed", "host", "port")}
    config = load_config(getattr(args, "config", None), overrides=overrides)
    config.validate()
    return config


def cmd_build_registers(args) -> int:
    config = _config_from_args(args)
    if not config.corpus_path:
        raise SystemExit("error: --corpus is required")
    corpus = load_corpus(config.corpus_path)
    schemas = _load_schemas(config)
    model = _make_model(args, config)
    existing = []
    versions = {s.paper_type: s.version for s in schemas.values()}
    if args.resume and os.path.exists(config.register_store):
        existing = [r for r in read_register_store(config.register_store)
                    if r.schema_version == versions.get(r.paper_type)]
    done = {r.paper_id for r in existing}
    todo = [d for d in corpus if d.id not in done]
    registers, report = build_corpus_registers(
        todo, schemas, model,
        max_workers=config.max_workers,
        on_extract_error=config.on_extract_error)  # type: ignore[arg-type]
    write_register_store(existing + registers, config.register_store)
    print(f"registers: built {report.built}, reused {len(existing)}, "
          f"failed {len(report.failed)} -> {config.register_store}")
    for paper_id, error in report.failed:
        print(f"  failed {paper_id}: {error}", file=sys.stderr)
    return 1 if report.failed else 0


def cmd_build_index(args) -> int:
    config = _config_from_args(args)
    if not os.path.exists(config.register_store):
        raise SystemExit(f"error: register store not found: {config.register_store}")
    registers = read_register_store(config.register_store)
    kind = IndexKind(config.kind)
    model = _make_model(args, config) if kind == IndexKind.DENSE else None
    stopwords = DEFAULT_STOPWORDS if config.stopwords else None
    with _build_lock(config.index_dir):
        tree = build_index_tree(registers, kind=kind, model=model, stopwords=stopwords)
        save_index(tree, config.index_dir)
    print(f"index: {len(tree.views)} views over {len(tree.corpus_ids)} papers "
          f"-> {config.index_dir}")
    for path in sorted(tree.views, key=str):
        print(f"  {path}: {tree.views[path].doc_count} docs")
    return 0


def _print_search_result(payload: dict, fmt: str) -> None:
    if fmt == "json":
        print(json.dumps(payload, sort_keys=True, ensure_ascii=False))
        return
    print("views: " + ", ".join(payload["views_used"]))
    for hit in payload["results"]:
        title = f"  {hit.get('title') or ''}".rstrip()
        print(f"{hit['score']:10.4f}  {hit['paper_id']}  [{hit['best_view']}]{title}")


def cmd_search(args) -> int:
    config = _config_from_args(args)
    if args.server:
        body = {"query": args.query, "k": config.k, "m": config.m}
        if args.views:
            body["views"] = args.views
        resp = httpx.post(f"{args.server.rstrip('/')}/search", json=body, timeout=30.0)
        resp.raise_for_status()
        _print_search_result(resp.json(), args.format)
        return 0
    from .service import load_state
    state = load_state(config, model=_make_model(args, config)
                       if config.kind == "dense" else None)
    override = None
    if args.views:
        from .service import _resolve_views
        override = _resolve_views(state, args.views)
    start = time.perf_counter()
    result = search(args.query, state.tree, state.recognizer, state.schemas,
                    k=config.k, m=config.m, model=state.model,
                    normalize=config.normalize, override_views=override)
    log.info("search completed in %.1f ms", 1000 * (time.perf_counter() - start))
    payload = {
        "views_used": [str(v.path) for v in result.views_used.views],
        "results": [{
            "paper_id": d.paper_id,
            "title": state.titles.get(d.paper_id, ""),
            "score": d.score,
            "best_view": str(d.best_view.path) if d.best_view else None,
        } for d in result.ranked],
    }
    _print_search_result(payload, args.format)
    return 0


def cmd_identify(args) -> int:
    config = _config_from_args(args)
    if args.server:
        resp = httpx.post(f"{args.server.rstrip('/')}/identify",
                          json={"query": args.query, "k": config.k}, timeout=30.0)
        resp.raise_for_status()
        views = resp.json()["views"]
    else:
        schemas = _load_schemas(config)
        output = identify_views(args.query, config.k, LexicalRecognizer(schemas), schemas)
        views = [str(v.path) for v in output.views]
    if args.format == "json":
        print(json.dumps({"views": views}, ensure_ascii=False))
    else:
        for view in views:
            print(view)
    return 0


def cmd_eval(args) -> int:
    config = _config_from_args(args)
    schemas = _load_schemas(config)
    corpus = load_corpus(config.corpus_path) if config.corpus_path else []
    tree = load_index(config.index_dir) if os.path.isdir(config.index_dir) else None
    kind = IndexKind(config.kind)
    model = _make_model(args, config) if kind == IndexKind.DENSE else None
    queries = load_eval_queries(args.dataset,
                                corpus_ids={d.id for d in corpus} if corpus else None)
    systems = {}
    for name in args.systems.split(","):
        name = name.strip()
        if name == "hierarchical":
            if tree is None:
                raise SystemExit(f"error: index directory {config.index_dir} not found")
            recognizer = LexicalRecognizer(schemas)

            def rank_hier(query: str, _t=tree, _r=recognizer):
                result = search(query, _t, _r, schemas, k=config.k, m=config.m,
                                model=model, normalize=config.normalize)
                return [d.paper_id for d in result.ranked]

            systems[name] = rank_hier
        else:
            mode, _, fusion = name.partition(":")
            if not corpus:
                raise SystemExit("error: baselines need --corpus")
            index = build_baseline_index(corpus, mode, kind=kind, model=model)  # type: ignore[arg-type]

            def rank_base(query: str, _i=index, _f=fusion or "max"):
                result = baseline_search(query, _i, fusion=_f, m=config.m, model=model)  # type: ignore[arg-type]
                return [d.paper_id for d in result.ranked]

            systems[name] = rank_base
    report = run_benchmark(queries, systems, seed=config.seed)
    print(report.to_table())
    for system, seconds in sorted(report.runtime_seconds.items()):
        log.info("system %s evaluated in %.2f s", system, seconds)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(report.to_json() + "\n")
        print(f"report -> {args.out}")
    return 1 if report.errors else 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app, load_state
    config = _config_from_args(args)
    state = load_state(config, model=_make_model(args, config)
                       if config.kind == "dense" else None)
    app = create_app(state)
    uvicorn.run(app, host=config.host, port=config.port)
    return 0


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="config file (JSON); REGISTERDEX_CONFIG works too")
    parser.add_argument("--corpus", dest="corpus_path")
    parser.add_argument("--schemas", dest="schema_dir")
    parser.add_argument("--index-dir", dest="index_dir")
    parser.add_argument("--registers", dest="register_store")
    parser.add_argument("--kind", choices=["lexical", "dense"])
    parser.add_argument("--seed", type=int)
    parser.add_argument("--model-backend", choices=["remote", "fixture", "replay"],
                        default="remote")
    parser.add_argument("--transcripts", help="transcript store for replay backend")
    parser.add_argument("--record", help="record remote transcripts to this file")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="registerdex",
                                     description="Flexible-grained paper search")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build-registers", help="extract + aggregate per-paper registers")
    _add_common(p)
    p.add_argument("--resume", action="store_true",
                   help="reuse registers already in the store for the same schema version")
    p.set_defaults(fn=cmd_build_registers)

    p = sub.add_parser("build-index", help="build the hierarchical index tree")
    _add_common(p)
    p.set_defaults(fn=cmd_build_index)

    p = sub.add_parser("search", help="search the index")
    _add_common(p)
    p.add_argument("query")
    p.add_argument("--k", type=int)
    p.add_argument("--m", type=int)
    p.add_argument("--views", nargs="*", help="manual view paths, skips the recognizer")
    p.add_argument("--format", choices=["text", "json"], default="text")
    p.add_argument("--server", help="query a running service instead of local files")
    p.set_defaults(fn=cmd_search)

    p = sub.add_parser("identify", help="show the recognizer's views for a query")
    _add_common(p)
    p.add_argument("query")
    p.add_argument("--k", type=int)
    p.add_argument("--format", choices=["text", "json"], default="text")
    p.add_argument("--server")
    p.set_defaults(fn=cmd_identify)

    p = sub.add_parser("eval", help="run a recall@K benchmark")
    _add_common(p)
    p.add_argument("--systems", required=True,
                   help="comma list: hierarchical, title, abstract, full_text, "
                        "chunk512:max, chunk512:avg, paragraph:max, paragraph:avg")
    p.add_argument("--dataset", required=True, help="eval query JSONL file")
    p.add_argument("--k", type=int)
    p.add_argument("--m", type=int)
    p.add_argument("--out", help="write the machine-readable report here")
    p.set_defaults(fn=cmd_eval)

    p = sub.add_parser("serve", help="run the HTTP search service")
    _add_common(p)
    p.add_argument("--host")
    p.add_argument("--port", type=int)
    p.add_argument("--k", type=int)
    p.add_argument("--m", type=int)
    p.set_defaults(fn=cmd_serve)

    return parser


def main(argv: Optional[list[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(asctime)s %(levelname)s %(name)s %(message)s")
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
