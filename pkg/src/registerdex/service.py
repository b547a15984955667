"""FastAPI search service: the long-running HTTP surface over an immutable
loaded index. The CLI search/identify commands can act as thin clients."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from fastapi import FastAPI, HTTPException
from pydantic import BaseModel, Field

from .config import ServiceConfig
from .content_model import ContentModel, PaperDoc, load_corpus
from .index_tree import IndexKind, IndexTree, load_index
from .recognizer import LexicalRecognizer, Recognizer, RemoteRecognizer, View, identify
from .register_builder import HierarchicalRegister, read_register_store
from .retrieval import search
from .schema import (NodePath, PaperType, RegisterSchema, default_schemas,
                     load_schema_file, validate_path)

SNIPPET_LEN = 200


class SearchRequest(BaseModel):
    query: str = Field(min_length=1)
    k: Optional[int] = Field(default=None, ge=1)
    m: Optional[int] = Field(default=None, ge=1)
    kind: Optional[str] = None
    views: Optional[list[str]] = None  # manual view override, skips the recognizer


class SearchHit(BaseModel):
    paper_id: str
    title: str
    score: float
    best_view: Optional[str]
    snippet: str


class SearchResponse(BaseModel):
    views_used: list[str]
    results: list[SearchHit]


class IdentifyRequest(BaseModel):
    query: str = Field(min_length=1)
    k: Optional[int] = Field(default=None, ge=1)


class IdentifyResponse(BaseModel):
    views: list[str]


@dataclass
class ServiceState:
    config: ServiceConfig
    tree: IndexTree
    schemas: dict[PaperType, RegisterSchema]
    recognizer: Recognizer
    registers: dict[str, HierarchicalRegister]
    titles: dict[str, str]
    model: Optional[ContentModel] = None


def load_state(config: ServiceConfig,
               model: Optional[ContentModel] = None) -> ServiceState:
    config.validate(require_paths=True)
    if config.schema_dir:
        import os
        schemas = {}
        for name in sorted(os.listdir(config.schema_dir)):
            if name.endswith(".json"):
                schema = load_schema_file(os.path.join(config.schema_dir, name))
                schemas[schema.paper_type] = schema
    else:
        schemas = default_schemas()
    tree = load_index(config.index_dir)
    registers = {r.paper_id: r for r in read_register_store(config.register_store)}
    titles: dict[str, str] = {}
    if config.corpus_path:
        titles = {d.id: d.title for d in load_corpus(config.corpus_path)}
    if config.recognizer == "remote" and config.recognizer_endpoint:
        recognizer: Recognizer = RemoteRecognizer(config.recognizer_endpoint, schemas)
    else:
        recognizer = LexicalRecognizer(schemas)
    return ServiceState(config=config, tree=tree, schemas=schemas,
                        recognizer=recognizer, registers=registers,
                        titles=titles, model=model)


def _snippet(state: ServiceState, paper_id: str, view: Optional[View]) -> str:
    if view is None:
        return ""
    register = state.registers.get(paper_id)
    if register is None:
        return ""
    content = register.contents.get(view.path, "")
    return content[:SNIPPET_LEN]


def _resolve_views(state: ServiceState, raw: list[str]) -> list[View]:
    views: list[View] = []
    for text in raw:
        path = NodePath.parse(text)
        resolved = None
        for paper_type in sorted(state.schemas, key=lambda t: t.value):
            if validate_path(state.schemas[paper_type], path):
                resolved = View(path=path, schema_type=paper_type)
                break
        if resolved is None:
            raise HTTPException(status_code=422, detail=f"invalid view path: {text}")
        views.append(resolved)
    return views


def create_app(state: ServiceState) -> FastAPI:
    app = FastAPI(title="registerdex", version="0.1.0")
    config = state.config

    @app.get("/healthz")
    def healthz() -> dict:
        return {"status": "ok", "kind": state.tree.kind.value,
                "papers": len(state.tree.corpus_ids)}

    @app.post("/search", response_model=SearchResponse)
    def search_endpoint(request: SearchRequest) -> SearchResponse:
        if request.kind is not None and request.kind != state.tree.kind.value:
            raise HTTPException(
                status_code=422,
                detail=f"loaded index kind is {state.tree.kind.value!r}")
        override = _resolve_views(state, request.views) if request.views else None
        result = search(
            request.query, state.tree, state.recognizer, state.schemas,
            k=request.k or config.k, m=request.m or config.m,
            model=state.model, normalize=config.normalize,
            override_views=override,
        )
        hits = [SearchHit(
            paper_id=d.paper_id,
            title=state.titles.get(d.paper_id, ""),
            score=d.score,
            best_view=str(d.best_view.path) if d.best_view else None,
            snippet=_snippet(state, d.paper_id, d.best_view),
        ) for d in result.ranked]
        return SearchResponse(
            views_used=[str(v.path) for v in result.views_used.views],
            results=hits,
        )

    @app.post("/identify", response_model=IdentifyResponse)
    def identify_endpoint(request: IdentifyRequest) -> IdentifyResponse:
        output = identify(request.query, request.k or config.k,
                          state.recognizer, state.schemas)
        return IdentifyResponse(views=[str(v.path) for v in output.views])

    @app.get("/paper/{paper_id}/register")
    def register_endpoint(paper_id: str) -> dict:
        register = state.registers.get(paper_id)
        if register is None:
            raise HTTPException(status_code=404, detail=f"unknown paper {paper_id!r}")
        return {
            "paper_id": register.paper_id,
            "paper_type": register.paper_type.value,
            "schema_version": register.schema_version,
            "contents": {str(p): c for p, c in sorted(register.contents.items(),
                                                      key=lambda kv: str(kv[0]))},
        }

    @app.get("/schema/{paper_type}")
    def schema_endpoint(paper_type: str) -> dict:
        try:
            schema = state.schemas[PaperType(paper_type)]
        except (ValueError, KeyError):
            raise HTTPException(status_code=404,
                                detail=f"unknown paper type {paper_type!r}")

        def node_to_dict(node) -> dict:
            obj = {"name": node.name, "description": node.description}
            if node.children:
                obj["children"] = [node_to_dict(c) for c in node.children]
            return obj

        return {"paper_type": schema.paper_type.value,
                "version": schema.version,
                "root": node_to_dict(schema.root)}

    return app
