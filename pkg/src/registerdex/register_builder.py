"""Builds per-paper hierarchical registers: classify, extract leaves, aggregate bottom-up."""

from __future__ import annotations

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Literal, Optional, Sequence

from .content_model import ContentModel, ModelError, PaperDoc
from .schema import NodePath, PaperType, RegisterSchema, all_paths

log = logging.getLogger(__name__)

OnExtractError = Literal["fail", "blank"]


class RegisterBuildError(RuntimeError):
    def __init__(self, message: str, paper_id: str = "", path: str = "") -> None:
        context = " ".join(p for p in (paper_id and f"paper={paper_id}",
                                       path and f"path={path}") if p)
        super().__init__(f"{message}{f' [{context}]' if context else ''}")
        self.paper_id = paper_id
        self.path = path


@dataclass(frozen=True)
class HierarchicalRegister:
    paper_id: str
    paper_type: PaperType
    schema_version: str
    contents: dict[NodePath, str]


@dataclass
class CorpusBuildReport:
    built: int = 0
    failed: list[tuple[str, str]] = field(default_factory=list)  # (paper_id, error)


def build_register(
    doc: PaperDoc,
    schemas: dict[PaperType, RegisterSchema],
    model: ContentModel,
    on_extract_error: OnExtractError = "fail",
    retries: int = 1,
) -> HierarchicalRegister:
    """Produce a register covering every schema path of the paper's type.

    Leaves come from extraction; internal nodes from aggregating their
    children strictly by decreasing depth. Internal nodes whose children are
    all blank are set to "" without a model call.
    """
    missing = [t for t in PaperType if t not in schemas]
    if missing:
        raise RegisterBuildError(f"schemas missing paper types {missing}", doc.id)
    paper_type = model.classify_paper_type(doc)
    schema = schemas[paper_type]
    contents: dict[NodePath, str] = {}
    paths = all_paths(schema)

    def attempt(fn, path: NodePath) -> str:
        last: Optional[Exception] = None
        for _ in range(max(1, retries)):
            try:
                return fn()
            except ModelError as exc:
                last = exc
        if on_extract_error == "blank":
            log.warning("paper %s path %s: model failure, recording blank: %s",
                        doc.id, path, last)
            return ""
        raise RegisterBuildError(f"model failure: {last}", doc.id, str(path))

    for path in paths:
        node = schema.resolve(path)
        assert node is not None
        if node.is_leaf:
            contents[path] = attempt(
                lambda n=node, p=path: model.extract_leaf_content(doc, n, p), path)

    for path in sorted((p for p in paths if not schema.resolve(p).is_leaf),
                       key=lambda p: -p.depth):
        node = schema.resolve(path)
        children = [(c.name, contents[path.child(c.name)]) for c in node.children]
        contents[path] = attempt(
            lambda ch=children: model.aggregate_contents(ch), path)

    return HierarchicalRegister(
        paper_id=doc.id,
        paper_type=paper_type,
        schema_version=schema.version,
        contents=contents,
    )


def build_corpus_registers(
    corpus: Sequence[PaperDoc],
    schemas: dict[PaperType, RegisterSchema],
    model: ContentModel,
    max_workers: int = 4,
    on_extract_error: OnExtractError = "fail",
    retries: int = 1,
) -> tuple[list[HierarchicalRegister], CorpusBuildReport]:
    """Build one register per paper, in parallel with bounded width.

    Output order follows input order regardless of completion order.
    """
    ids = [doc.id for doc in corpus]
    if len(set(ids)) != len(ids):
        raise RegisterBuildError("corpus contains duplicate paper ids")
    report = CorpusBuildReport()
    results: list[Optional[HierarchicalRegister]] = [None] * len(corpus)

    def worker(i: int) -> None:
        try:
            results[i] = build_register(corpus[i], schemas, model,
                                        on_extract_error=on_extract_error,
                                        retries=retries)
        except Exception as exc:  # noqa: BLE001 - collected into the report
            report.failed.append((corpus[i].id, str(exc)))

    if max_workers <= 1:
        for i in range(len(corpus)):
            worker(i)
    else:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            list(pool.map(worker, range(len(corpus))))
    registers = [r for r in results if r is not None]
    report.built = len(registers)
    report.failed.sort()
    return registers, report


def register_to_json(register: HierarchicalRegister) -> str:
    obj = {
        "paper_id": register.paper_id,
        "paper_type": register.paper_type.value,
        "schema_version": register.schema_version,
        "contents": {str(path): content for path, content in register.contents.items()},
    }
    return json.dumps(obj, sort_keys=True, ensure_ascii=False)


def register_from_json(line: str) -> HierarchicalRegister:
    obj = json.loads(line)
    return HierarchicalRegister(
        paper_id=obj["paper_id"],
        paper_type=PaperType(obj["paper_type"]),
        schema_version=obj["schema_version"],
        contents={NodePath.parse(k): v for k, v in obj["contents"].items()},
    )


def write_register_store(registers: Sequence[HierarchicalRegister], path: str) -> None:
    """One JSON line per paper, sorted by paper id for byte-stable output."""
    with open(path, "w", encoding="utf-8") as fh:
        for register in sorted(registers, key=lambda r: r.paper_id):
            fh.write(register_to_json(register) + "\n")


def read_register_store(path: str) -> list[HierarchicalRegister]:
    registers = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                registers.append(register_from_json(line))
            except (json.JSONDecodeError, KeyError, ValueError) as exc:
                raise RegisterBuildError(f"corrupt register line {lineno}: {exc}") from exc
    return registers
