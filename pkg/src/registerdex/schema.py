"""Hierarchical register schemas: node trees whose root-to-node paths are "views"."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from importlib import resources
from typing import Iterator, Optional

PATH_SEPARATOR = "/"


class SchemaError(ValueError):
    """Raised for malformed or invariant-violating schema documents."""

    def __init__(self, message: str, at: str = "") -> None:
        super().__init__(f"{message}{f' (at {at})' if at else ''}")
        self.at = at


class PaperType(str, Enum):
    ALGORITHM_INNOVATION = "AlgorithmInnovation"
    BENCHMARK_CONSTRUCTION = "BenchmarkConstruction"
    MECHANISM_EXPLORATION = "MechanismExploration"
    SURVEY = "Survey"
    THEORY_PROOF = "TheoryProof"


# Normalized (lowercased, alphanumeric-only) label -> PaperType.
_TYPE_ALIASES: dict[str, PaperType] = {
    "algorithminnovation": PaperType.ALGORITHM_INNOVATION,
    "benchmarkconstruction": PaperType.BENCHMARK_CONSTRUCTION,
    "mechanismexploration": PaperType.MECHANISM_EXPLORATION,
    "survey": PaperType.SURVEY,
    "surveyandreview": PaperType.SURVEY,
    "review": PaperType.SURVEY,
    "theoryproof": PaperType.THEORY_PROOF,
}


def parse_paper_type(label: str) -> Optional[PaperType]:
    """Map a free-form type label (case/punctuation-insensitive) to a PaperType."""
    normalized = "".join(ch for ch in label.lower() if ch.isalnum())
    return _TYPE_ALIASES.get(normalized)


@dataclass(frozen=True)
class SchemaNode:
    name: str
    description: str = ""
    children: tuple["SchemaNode", ...] = ()

    @property
    def is_leaf(self) -> bool:
        return not self.children

    def child(self, name: str) -> Optional["SchemaNode"]:
        for c in self.children:
            if c.name == name:
                return c
        return None


@dataclass(frozen=True, order=True)
class NodePath:
    segments: tuple[str, ...]

    def __post_init__(self) -> None:
        if not self.segments:
            raise SchemaError("node path must be non-empty")

    @classmethod
    def parse(cls, text: str) -> "NodePath":
        return cls(tuple(text.split(PATH_SEPARATOR)))

    def __str__(self) -> str:
        return PATH_SEPARATOR.join(self.segments)

    def __len__(self) -> int:
        return len(self.segments)

    @property
    def depth(self) -> int:
        return len(self.segments)

    def parent(self) -> Optional["NodePath"]:
        if len(self.segments) == 1:
            return None
        return NodePath(self.segments[:-1])

    def child(self, name: str) -> "NodePath":
        return NodePath(self.segments + (name,))


@dataclass(frozen=True)
class RegisterSchema:
    paper_type: PaperType
    root: SchemaNode
    version: str

    def resolve(self, path: NodePath) -> Optional[SchemaNode]:
        if path.segments[0] != self.root.name:
            return None
        node: Optional[SchemaNode] = self.root
        for segment in path.segments[1:]:
            node = node.child(segment)  # type: ignore[union-attr]
            if node is None:
                return None
        return node

    @property
    def max_depth(self) -> int:
        return max(p.depth for p in all_paths(self))


def _parse_node(obj: object, at: str) -> SchemaNode:
    if not isinstance(obj, dict):
        raise SchemaError("node must be an object", at)
    name = obj.get("name")
    if not isinstance(name, str) or not name:
        raise SchemaError("node name must be a non-empty string", at)
    if PATH_SEPARATOR in name:
        raise SchemaError(f"node name may not contain {PATH_SEPARATOR!r}", at or name)
    here = f"{at}{PATH_SEPARATOR}{name}" if at else name
    description = obj.get("description", "")
    if not isinstance(description, str):
        raise SchemaError("node description must be a string", here)
    raw_children = obj.get("children", [])
    if not isinstance(raw_children, list):
        raise SchemaError("children must be a list", here)
    children = tuple(_parse_node(c, here) for c in raw_children)
    seen: set[str] = set()
    for c in children:
        if c.name in seen:
            raise SchemaError(f"duplicate sibling name {c.name!r}", f"{here}{PATH_SEPARATOR}{c.name}")
        seen.add(c.name)
    return SchemaNode(name=name, description=description, children=children)


def load_schema(document: str) -> RegisterSchema:
    """Parse and validate a schema JSON document (see the schema file format)."""
    try:
        obj = json.loads(document)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"malformed schema document: {exc}") from exc
    if not isinstance(obj, dict):
        raise SchemaError("schema document must be a JSON object")
    raw_type = obj.get("paper_type")
    paper_type = parse_paper_type(raw_type) if isinstance(raw_type, str) else None
    if paper_type is None:
        raise SchemaError(f"unknown paper_type {raw_type!r}")
    version = obj.get("version")
    if not isinstance(version, str) or not version:
        raise SchemaError("version must be a non-empty string")
    if "root" not in obj:
        raise SchemaError("schema document has no root node")
    root = _parse_node(obj["root"], "")
    if root.is_leaf:
        raise SchemaError("schema must have depth >= 2 (root needs children)", root.name)
    return RegisterSchema(paper_type=paper_type, root=root, version=version)


def load_schema_file(path: str) -> RegisterSchema:
    with open(path, encoding="utf-8") as fh:
        return load_schema(fh.read())


def default_schemas() -> dict[PaperType, RegisterSchema]:
    """Load the five bundled schema files, one per paper type."""
    schemas: dict[PaperType, RegisterSchema] = {}
    pkg = resources.files("registerdex.schemas")
    for entry in sorted(pkg.iterdir(), key=lambda e: e.name):
        if entry.name.endswith(".json"):
            schema = load_schema(entry.read_text(encoding="utf-8"))
            schemas[schema.paper_type] = schema
    missing = [t for t in PaperType if t not in schemas]
    if missing:
        raise SchemaError(f"bundled schemas missing paper types: {missing}")
    return schemas


def _walk(node: SchemaNode, prefix: tuple[str, ...]) -> Iterator[tuple[tuple[str, ...], SchemaNode]]:
    path = prefix + (node.name,)
    yield path, node
    for child in node.children:
        yield from _walk(child, path)


def all_paths(schema: RegisterSchema) -> list[NodePath]:
    """Every root-to-node path (internal nodes included), deterministic pre-order."""
    return [NodePath(segments) for segments, _ in _walk(schema.root, ())]


def leaf_paths(schema: RegisterSchema) -> list[NodePath]:
    """Paths whose terminal node is childless (per-branch leaves)."""
    return [NodePath(segments) for segments, node in _walk(schema.root, ()) if node.is_leaf]


def validate_path(schema: RegisterSchema, path: NodePath) -> bool:
    return schema.resolve(path) is not None
